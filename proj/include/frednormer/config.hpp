#pragma once

#include "frednormer/model.hpp"
#include "frednormer/pipeline.hpp"

#include <map>
#include <sstream>

namespace frednormer {

/// Everything one run needs: where data comes from, how to slice it, how to train.
struct RunConfig {
    DatasetSpec dataset;
    TrainConfig train;
    ModelConfig model;
};

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return std::string(s.substr(b, e - b));
}

inline bool parse_bool(const std::string& value, const std::string& context) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw std::runtime_error(context + ": expected true/false, got '" + value + "'");
}

// "12:1.0, 5:0.8" -> fixed-amplitude tones
inline std::vector<Tone> parse_stable_tones(const std::string& value, const std::string& context) {
    std::vector<Tone> tones;
    if (trim(value).empty()) return tones;
    for (std::string_view entry : split_fields(value, ',')) {
        const std::string item = trim(entry);
        const auto parts = split_fields(item, ':');
        if (parts.size() != 2) {
            throw std::runtime_error(context + ": entry '" + item + "' must be bin:amplitude");
        }
        Tone tone;
        tone.bin = parse_size_field(parts[0], context + " bin");
        tone.amplitude = parse_double_field(parts[1], context + " amplitude");
        tones.push_back(tone);
    }
    return tones;
}

// "3:0.25:2.5" -> tones with a per-segment amplitude range
inline std::vector<UnstableTone> parse_unstable_tones(const std::string& value,
                                                      const std::string& context) {
    std::vector<UnstableTone> tones;
    if (trim(value).empty()) return tones;
    for (std::string_view entry : split_fields(value, ',')) {
        const std::string item = trim(entry);
        const auto parts = split_fields(item, ':');
        if (parts.size() != 3) {
            throw std::runtime_error(context + ": entry '" + item + "' must be bin:low:high");
        }
        UnstableTone tone;
        tone.bin = parse_size_field(parts[0], context + " bin");
        tone.amp_low = parse_double_field(parts[1], context + " low amplitude");
        tone.amp_high = parse_double_field(parts[2], context + " high amplitude");
        tones.push_back(tone);
    }
    return tones;
}

inline std::string tones_to_text(const std::vector<Tone>& tones) {
    std::string out;
    for (const Tone& t : tones) {
        if (!out.empty()) out += ',';
        out += std::to_string(t.bin) + ":" + format_double(t.amplitude);
    }
    return out;
}

inline std::string tones_to_text(const std::vector<UnstableTone>& tones) {
    std::string out;
    for (const UnstableTone& t : tones) {
        if (!out.empty()) out += ',';
        out += std::to_string(t.bin) + ":" + format_double(t.amp_low) + ":"
               + format_double(t.amp_high);
    }
    return out;
}

} // namespace detail

/**
 * Parse a flat key = value config. Lines starting with '#' and blank lines
 * are skipped; unknown or duplicate keys are errors. Every key is optional
 * and falls back to the default built into RunConfig (the full list with
 * defaults is what serialize_config emits).
 */
inline RunConfig parse_config(std::istream& in, const std::string& name) {
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string text = detail::trim(line);
        if (text.empty() || text[0] == '#') continue;
        const std::size_t eq = text.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error(name + " line " + std::to_string(line_no)
                                     + ": expected key = value");
        }
        const std::string key = detail::trim(std::string_view(text).substr(0, eq));
        const std::string value = detail::trim(std::string_view(text).substr(eq + 1));
        if (key.empty()) {
            throw std::runtime_error(name + " line " + std::to_string(line_no) + ": empty key");
        }
        if (!kv.emplace(key, value).second) {
            throw std::runtime_error(name + " line " + std::to_string(line_no)
                                     + ": duplicate key '" + key + "'");
        }
    }

    RunConfig config;
    SynthSpec synth;
    synth.length = 2000;
    CsvSource csv;
    std::string source = "synth";
    std::string filter = "stability";
    std::string init = "identity";
    std::string optimizer = "adam";

    auto take = [&](const char* key) -> std::optional<std::string> {
        auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        std::string value = it->second;
        kv.erase(it);
        return value;
    };
    auto ctx = [&](const char* key) { return name + " key '" + std::string(key) + "'"; };

    if (auto v = take("data.source")) source = *v;
    if (auto v = take("data.csv_path")) csv.path = *v;
    if (auto v = take("data.csv_date_column")) csv.date_column = detail::parse_bool(*v, ctx("data.csv_date_column"));
    if (auto v = take("data.lookback")) config.dataset.lookback = parse_size_field(*v, ctx("data.lookback"));
    if (auto v = take("data.horizon")) config.dataset.horizon = parse_size_field(*v, ctx("data.horizon"));
    if (auto v = take("data.train_fraction")) config.dataset.fractions.train = parse_double_field(*v, ctx("data.train_fraction"));
    if (auto v = take("data.val_fraction")) config.dataset.fractions.val = parse_double_field(*v, ctx("data.val_fraction"));
    if (auto v = take("data.test_fraction")) config.dataset.fractions.test = parse_double_field(*v, ctx("data.test_fraction"));
    if (auto v = take("data.stride")) config.dataset.stride = parse_size_field(*v, ctx("data.stride"));

    if (auto v = take("synth.length")) synth.length = parse_size_field(*v, ctx("synth.length"));
    if (auto v = take("synth.channels")) synth.channels = parse_size_field(*v, ctx("synth.channels"));
    if (auto v = take("synth.segment_length")) synth.segment_length = parse_size_field(*v, ctx("synth.segment_length"));
    if (auto v = take("synth.stable_tones")) synth.stable_tones = detail::parse_stable_tones(*v, ctx("synth.stable_tones"));
    if (auto v = take("synth.unstable_tones")) synth.unstable_tones = detail::parse_unstable_tones(*v, ctx("synth.unstable_tones"));
    if (auto v = take("synth.trend_slope")) synth.trend_slope = parse_double_field(*v, ctx("synth.trend_slope"));
    if (auto v = take("synth.noise_std")) synth.noise_std = parse_double_field(*v, ctx("synth.noise_std"));
    if (auto v = take("synth.seed")) synth.seed = parse_ull_field(*v, ctx("synth.seed"));

    if (auto v = take("train.epochs")) config.train.epochs = parse_size_field(*v, ctx("train.epochs"));
    if (auto v = take("train.batch_size")) config.train.batch_size = parse_size_field(*v, ctx("train.batch_size"));
    if (auto v = take("train.lr")) config.train.learning_rate = parse_double_field(*v, ctx("train.lr"));
    if (auto v = take("train.optimizer")) optimizer = *v;
    if (auto v = take("train.beta1")) config.train.beta1 = parse_double_field(*v, ctx("train.beta1"));
    if (auto v = take("train.beta2")) config.train.beta2 = parse_double_field(*v, ctx("train.beta2"));
    if (auto v = take("train.eps")) config.train.adam_eps = parse_double_field(*v, ctx("train.eps"));
    if (auto v = take("train.seed")) config.train.seed = parse_ull_field(*v, ctx("train.seed"));
    if (auto v = take("train.grad_clip")) config.train.grad_clip = parse_double_field(*v, ctx("train.grad_clip"));
    if (auto v = take("train.weighting")) config.train.train_weighting = detail::parse_bool(*v, ctx("train.weighting"));

    if (auto v = take("model.filter")) filter = *v;
    if (auto v = take("model.lowpass_cutoff")) config.model.lowpass_cutoff = parse_size_field(*v, ctx("model.lowpass_cutoff"));
    if (auto v = take("model.random_count")) config.model.random_count = parse_size_field(*v, ctx("model.random_count"));
    if (auto v = take("model.random_seed")) config.model.random_seed = parse_ull_field(*v, ctx("model.random_seed"));
    if (auto v = take("model.init")) init = *v;
    if (auto v = take("model.decompose")) config.model.decompose = detail::parse_bool(*v, ctx("model.decompose"));
    if (auto v = take("model.kernel")) config.model.kernel = parse_size_field(*v, ctx("model.kernel"));
    if (auto v = take("model.norm_eps")) config.model.norm_eps = parse_double_field(*v, ctx("model.norm_eps"));

    if (!kv.empty()) {
        throw std::runtime_error(name + ": unknown key '" + kv.begin()->first + "'");
    }

    if (source == "synth") {
        config.dataset.source = synth;
    } else if (source == "csv") {
        if (csv.path.empty()) throw std::runtime_error(name + ": data.source = csv needs data.csv_path");
        config.dataset.source = csv;
    } else {
        throw std::runtime_error(name + ": data.source must be synth or csv, got '" + source + "'");
    }

    if (filter == "stability") {
        config.model.filter_type = FilterType::StabilityWeighting;
    } else if (filter == "lowpass") {
        config.model.filter_type = FilterType::LowPass;
    } else if (filter == "random") {
        config.model.filter_type = FilterType::RandomSelect;
    } else {
        throw std::runtime_error(name + ": model.filter must be stability, lowpass or random");
    }

    if (init == "identity") {
        config.model.init_scheme = InitScheme::Identity;
    } else if (init == "unitw") {
        config.model.init_scheme = InitScheme::UnitW;
    } else {
        throw std::runtime_error(name + ": model.init must be identity or unitw");
    }

    if (optimizer == "adam") {
        config.train.optimizer = OptimizerType::Adam;
    } else if (optimizer == "sgd") {
        config.train.optimizer = OptimizerType::Sgd;
    } else {
        throw std::runtime_error(name + ": train.optimizer must be adam or sgd");
    }

    validate_dataset_spec(config.dataset);
    validate_train_config(config.train);
    if (const auto* s = std::get_if<SynthSpec>(&config.dataset.source)) validate_synth_spec(*s);
    return config;
}

inline RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("parse_config: cannot open '" + path + "'");
    return parse_config(in, "config " + path);
}

inline RunConfig parse_config_text(const std::string& text, const std::string& name = "config") {
    std::istringstream in(text);
    return parse_config(in, name);
}

/**
 * Effective-config echo: every key with its resolved value, defaults
 * included, in a fixed order. Feeding the output back into parse_config
 * reproduces the same RunConfig.
 */
inline std::string serialize_config(const RunConfig& config) {
    std::ostringstream out;
    const bool is_synth = std::holds_alternative<SynthSpec>(config.dataset.source);
    const SynthSpec synth = is_synth ? std::get<SynthSpec>(config.dataset.source) : SynthSpec{};
    const CsvSource csv = is_synth ? CsvSource{} : std::get<CsvSource>(config.dataset.source);

    out << "data.source = " << (is_synth ? "synth" : "csv") << '\n';
    out << "data.csv_path = " << csv.path << '\n';
    out << "data.csv_date_column = " << (csv.date_column ? "true" : "false") << '\n';
    out << "data.lookback = " << config.dataset.lookback << '\n';
    out << "data.horizon = " << config.dataset.horizon << '\n';
    out << "data.train_fraction = " << format_double(config.dataset.fractions.train) << '\n';
    out << "data.val_fraction = " << format_double(config.dataset.fractions.val) << '\n';
    out << "data.test_fraction = " << format_double(config.dataset.fractions.test) << '\n';
    out << "data.stride = " << config.dataset.stride << '\n';

    out << "synth.length = " << synth.length << '\n';
    out << "synth.channels = " << synth.channels << '\n';
    out << "synth.segment_length = " << synth.segment_length << '\n';
    out << "synth.stable_tones = " << detail::tones_to_text(synth.stable_tones) << '\n';
    out << "synth.unstable_tones = " << detail::tones_to_text(synth.unstable_tones) << '\n';
    out << "synth.trend_slope = " << format_double(synth.trend_slope) << '\n';
    out << "synth.noise_std = " << format_double(synth.noise_std) << '\n';
    out << "synth.seed = " << synth.seed << '\n';

    out << "train.epochs = " << config.train.epochs << '\n';
    out << "train.batch_size = " << config.train.batch_size << '\n';
    out << "train.lr = " << format_double(config.train.learning_rate) << '\n';
    out << "train.optimizer = "
        << (config.train.optimizer == OptimizerType::Adam ? "adam" : "sgd") << '\n';
    out << "train.beta1 = " << format_double(config.train.beta1) << '\n';
    out << "train.beta2 = " << format_double(config.train.beta2) << '\n';
    out << "train.eps = " << format_double(config.train.adam_eps) << '\n';
    out << "train.seed = " << config.train.seed << '\n';
    out << "train.grad_clip = " << format_double(config.train.grad_clip) << '\n';
    out << "train.weighting = " << (config.train.train_weighting ? "true" : "false") << '\n';

    out << "model.filter = "
        << (config.model.filter_type == FilterType::StabilityWeighting
                ? "stability"
                : config.model.filter_type == FilterType::LowPass ? "lowpass" : "random")
        << '\n';
    out << "model.lowpass_cutoff = " << config.model.lowpass_cutoff << '\n';
    out << "model.random_count = " << config.model.random_count << '\n';
    out << "model.random_seed = " << config.model.random_seed << '\n';
    out << "model.init = "
        << (config.model.init_scheme == InitScheme::UnitW ? "unitw" : "identity") << '\n';
    out << "model.decompose = " << (config.model.decompose ? "true" : "false") << '\n';
    out << "model.kernel = " << config.model.kernel << '\n';
    out << "model.norm_eps = " << format_double(config.model.norm_eps) << '\n';
    return out.str();
}

} // namespace frednormer
