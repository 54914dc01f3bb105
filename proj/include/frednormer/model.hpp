#pragma once

#include "frednormer/backbone.hpp"
#include "frednormer/frednormer.hpp"
#include "frednormer/norm.hpp"

namespace frednormer {

/**
 * Model-side settings. Lookback and horizon come from the dataset spec;
 * everything here is about the processing stack between them. All three
 * filters keep their settings so an ablation sweep only has to flip
 * filter_type.
 */
struct ModelConfig {
    FilterType filter_type = FilterType::StabilityWeighting;
    std::size_t lowpass_cutoff = 8;
    std::size_t random_count = 8;
    unsigned long long random_seed = 0;
    InitScheme init_scheme = InitScheme::Identity;
    bool decompose = true;       // trend/seasonal split when the kernel fits
    std::size_t kernel = 25;     // moving-average kernel, odd
    double norm_eps = 1e-5;

    FilterKind filter() const {
        switch (filter_type) {
            case FilterType::LowPass: return FilterKind::low_pass(lowpass_cutoff);
            case FilterType::RandomSelect:
                return FilterKind::random_select(random_count, random_seed);
            case FilterType::StabilityWeighting:
            default: return FilterKind::stability();
        }
    }
};

/// Everything needed to forecast: frozen measure, weighting layer, backbone.
struct ForecastModel {
    std::size_t lookback = 0;
    std::size_t horizon = 0;
    FilterKind filter;
    double norm_eps = 1e-5;
    FredNormerParams params;
    LinearBackbone backbone;
    StabilityMeasure measure;
};

inline ForecastModel build_model(const ModelConfig& config, std::size_t lookback,
                                 std::size_t horizon, StabilityMeasure measure,
                                 unsigned long long seed) {
    require(lookback >= 2 && horizon >= 1, "build_model: bad lookback/horizon");
    const std::size_t K = spectrum_bins(lookback);
    require(measure.scores.rows == K, "build_model: measure bin count does not match lookback");
    require(config.norm_eps > 0.0, "build_model: norm eps must be positive");

    ForecastModel model;
    model.lookback = lookback;
    model.horizon = horizon;
    model.filter = config.filter();
    model.norm_eps = config.norm_eps;
    model.params = init_params(K, config.init_scheme);
    const bool decomposed = config.decompose && config.kernel <= lookback;
    model.backbone = make_backbone(lookback, horizon,
                                   decomposed ? Decomposition::MovingAverage
                                              : Decomposition::None,
                                   config.kernel, seed);
    model.measure = std::move(measure);
    return model;
}

/// Full inference path: z-normalize, spectral weighting, backbone, denormalize.
inline TimeWindow model_predict(const ForecastModel& model, const TimeWindow& window) {
    require(window.rows == model.lookback, "model_predict: window length mismatch");
    require(window.cols == model.measure.scores.cols,
            "model_predict: channel count does not match the stability measure");
    const auto [z, stats] = normalize(window, model.norm_eps);
    const TimeWindow weighted = apply_filter(model.filter, model.measure, model.params, z);
    const TimeWindow forecast_z = predict(model.backbone, weighted);
    return denormalize(forecast_z, stats);
}

inline std::string filter_to_text(const FilterKind& filter) {
    switch (filter.type) {
        case FilterType::LowPass:
            return "lowpass " + std::to_string(filter.cutoff);
        case FilterType::RandomSelect:
            return "random " + std::to_string(filter.select_count) + " "
                   + std::to_string(filter.seed);
        case FilterType::StabilityWeighting:
        default:
            return "stability";
    }
}

inline FilterKind filter_from_text(const std::string& text, const std::string& name) {
    const auto fields = split_fields(text);
    if (fields.empty()) throw std::runtime_error(name + ": empty filter description");
    if (fields[0] == "stability") {
        if (fields.size() != 1) throw std::runtime_error(name + ": stability filter takes no arguments");
        return FilterKind::stability();
    }
    if (fields[0] == "lowpass") {
        if (fields.size() != 2) throw std::runtime_error(name + ": lowpass filter needs a cutoff");
        return FilterKind::low_pass(parse_size_field(fields[1], name + " lowpass cutoff"));
    }
    if (fields[0] == "random") {
        if (fields.size() != 3) throw std::runtime_error(name + ": random filter needs count and seed");
        const std::size_t m = parse_size_field(fields[1], name + " random count");
        return FilterKind::random_select(m, parse_ull_field(fields[2], name + " random seed"));
    }
    throw std::runtime_error(name + ": unknown filter '" + std::string(fields[0]) + "'");
}

/**
 * Self-contained checkpoint, readable without the training config:
 *
 *   frednormer-model 1
 *   dims <L> <H>
 *   filter <description>
 *   norm <eps>
 *   measure / params / backbone sections in their own formats
 */
inline void save_model(const ForecastModel& model, std::ostream& out) {
    out << "frednormer-model 1\n";
    out << "dims " << model.lookback << ' ' << model.horizon << '\n';
    out << "filter " << filter_to_text(model.filter) << '\n';
    out << "norm " << format_double(model.norm_eps) << '\n';
    out << "measure\n";
    save_measure(model.measure, out);
    out << "params\n";
    save_params(model.params, out);
    out << "backbone\n";
    save_backbone(model.backbone, out);
}

inline void save_model(const ForecastModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_model: cannot open '" + path + "' for writing");
    save_model(model, out);
    if (!out) throw std::runtime_error("save_model: write to '" + path + "' failed");
}

inline ForecastModel load_model(std::istream& in, const std::string& name) {
    auto next_line = [&](const char* what) {
        std::string line;
        if (!std::getline(in, line)) {
            throw std::runtime_error(name + ": truncated before " + what);
        }
        return line;
    };
    auto expect_tag = [&](const std::string& line, const std::string& tag, const char* what) {
        if (line.rfind(tag, 0) != 0) {
            throw std::runtime_error(name + ": expected " + std::string(what) + ", found '"
                                     + line + "'");
        }
        std::string rest = line.substr(tag.size());
        if (!rest.empty() && rest.front() == ' ') rest.erase(0, 1);
        return rest;
    };

    if (next_line("magic") != "frednormer-model 1") {
        throw std::runtime_error(name + ": not a version-1 model checkpoint");
    }
    ForecastModel model;
    {
        const std::string rest = expect_tag(next_line("dims"), "dims", "dims line");
        const auto fields = split_fields(rest);
        if (fields.size() != 2) throw std::runtime_error(name + ": dims line must be 'dims L H'");
        model.lookback = parse_size_field(fields[0], name + " dims L");
        model.horizon = parse_size_field(fields[1], name + " dims H");
    }
    model.filter = filter_from_text(expect_tag(next_line("filter"), "filter", "filter line"), name);
    {
        const std::string rest = expect_tag(next_line("norm"), "norm", "norm line");
        const auto fields = split_fields(rest);
        if (fields.size() != 1) throw std::runtime_error(name + ": norm line must be 'norm eps'");
        model.norm_eps = parse_double_field(fields[0], name + " norm eps");
        if (!(model.norm_eps > 0.0)) throw std::runtime_error(name + ": norm eps must be positive");
    }
    expect_tag(next_line("measure section"), "measure", "measure section");
    model.measure = load_measure(in, name + " measure");
    expect_tag(next_line("params section"), "params", "params section");
    model.params = load_params(in, name + " params");
    expect_tag(next_line("backbone section"), "backbone", "backbone section");
    model.backbone = load_backbone(in, name + " backbone");

    const std::size_t K = spectrum_bins(model.lookback);
    require(model.params.bins() == K, name + ": params bin count does not match lookback");
    require(model.measure.scores.rows == K, name + ": measure bin count does not match lookback");
    require(model.backbone.lookback == model.lookback && model.backbone.horizon == model.horizon,
            name + ": backbone dims do not match the dims line");
    return model;
}

inline ForecastModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_model: cannot open '" + path + "'");
    return load_model(in, "model checkpoint " + path);
}

} // namespace frednormer
