#pragma once

#include "frednormer/spectral.hpp"
#include "frednormer/textio.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <random>
#include <variant>

namespace frednormer {

/// A tone whose amplitude is fixed for the whole series.
struct Tone {
    std::size_t bin = 1;      // frequency index relative to segment_length
    double amplitude = 1.0;
};

/// A tone whose amplitude is redrawn uniformly from [low, high] per segment.
struct UnstableTone {
    std::size_t bin = 1;
    double amp_low = 0.5;
    double amp_high = 1.5;
};

/**
 * Recipe for a synthetic non-stationary series: linear trend, tones with
 * fixed amplitude (stable), tones whose amplitude is redrawn each
 * segment_length block (unstable), and Gaussian noise. Everything is
 * determined by the seed.
 */
struct SynthSpec {
    std::size_t length = 0;           // T
    std::size_t channels = 1;         // C
    std::size_t segment_length = 96;  // tone period base and amplitude-redraw block
    std::vector<Tone> stable_tones;
    std::vector<UnstableTone> unstable_tones;
    double trend_slope = 0.0;
    double noise_std = 0.0;
    unsigned long long seed = 0;
};

inline void validate_synth_spec(const SynthSpec& spec) {
    require(spec.length >= 1, "synth spec: length must be positive");
    require(spec.channels >= 1, "synth spec: channels must be positive");
    require(spec.segment_length >= 2, "synth spec: segment length must be at least 2");
    require(std::isfinite(spec.trend_slope), "synth spec: trend slope must be finite");
    require(spec.noise_std >= 0.0 && std::isfinite(spec.noise_std),
            "synth spec: noise std must be finite and non-negative");
    const std::size_t max_bin = spec.segment_length / 2;
    for (const Tone& t : spec.stable_tones) {
        require(t.bin >= 1 && t.bin <= max_bin,
                "synth spec: stable tone bin must be in [1, segment_length/2]");
        require(std::isfinite(t.amplitude), "synth spec: stable tone amplitude must be finite");
    }
    for (const UnstableTone& t : spec.unstable_tones) {
        require(t.bin >= 1 && t.bin <= max_bin,
                "synth spec: unstable tone bin must be in [1, segment_length/2]");
        require(std::isfinite(t.amp_low) && std::isfinite(t.amp_high)
                    && t.amp_low <= t.amp_high,
                "synth spec: unstable tone amplitude range must satisfy low <= high");
    }
}

/**
 * Generate the series. Draw order is fixed so a seed fully determines the
 * output: per channel, stable tone phases, then per unstable tone its
 * phase and all per-segment amplitudes, then noise in row-major order.
 */
inline Matrix synthesize(const SynthSpec& spec) {
    validate_synth_spec(spec);
    const std::size_t T = spec.length;
    const std::size_t C = spec.channels;
    const std::size_t seg = spec.segment_length;
    const std::size_t segments = (T + seg - 1) / seg;
    const double base = detail::kTwoPi / static_cast<double>(seg);

    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> phase_dist(0.0, detail::kTwoPi);

    Matrix series(T, C);
    for (std::size_t c = 0; c < C; ++c) {
        for (const Tone& tone : spec.stable_tones) {
            const double phase = phase_dist(rng);
            const double w = base * static_cast<double>(tone.bin);
            for (std::size_t t = 0; t < T; ++t) {
                series(t, c) += tone.amplitude * std::sin(w * static_cast<double>(t) + phase);
            }
        }
        for (const UnstableTone& tone : spec.unstable_tones) {
            const double phase = phase_dist(rng);
            std::uniform_real_distribution<double> amp_dist(tone.amp_low, tone.amp_high);
            std::vector<double> amps(segments);
            for (double& a : amps) a = amp_dist(rng);
            const double w = base * static_cast<double>(tone.bin);
            for (std::size_t t = 0; t < T; ++t) {
                series(t, c) += amps[t / seg] * std::sin(w * static_cast<double>(t) + phase);
            }
        }
    }
    if (spec.trend_slope != 0.0) {
        for (std::size_t t = 0; t < T; ++t) {
            const double v = spec.trend_slope * static_cast<double>(t);
            for (std::size_t c = 0; c < C; ++c) series(t, c) += v;
        }
    }
    if (spec.noise_std > 0.0) {
        std::normal_distribution<double> noise(0.0, spec.noise_std);
        for (double& v : series.data) v += noise(rng);
    }
    return series;
}

struct CsvSource {
    std::string path;
    bool date_column = true;
};

struct SplitFractions {
    double train = 0.6;
    double val = 0.2;
    double test = 0.2;
};

struct DatasetSpec {
    std::variant<CsvSource, SynthSpec> source;
    std::size_t lookback = 96;
    std::size_t horizon = 96;
    SplitFractions fractions;
    std::size_t stride = 1;
};

inline void validate_dataset_spec(const DatasetSpec& spec) {
    require(spec.lookback >= 2, "dataset spec: lookback must be at least 2");
    require(spec.horizon >= 1, "dataset spec: horizon must be positive");
    require(spec.stride >= 1, "dataset spec: stride must be positive");
    const SplitFractions& f = spec.fractions;
    require(f.train > 0.0 && f.val >= 0.0 && f.test >= 0.0,
            "dataset spec: train fraction must be positive, others non-negative");
    require(std::abs(f.train + f.val + f.test - 1.0) < 1e-9,
            "dataset spec: split fractions must sum to 1");
}

/**
 * Load an ETT-style CSV: one header row, then rows of decimal channels,
 * optionally preceded by a date column that is skipped. Errors carry the
 * 1-based file line and column of the offending cell.
 */
inline Matrix load_csv(const std::string& path, bool date_column) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_csv: cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("load_csv: '" + path + "' is empty");

    std::vector<double> values;
    std::size_t channels = 0;
    std::size_t line_no = 1;   // header consumed
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_fields(line, ',');
        const std::size_t first = date_column ? 1 : 0;
        if (fields.size() <= first) {
            throw std::runtime_error("load_csv: '" + path + "' line " + std::to_string(line_no)
                                     + " has no data columns");
        }
        const std::size_t row_channels = fields.size() - first;
        if (channels == 0) {
            channels = row_channels;
        } else if (row_channels != channels) {
            throw std::runtime_error("load_csv: '" + path + "' line " + std::to_string(line_no)
                                     + " has " + std::to_string(row_channels)
                                     + " data columns, expected " + std::to_string(channels));
        }
        for (std::size_t i = first; i < fields.size(); ++i) {
            values.push_back(parse_double_field(
                fields[i], "load_csv: '" + path + "' line " + std::to_string(line_no)
                               + " column " + std::to_string(i + 1)));
        }
    }
    if (channels == 0) throw std::runtime_error("load_csv: '" + path + "' has no data rows");

    Matrix series(values.size() / channels, channels);
    series.data = std::move(values);
    return series;
}

/// Write a series in the same CSV shape load_csv reads (hourly dates from 2016-07-01).
inline void save_csv(const Matrix& series, const std::string& path, bool date_column = true) {
    require(series.rows >= 1 && series.cols >= 1, "save_csv: empty series");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_csv: cannot open '" + path + "' for writing");

    if (date_column) out << "date";
    for (std::size_t c = 0; c < series.cols; ++c) {
        if (date_column || c > 0) out << ',';
        out << "ch" << c;
    }
    out << '\n';

    using namespace std::chrono;
    const sys_seconds start = sys_days{year{2016} / 7 / 1};
    char stamp[48];
    for (std::size_t t = 0; t < series.rows; ++t) {
        if (date_column) {
            const sys_seconds when = start + hours{t};
            const auto day = floor<days>(when);
            const year_month_day ymd{day};
            const hh_mm_ss tod{when - day};
            std::snprintf(stamp, sizeof stamp, "%04d-%02u-%02u %02ld:00:00",
                          static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                          static_cast<unsigned>(ymd.day()),
                          static_cast<long>(tod.hours().count()));
            out << stamp << ',';
        }
        for (std::size_t c = 0; c < series.cols; ++c) {
            if (c) out << ',';
            out << format_double(series(t, c));
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("save_csv: write to '" + path + "' failed");
}

inline Matrix load_series(const DatasetSpec& spec) {
    if (const auto* csv = std::get_if<CsvSource>(&spec.source)) {
        return load_csv(csv->path, csv->date_column);
    }
    return synthesize(std::get<SynthSpec>(spec.source));
}

/// One chronological slice of the series plus the window start indices inside it.
struct WindowSplit {
    std::size_t begin = 0;              // series rows [begin, end)
    std::size_t end = 0;
    std::vector<std::size_t> starts;    // input window start rows

    std::size_t count() const { return starts.size(); }
    bool empty() const { return starts.empty(); }
};

struct WindowSets {
    Matrix series;
    std::size_t lookback = 0;
    std::size_t horizon = 0;
    WindowSplit train;
    WindowSplit val;
    WindowSplit test;
};

/**
 * Chronological split by the given fractions, then sliding (L input,
 * H target) pairs inside each split at the given stride. A pair fits a
 * split only if all L + H of its rows lie inside it, so no pair straddles
 * a boundary.
 */
inline WindowSets make_windows(Matrix series, const DatasetSpec& spec) {
    validate_dataset_spec(spec);
    const std::size_t T = series.rows;
    const std::size_t L = spec.lookback;
    const std::size_t H = spec.horizon;
    require(T >= L + H, "make_windows: series shorter than lookback + horizon");
    require(series.cols >= 1, "make_windows: series has no channels");

    const std::size_t n_train = static_cast<std::size_t>(
        static_cast<double>(T) * spec.fractions.train);
    const std::size_t n_val = static_cast<std::size_t>(
        static_cast<double>(T) * spec.fractions.val);
    require(n_train >= L + H, "make_windows: training split shorter than lookback + horizon");

    WindowSets sets;
    sets.lookback = L;
    sets.horizon = H;
    sets.series = std::move(series);

    auto fill = [&](WindowSplit& split, std::size_t begin, std::size_t end) {
        split.begin = begin;
        split.end = end;
        for (std::size_t s = begin; s + L + H <= end; s += spec.stride) {
            split.starts.push_back(s);
        }
    };
    fill(sets.train, 0, n_train);
    fill(sets.val, n_train, std::min(n_train + n_val, T));
    fill(sets.test, std::min(n_train + n_val, T), T);
    return sets;
}

inline TimeWindow input_window(const WindowSets& sets, std::size_t start) {
    const std::size_t C = sets.series.cols;
    TimeWindow w(sets.lookback, C);
    for (std::size_t l = 0; l < sets.lookback; ++l) {
        for (std::size_t c = 0; c < C; ++c) w(l, c) = sets.series(start + l, c);
    }
    return w;
}

inline TimeWindow target_window(const WindowSets& sets, std::size_t start) {
    const std::size_t C = sets.series.cols;
    TimeWindow w(sets.horizon, C);
    for (std::size_t h = 0; h < sets.horizon; ++h) {
        for (std::size_t c = 0; c < C; ++c) w(h, c) = sets.series(start + sets.lookback + h, c);
    }
    return w;
}

} // namespace frednormer
