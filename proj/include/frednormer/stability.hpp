#pragma once

#include "frednormer/spectral.hpp"
#include "frednormer/textio.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

namespace frednormer {

/**
 * Per-frequency stability scores S = mu / (sigma + eps) with
 * sigma = sqrt(max(E[A^2] - mu^2, 0) + eps), estimated over the training
 * split's window amplitudes. High S means a bin carries consistent energy
 * across samples.
 */
struct StabilityMeasure {
    Matrix scores;                   // K x C, finite and >= 0
    std::size_t sample_count = 0;    // N
    double epsilon = 1e-5;
};

/**
 * Streaming sums of window amplitudes and their squares. Accumulators over
 * disjoint shards merge by elementwise addition, so the measure can be
 * built in parallel and finalized once.
 */
struct AmplitudeAccumulator {
    Matrix sum_a;                    // K x C
    Matrix sum_a2;                   // K x C
    std::size_t count = 0;

    AmplitudeAccumulator() = default;
    AmplitudeAccumulator(std::size_t bins, std::size_t channels)
        : sum_a(bins, channels), sum_a2(bins, channels) {}

    bool empty() const { return sum_a.empty(); }
};

/**
 * Add one window's amplitude spectrum to the running sums. Amplitudes are
 * taken on the raw window: no differencing and no z-scoring happens before
 * the measure, matching the workflow where the measure is frozen before the
 * weighting layer ever runs.
 */
inline AmplitudeAccumulator accumulate(AmplitudeAccumulator acc, const TimeWindow& window) {
    const Spectrum spec = dft(window);
    const AmplitudeMatrix amp = amplitudes(spec);
    if (acc.empty()) {
        acc.sum_a = Matrix(amp.amplitudes.rows, amp.amplitudes.cols);
        acc.sum_a2 = Matrix(amp.amplitudes.rows, amp.amplitudes.cols);
    }
    require(acc.sum_a.same_shape(amp.amplitudes),
            "accumulate: window dimensions disagree with accumulator");
    for (std::size_t i = 0; i < amp.amplitudes.size(); ++i) {
        const double a = amp.amplitudes.data[i];
        acc.sum_a.data[i] += a;
        acc.sum_a2.data[i] += a * a;
    }
    acc.count += 1;
    return acc;
}

inline AmplitudeAccumulator merge(AmplitudeAccumulator a, const AmplitudeAccumulator& b) {
    if (b.empty()) return a;
    if (a.empty()) return b;
    require(a.sum_a.same_shape(b.sum_a), "merge: accumulator dimensions disagree");
    for (std::size_t i = 0; i < a.sum_a.size(); ++i) {
        a.sum_a.data[i] += b.sum_a.data[i];
        a.sum_a2.data[i] += b.sum_a2.data[i];
    }
    a.count += b.count;
    return a;
}

// Per-bin mean/stddev/score triple, mainly for plot emission.
struct MeasureStats {
    Matrix mu;      // K x C
    Matrix sigma;   // K x C, includes the +eps inside the sqrt
    Matrix scores;  // K x C
};

inline MeasureStats finalize_stats(const AmplitudeAccumulator& acc, double epsilon = 1e-5) {
    if (acc.count == 0) throw std::runtime_error("finalize: empty dataset, no windows accumulated");
    require(epsilon > 0.0, "finalize: epsilon must be positive");
    const double n = static_cast<double>(acc.count);
    MeasureStats out;
    out.mu = Matrix(acc.sum_a.rows, acc.sum_a.cols);
    out.sigma = Matrix(acc.sum_a.rows, acc.sum_a.cols);
    out.scores = Matrix(acc.sum_a.rows, acc.sum_a.cols);
    for (std::size_t i = 0; i < acc.sum_a.size(); ++i) {
        const double mu = acc.sum_a.data[i] / n;
        // E[A^2] - mu^2 can come out slightly negative under cancellation;
        // clamp before the eps stabilizer is added.
        const double var = std::max(acc.sum_a2.data[i] / n - mu * mu, 0.0);
        const double sigma = std::sqrt(var + epsilon);
        out.mu.data[i] = mu;
        out.sigma.data[i] = sigma;
        out.scores.data[i] = mu / (sigma + epsilon);
    }
    return out;
}

inline StabilityMeasure finalize(const AmplitudeAccumulator& acc, double epsilon = 1e-5) {
    StabilityMeasure measure;
    measure.scores = finalize_stats(acc, epsilon).scores;
    measure.sample_count = acc.count;
    measure.epsilon = epsilon;
    return measure;
}

/**
 * The m non-zero frequency indices with the highest stability for one
 * channel, ties broken toward the lower index. The DC bin never qualifies.
 * Returned sorted ascending.
 */
inline std::vector<std::size_t> stable_subset(const StabilityMeasure& measure,
                                              std::size_t m, std::size_t channel) {
    const std::size_t K = measure.scores.rows;
    require(channel < measure.scores.cols, "stable_subset: channel out of range");
    require(m >= 1 && m <= K - 1, "stable_subset: m must be in [1, K-1]");

    std::vector<std::size_t> idx(K - 1);
    std::iota(idx.begin(), idx.end(), std::size_t{1});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        const double sa = measure.scores(a, channel);
        const double sb = measure.scores(b, channel);
        if (sa != sb) return sa > sb;
        return a < b;
    });
    idx.resize(m);
    std::sort(idx.begin(), idx.end());
    return idx;
}

/**
 * Measure file: header line "K C N epsilon", then K rows of C scores, all
 * decimals written at full round-trip precision.
 */
inline void save_measure(const StabilityMeasure& measure, std::ostream& out) {
    out << measure.scores.rows << ' ' << measure.scores.cols << ' '
        << measure.sample_count << ' ' << format_double(measure.epsilon) << '\n';
    for (std::size_t k = 0; k < measure.scores.rows; ++k) {
        for (std::size_t c = 0; c < measure.scores.cols; ++c) {
            if (c) out << ' ';
            out << format_double(measure.scores(k, c));
        }
        out << '\n';
    }
}

inline void save_measure(const StabilityMeasure& measure, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_measure: cannot open '" + path + "' for writing");
    save_measure(measure, out);
    if (!out) throw std::runtime_error("save_measure: write to '" + path + "' failed");
}

inline StabilityMeasure load_measure(std::istream& in, const std::string& name) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(name + ": missing header line");
    const auto header = split_fields(line);
    if (header.size() != 4) throw std::runtime_error(name + ": header must be 'K C N epsilon'");

    StabilityMeasure measure;
    const std::size_t K = parse_size_field(header[0], name + " header K");
    const std::size_t C = parse_size_field(header[1], name + " header C");
    measure.sample_count = parse_size_field(header[2], name + " header N");
    measure.epsilon = parse_double_field(header[3], name + " header epsilon");
    if (K == 0 || C == 0) throw std::runtime_error(name + ": header dimensions must be positive");
    if (measure.sample_count == 0) throw std::runtime_error(name + ": header sample count must be positive");

    measure.scores = Matrix(K, C);
    for (std::size_t k = 0; k < K; ++k) {
        if (!std::getline(in, line)) {
            throw std::runtime_error(name + ": truncated, expected " + std::to_string(K)
                                     + " score rows, found " + std::to_string(k));
        }
        const auto fields = split_fields(line);
        if (fields.size() != C) {
            throw std::runtime_error(name + ": row " + std::to_string(k + 2) + " has "
                                     + std::to_string(fields.size()) + " columns, header says "
                                     + std::to_string(C));
        }
        for (std::size_t c = 0; c < C; ++c) {
            measure.scores(k, c) = parse_double_field(fields[c], name + " row " + std::to_string(k + 2));
        }
    }
    if (!measure.scores.all_finite()) throw std::runtime_error(name + ": non-finite score");
    return measure;
}

inline StabilityMeasure load_measure(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_measure: cannot open '" + path + "'");
    StabilityMeasure measure = load_measure(in, "measure file " + path);
    // trailing garbage after the score block means the header undercounted
    std::string line;
    while (std::getline(in, line)) {
        if (!split_fields(line).empty()) {
            throw std::runtime_error("measure file " + path + ": more rows than the header's K = "
                                     + std::to_string(measure.scores.rows));
        }
    }
    return measure;
}

} // namespace frednormer
