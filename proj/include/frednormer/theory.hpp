#pragma once

#include "frednormer/frednormer.hpp"
#include "frednormer/norm.hpp"

#include <limits>
#include <optional>

namespace frednormer {

/**
 * Numeric check of the uniform-scaling property: z-normalizing a window
 * multiplies every non-DC spectral amplitude by exactly 1/sigma, so
 * |A_z(k)| * sigma must reproduce |A(k)| for all k in [1, K-1].
 */
struct LemmaReport {
    double max_relative_deviation = 0.0;
    std::size_t worst_bin = 0;
    bool dc_excluded = true;
    double threshold = 1e-8;

    bool pass() const { return max_relative_deviation < threshold; }
};

/**
 * Relative deviation uses a floor of 1e-6 times the largest non-DC
 * amplitude in the denominator, so structurally-zero bins compare at the
 * spectrum's own scale instead of dividing rounding noise by zero.
 *
 * Channels whose standard deviation falls below the normalize eps floor
 * are rejected as degenerate: normalize stops dividing by sigma there, so
 * the identity is outside its domain.
 */
inline LemmaReport verify_lemma1(const TimeWindow& window, std::size_t channel,
                                 double eps = 1e-5) {
    validate_window(window, "verify_lemma1");
    require(channel < window.cols, "verify_lemma1: channel out of range");

    const auto [z, stats] = normalize(window, eps);
    const double sigma = stats.stddev[channel];
    if (sigma < eps) {
        throw std::invalid_argument("verify_lemma1: channel " + std::to_string(channel)
                                    + " is constant or near-constant (sigma < eps)");
    }

    const AmplitudeMatrix raw = amplitudes(dft(window));
    const AmplitudeMatrix normed = amplitudes(dft(z));
    const std::size_t K = raw.amplitudes.rows;

    double max_amp = 0.0;
    for (std::size_t k = 1; k < K; ++k) {
        max_amp = std::max(max_amp, raw.amplitudes(k, channel));
    }
    require(max_amp > 0.0, "verify_lemma1: channel has an empty non-DC spectrum");
    const double floor = 1e-6 * max_amp;

    LemmaReport report;
    for (std::size_t k = 1; k < K; ++k) {
        const double a = raw.amplitudes(k, channel);
        const double rescaled = normed.amplitudes(k, channel) * sigma;
        const double deviation = std::abs(rescaled - a) / std::max(a, floor);
        if (deviation > report.max_relative_deviation) {
            report.max_relative_deviation = deviation;
            report.worst_bin = k;
        }
    }
    return report;
}

/**
 * Energy-proportion check: the share of the non-DC amplitude mass held by
 * a bin subset is invariant under z-normalization.
 */
struct ProportionReport {
    double ratio_before = 0.0;
    double ratio_after = 0.0;
    std::vector<std::size_t> subset;
    double threshold = 1e-10;

    bool pass() const { return std::abs(ratio_before - ratio_after) < threshold; }
};

inline ProportionReport verify_theorem1(const TimeWindow& window, std::size_t channel,
                                        std::vector<std::size_t> subset, double eps = 1e-5) {
    validate_window(window, "verify_theorem1");
    require(channel < window.cols, "verify_theorem1: channel out of range");
    const std::size_t K = spectrum_bins(window.rows);
    for (std::size_t k : subset) {
        require(k >= 1 && k < K, "verify_theorem1: subset bins must lie in [1, K-1]");
    }

    const auto [z, stats] = normalize(window, eps);
    if (stats.stddev[channel] < eps) {
        throw std::invalid_argument("verify_theorem1: channel " + std::to_string(channel)
                                    + " is constant or near-constant (sigma < eps)");
    }

    auto ratio = [&](const TimeWindow& w) {
        const AmplitudeMatrix amp = amplitudes(dft(w));
        double total = 0.0;
        for (std::size_t k = 1; k < K; ++k) total += amp.amplitudes(k, channel);
        double inside = 0.0;
        for (std::size_t k : subset) inside += amp.amplitudes(k, channel);
        return total > 0.0 ? inside / total : 0.0;
    };

    ProportionReport report;
    report.ratio_before = ratio(window);
    report.ratio_after = ratio(z);
    report.subset = std::move(subset);
    return report;
}

/**
 * Diagnostic for the idealized weighting target: after training, the
 * effective per-bin weight should be larger on the stable set than on
 * every other non-DC bin. Not an invariant of training, so the result is
 * reported rather than enforced.
 */
struct Problem1Report {
    bool identity_params = false;    // layer still at its no-op initialization
    bool ordering_holds = false;
    double min_stable_weight = 0.0;
    double max_other_weight = 0.0;
    std::vector<std::size_t> subset;
};

inline bool is_identity_params(const FredNormerParams& params) {
    for (double w : params.w_r)
        if (w != 0.0) return false;
    for (double w : params.w_i)
        if (w != 0.0) return false;
    for (double b : params.b_r)
        if (b != 1.0) return false;
    for (double b : params.b_i)
        if (b != 1.0) return false;
    return true;
}

inline Problem1Report verify_problem1(const FredNormerParams& params,
                                      const StabilityMeasure& measure,
                                      std::vector<std::size_t> subset) {
    const std::size_t K = measure.scores.rows;
    const std::size_t C = measure.scores.cols;
    require(params.bins() == K, "verify_problem1: params/measure bin mismatch");
    require(!subset.empty() && subset.size() <= K - 1,
            "verify_problem1: subset size must be in [1, K-1]");
    std::vector<bool> in_subset(K, false);
    for (std::size_t k : subset) {
        require(k >= 1 && k < K, "verify_problem1: subset bins must lie in [1, K-1]");
        in_subset[k] = true;
    }

    Problem1Report report;
    report.subset = std::move(subset);
    report.identity_params = is_identity_params(params);

    const auto [er, ei] = effective_weights(params, measure);
    double min_stable = std::numeric_limits<double>::infinity();
    double max_other = -std::numeric_limits<double>::infinity();
    bool has_other = false;
    for (std::size_t k = 1; k < K; ++k) {
        double mean = 0.0;
        for (std::size_t c = 0; c < C; ++c) mean += 0.5 * (er(k, c) + ei(k, c));
        mean /= static_cast<double>(C);
        if (in_subset[k]) {
            min_stable = std::min(min_stable, mean);
        } else {
            max_other = std::max(max_other, mean);
            has_other = true;
        }
    }
    report.min_stable_weight = min_stable;
    report.max_other_weight = has_other ? max_other : 0.0;
    report.ordering_holds = !report.identity_params && (!has_other || min_stable > max_other);
    return report;
}

} // namespace frednormer
