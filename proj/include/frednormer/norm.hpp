#pragma once

#include "frednormer/matrix.hpp"

#include <algorithm>
#include <utility>

namespace frednormer {

/**
 * Per-window, per-channel z-score statistics. The standard deviation is the
 * population (1/L) one; `stddev` keeps the raw value even when the normalize
 * denominator was floored at eps.
 */
struct InstanceStats {
    std::vector<double> mean;     // length C
    std::vector<double> stddev;   // length C, population standard deviation
    double eps = 1e-5;
};

/**
 * Instance z-score normalization. The divisor is max(stddev, eps), so
 * non-degenerate channels are divided by their exact standard deviation
 * (which is what makes the spectral scaling identity hold to machine
 * precision) and constant channels map to all zeros.
 */
inline std::pair<TimeWindow, InstanceStats> normalize(const TimeWindow& window,
                                                      double eps = 1e-5) {
    validate_window(window, "normalize");
    require(eps > 0.0, "normalize: eps must be positive");
    const std::size_t L = window.rows;
    const std::size_t C = window.cols;

    InstanceStats stats;
    stats.eps = eps;
    stats.mean.assign(C, 0.0);
    stats.stddev.assign(C, 0.0);
    for (std::size_t c = 0; c < C; ++c) {
        double sum = 0.0;
        for (std::size_t l = 0; l < L; ++l) sum += window(l, c);
        const double mean = sum / static_cast<double>(L);
        double sq = 0.0;
        for (std::size_t l = 0; l < L; ++l) {
            const double d = window(l, c) - mean;
            sq += d * d;
        }
        stats.mean[c] = mean;
        stats.stddev[c] = std::sqrt(sq / static_cast<double>(L));
    }

    TimeWindow z(L, C);
    for (std::size_t c = 0; c < C; ++c) {
        const double denom = std::max(stats.stddev[c], eps);
        for (std::size_t l = 0; l < L; ++l) {
            z(l, c) = (window(l, c) - stats.mean[c]) / denom;
        }
    }
    return {std::move(z), std::move(stats)};
}

/// Reverse of normalize: y * stddev + mean per channel.
inline TimeWindow denormalize(const TimeWindow& window, const InstanceStats& stats) {
    require(window.cols == stats.mean.size() && window.cols == stats.stddev.size(),
            "denormalize: channel count mismatch");
    TimeWindow out(window.rows, window.cols);
    for (std::size_t c = 0; c < window.cols; ++c) {
        for (std::size_t l = 0; l < window.rows; ++l) {
            out(l, c) = window(l, c) * stats.stddev[c] + stats.mean[c];
        }
    }
    return out;
}

} // namespace frednormer
