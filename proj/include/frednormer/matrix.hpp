#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace frednormer {

/**
 * Dense row-major matrix of doubles.
 *
 * Time windows are stored as rows = timestamps, cols = channels, so a
 * lookback window is L x C and a forecast block is H x C.
 */
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

// A lookback or forecast block: rows = timestamps, cols = channels.
using TimeWindow = Matrix;

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

// Windows on the spectral path must be finite and long enough to difference.
inline void validate_window(const TimeWindow& w, const char* caller) {
    require(w.rows >= 2, std::string(caller) + ": window must have at least 2 timestamps");
    require(w.cols >= 1, std::string(caller) + ": window must have at least 1 channel");
    require(w.all_finite(), std::string(caller) + ": window has non-finite entries");
}

} // namespace frednormer
