#pragma once

#include "frednormer/matrix.hpp"

#include <span>
#include <vector>

namespace frednormer {

inline double global_norm(std::span<const double> grads) {
    double sum = 0.0;
    for (double g : grads) sum += g * g;
    return std::sqrt(sum);
}

// Scales grads in place so their global norm is at most max_norm.
// Returns the factor applied (1.0 when no clipping happened).
inline double clip_by_global_norm(std::span<double> grads, double max_norm) {
    require(max_norm > 0.0, "clip_by_global_norm: max_norm must be positive");
    const double norm = global_norm(grads);
    if (norm <= max_norm || norm == 0.0) return 1.0;
    const double scale = max_norm / norm;
    for (double& g : grads) g *= scale;
    return scale;
}

struct Sgd {
    double lr = 1e-3;

    void step(std::span<double> params, std::span<const double> grads) {
        require(params.size() == grads.size(), "sgd step: size mismatch");
        for (std::size_t i = 0; i < params.size(); ++i) {
            params[i] -= lr * grads[i];
        }
    }
};

struct Adam {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    std::vector<double> m;   // first-moment estimates
    std::vector<double> v;   // second-moment estimates
    unsigned long long t = 0;

    void step(std::span<double> params, std::span<const double> grads) {
        require(params.size() == grads.size(), "adam step: size mismatch");
        if (m.empty()) {
            m.assign(params.size(), 0.0);
            v.assign(params.size(), 0.0);
        }
        require(m.size() == params.size(), "adam step: parameter count changed mid-run");
        ++t;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i] * grads[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
};

} // namespace frednormer
