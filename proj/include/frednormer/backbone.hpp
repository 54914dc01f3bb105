#pragma once

#include "frednormer/matrix.hpp"
#include "frednormer/textio.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <utility>

namespace frednormer {

enum class Decomposition { None, MovingAverage };

/**
 * DLinear-style linear forecaster. One H x L map is shared by every
 * channel. With MovingAverage decomposition the input is split into a
 * centered moving-average trend (edge-replicated padding) and a residual,
 * each gets its own map, and the two forecasts are summed.
 */
struct LinearBackbone {
    std::size_t lookback = 0;
    std::size_t horizon = 0;
    Decomposition decomposition = Decomposition::None;
    std::size_t kernel = 0;       // odd, set when decomposition == MovingAverage

    Matrix weight;                // H x L, acts on the residual (or the raw input)
    Matrix trend_weight;          // H x L when decomposed, else empty
    std::vector<double> bias;     // length H

    bool decomposed() const { return decomposition == Decomposition::MovingAverage; }

    bool all_finite() const {
        if (!weight.all_finite() || !trend_weight.all_finite()) return false;
        for (double v : bias)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline void validate_backbone(const LinearBackbone& model, const char* caller) {
    require(model.lookback >= 1 && model.horizon >= 1,
            std::string(caller) + ": lookback and horizon must be positive");
    require(model.weight.rows == model.horizon && model.weight.cols == model.lookback,
            std::string(caller) + ": weight must be H x L");
    require(model.bias.size() == model.horizon, std::string(caller) + ": bias must have length H");
    if (model.decomposed()) {
        require(model.kernel % 2 == 1 && model.kernel >= 1 && model.kernel <= model.lookback,
                std::string(caller) + ": kernel must be odd and at most L");
        require(model.trend_weight.rows == model.horizon
                    && model.trend_weight.cols == model.lookback,
                std::string(caller) + ": trend weight must be H x L");
    }
    require(model.all_finite(), std::string(caller) + ": non-finite parameters");
}

/// Centered moving average over time, edges padded by replicating the end values.
inline TimeWindow moving_average(const TimeWindow& window, std::size_t kernel) {
    require(kernel % 2 == 1 && kernel >= 1, "moving_average: kernel must be odd and positive");
    require(window.rows >= 1 && kernel <= window.rows,
            "moving_average: kernel exceeds window length");
    const std::size_t L = window.rows;
    const std::size_t C = window.cols;
    const long half = static_cast<long>(kernel / 2);
    const double inv = 1.0 / static_cast<double>(kernel);

    TimeWindow out(L, C);
    for (long l = 0; l < static_cast<long>(L); ++l) {
        for (long i = l - half; i <= l + half; ++i) {
            const long j = std::clamp(i, 0L, static_cast<long>(L) - 1);
            for (std::size_t c = 0; c < C; ++c) {
                out(static_cast<std::size_t>(l), c) += window(static_cast<std::size_t>(j), c) * inv;
            }
        }
    }
    return out;
}

inline LinearBackbone make_backbone(std::size_t lookback, std::size_t horizon,
                                    Decomposition decomposition, std::size_t kernel,
                                    unsigned long long seed) {
    require(lookback >= 1 && horizon >= 1, "make_backbone: lookback and horizon must be positive");
    LinearBackbone model;
    model.lookback = lookback;
    model.horizon = horizon;
    model.decomposition = decomposition;
    model.kernel = decomposition == Decomposition::MovingAverage ? kernel : 0;
    model.bias.assign(horizon, 0.0);

    std::mt19937_64 rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(lookback));
    std::uniform_real_distribution<double> dist(-bound, bound);
    auto fill = [&](Matrix& m) {
        m = Matrix(horizon, lookback);
        for (double& v : m.data) v = dist(rng);
    };
    fill(model.weight);
    if (model.decomposed()) fill(model.trend_weight);
    validate_backbone(model, "make_backbone");
    return model;
}

/// Per-channel forecast: y = weight . x + bias, plus the trend branch when decomposed.
inline TimeWindow predict(const LinearBackbone& model, const TimeWindow& window) {
    validate_backbone(model, "predict");
    require(window.rows == model.lookback, "predict: window length does not match the model");
    require(window.cols >= 1, "predict: window must have at least 1 channel");
    require(window.all_finite(), "predict: window has non-finite entries");
    const std::size_t L = model.lookback;
    const std::size_t H = model.horizon;
    const std::size_t C = window.cols;

    TimeWindow trend;
    const TimeWindow* residual = &window;
    TimeWindow residual_store;
    if (model.decomposed()) {
        trend = moving_average(window, model.kernel);
        residual_store = TimeWindow(L, C);
        for (std::size_t i = 0; i < window.size(); ++i) {
            residual_store.data[i] = window.data[i] - trend.data[i];
        }
        residual = &residual_store;
    }

    TimeWindow out(H, C);
    for (std::size_t h = 0; h < H; ++h) {
        double* row = &out.data[h * C];
        for (std::size_t c = 0; c < C; ++c) row[c] = model.bias[h];
        const double* wr = &model.weight.data[h * L];
        for (std::size_t l = 0; l < L; ++l) {
            const double w = wr[l];
            const double* xr = &residual->data[l * C];
            for (std::size_t c = 0; c < C; ++c) row[c] += w * xr[c];
        }
        if (model.decomposed()) {
            const double* tw = &model.trend_weight.data[h * L];
            for (std::size_t l = 0; l < L; ++l) {
                const double w = tw[l];
                const double* tr = &trend.data[l * C];
                for (std::size_t c = 0; c < C; ++c) row[c] += w * tr[c];
            }
        }
    }
    return out;
}

struct BackboneGrads {
    Matrix weight;            // H x L
    Matrix trend_weight;      // H x L when decomposed, else empty
    std::vector<double> bias; // length H
};

/// Adjoint of moving_average: scatter each averaged value back to its clamped sources.
inline TimeWindow moving_average_adjoint(const TimeWindow& grad, std::size_t kernel) {
    const std::size_t L = grad.rows;
    const std::size_t C = grad.cols;
    const long half = static_cast<long>(kernel / 2);
    const double inv = 1.0 / static_cast<double>(kernel);

    TimeWindow out(L, C);
    for (long l = 0; l < static_cast<long>(L); ++l) {
        for (long i = l - half; i <= l + half; ++i) {
            const long j = std::clamp(i, 0L, static_cast<long>(L) - 1);
            for (std::size_t c = 0; c < C; ++c) {
                out(static_cast<std::size_t>(j), c) += grad(static_cast<std::size_t>(l), c) * inv;
            }
        }
    }
    return out;
}

/// Exact gradients of predict with respect to the parameters and the input.
inline std::pair<BackboneGrads, TimeWindow> backbone_backward(const LinearBackbone& model,
                                                              const TimeWindow& window,
                                                              const TimeWindow& grad_out) {
    validate_backbone(model, "backbone_backward");
    require(window.rows == model.lookback, "backbone_backward: window length mismatch");
    require(grad_out.rows == model.horizon && grad_out.cols == window.cols,
            "backbone_backward: gradient must be H x C");
    require(window.all_finite() && grad_out.all_finite(),
            "backbone_backward: non-finite inputs");
    const std::size_t L = model.lookback;
    const std::size_t H = model.horizon;
    const std::size_t C = window.cols;

    TimeWindow trend;
    const TimeWindow* residual = &window;
    TimeWindow residual_store;
    if (model.decomposed()) {
        trend = moving_average(window, model.kernel);
        residual_store = TimeWindow(L, C);
        for (std::size_t i = 0; i < window.size(); ++i) {
            residual_store.data[i] = window.data[i] - trend.data[i];
        }
        residual = &residual_store;
    }

    BackboneGrads grads;
    grads.weight = Matrix(H, L);
    grads.bias.assign(H, 0.0);
    if (model.decomposed()) grads.trend_weight = Matrix(H, L);

    TimeWindow g_residual(L, C);   // gradient reaching the residual branch
    TimeWindow g_trend;            // gradient reaching the trend branch
    if (model.decomposed()) g_trend = TimeWindow(L, C);

    for (std::size_t h = 0; h < H; ++h) {
        const double* g = &grad_out.data[h * C];
        for (std::size_t c = 0; c < C; ++c) grads.bias[h] += g[c];
        double* gw = &grads.weight.data[h * L];
        const double* wr = &model.weight.data[h * L];
        for (std::size_t l = 0; l < L; ++l) {
            const double* xr = &residual->data[l * C];
            double* gr = &g_residual.data[l * C];
            double acc = 0.0;
            for (std::size_t c = 0; c < C; ++c) {
                acc += g[c] * xr[c];
                gr[c] += wr[l] * g[c];
            }
            gw[l] += acc;
        }
        if (model.decomposed()) {
            double* gtw = &grads.trend_weight.data[h * L];
            const double* tw = &model.trend_weight.data[h * L];
            for (std::size_t l = 0; l < L; ++l) {
                const double* tr = &trend.data[l * C];
                double* gt = &g_trend.data[l * C];
                double acc = 0.0;
                for (std::size_t c = 0; c < C; ++c) {
                    acc += g[c] * tr[c];
                    gt[c] += tw[l] * g[c];
                }
                gtw[l] += acc;
            }
        }
    }

    // x feeds the residual directly and both branches through the moving
    // average: residual = x - MA(x), trend = MA(x).
    TimeWindow grad_input = g_residual;
    if (model.decomposed()) {
        TimeWindow through_ma(L, C);
        for (std::size_t i = 0; i < through_ma.size(); ++i) {
            through_ma.data[i] = g_trend.data[i] - g_residual.data[i];
        }
        const TimeWindow scattered = moving_average_adjoint(through_ma, model.kernel);
        for (std::size_t i = 0; i < grad_input.size(); ++i) {
            grad_input.data[i] += scattered.data[i];
        }
    }
    return {std::move(grads), std::move(grad_input)};
}

/**
 * Checkpoint block: header "L H decomposition kernel", then bias, then the
 * weight rows, then (when decomposed) the trend weight rows.
 */
inline void save_backbone(const LinearBackbone& model, std::ostream& out) {
    out << model.lookback << ' ' << model.horizon << ' '
        << (model.decomposed() ? "ma" : "none") << ' ' << model.kernel << '\n';
    auto write_row = [&out](const double* row, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            if (i) out << ' ';
            out << format_double(row[i]);
        }
        out << '\n';
    };
    write_row(model.bias.data(), model.bias.size());
    for (std::size_t h = 0; h < model.horizon; ++h) {
        write_row(&model.weight.data[h * model.lookback], model.lookback);
    }
    if (model.decomposed()) {
        for (std::size_t h = 0; h < model.horizon; ++h) {
            write_row(&model.trend_weight.data[h * model.lookback], model.lookback);
        }
    }
}

inline LinearBackbone load_backbone(std::istream& in, const std::string& name) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(name + ": missing backbone header");
    const auto header = split_fields(line);
    if (header.size() != 4) {
        throw std::runtime_error(name + ": backbone header must be 'L H decomposition kernel'");
    }
    LinearBackbone model;
    model.lookback = parse_size_field(header[0], name + " backbone L");
    model.horizon = parse_size_field(header[1], name + " backbone H");
    if (header[2] == "ma") {
        model.decomposition = Decomposition::MovingAverage;
    } else if (header[2] == "none") {
        model.decomposition = Decomposition::None;
    } else {
        throw std::runtime_error(name + ": unknown decomposition '" + std::string(header[2]) + "'");
    }
    model.kernel = parse_size_field(header[3], name + " backbone kernel");

    auto read_row = [&](double* row, std::size_t n, const std::string& what) {
        if (!std::getline(in, line)) throw std::runtime_error(name + ": truncated before " + what);
        const auto fields = split_fields(line);
        if (fields.size() != n) {
            throw std::runtime_error(name + ": " + what + " has " + std::to_string(fields.size())
                                     + " entries, expected " + std::to_string(n));
        }
        for (std::size_t i = 0; i < n; ++i) {
            row[i] = parse_double_field(fields[i], name + " " + what);
        }
    };
    model.bias.resize(model.horizon);
    read_row(model.bias.data(), model.horizon, "backbone bias");
    model.weight = Matrix(model.horizon, model.lookback);
    for (std::size_t h = 0; h < model.horizon; ++h) {
        read_row(&model.weight.data[h * model.lookback], model.lookback,
                 "backbone weight row " + std::to_string(h));
    }
    if (model.decomposed()) {
        model.trend_weight = Matrix(model.horizon, model.lookback);
        for (std::size_t h = 0; h < model.horizon; ++h) {
            read_row(&model.trend_weight.data[h * model.lookback], model.lookback,
                     "backbone trend weight row " + std::to_string(h));
        }
    }
    validate_backbone(model, ("load " + name).c_str());
    return model;
}

} // namespace frednormer
