#pragma once

#include "frednormer/dataset.hpp"
#include "frednormer/model.hpp"
#include "frednormer/optim.hpp"

#include <limits>
#include <optional>
#include <tuple>

namespace frednormer {

enum class OptimizerType { Sgd, Adam };

struct TrainConfig {
    std::size_t epochs = 10;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    OptimizerType optimizer = OptimizerType::Adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    unsigned long long seed = 0;
    double grad_clip = 0.0;        // global-norm cap; 0 disables clipping
    bool train_weighting = true;   // false freezes the weighting layer at its init
};

inline void validate_train_config(const TrainConfig& config) {
    require(config.epochs >= 1, "train config: epochs must be positive");
    require(config.batch_size >= 1, "train config: batch size must be positive");
    require(config.learning_rate >= 0.0 && std::isfinite(config.learning_rate),
            "train config: learning rate must be finite and non-negative");
    require(config.beta1 >= 0.0 && config.beta1 < 1.0 && config.beta2 >= 0.0 && config.beta2 < 1.0,
            "train config: betas must lie in [0, 1)");
    require(config.adam_eps > 0.0, "train config: adam eps must be positive");
    require(config.grad_clip >= 0.0, "train config: gradient clip must be non-negative");
}

/// Frequency stability measure over the raw training input windows.
inline StabilityMeasure measure_from_training_split(const WindowSets& sets, double epsilon = 1e-5) {
    require(!sets.train.empty(), "stability measure: training split has no windows");
    AmplitudeAccumulator acc;
    for (std::size_t start : sets.train.starts) {
        acc = accumulate(std::move(acc), input_window(sets, start));
    }
    return finalize(acc, epsilon);
}

struct Metrics {
    double mse = 0.0;
    double mae = 0.0;
};

/// Mean squared / absolute error of denormalized forecasts over one split.
inline Metrics evaluate(const ForecastModel& model, const WindowSets& sets,
                        const WindowSplit& split) {
    require(!split.empty(), "evaluate: empty window set");
    const std::size_t H = sets.horizon;
    const std::size_t C = sets.series.cols;
    double se = 0.0;
    double ae = 0.0;
    for (std::size_t start : split.starts) {
        const TimeWindow forecast = model_predict(model, input_window(sets, start));
        const TimeWindow target = target_window(sets, start);
        for (std::size_t i = 0; i < forecast.size(); ++i) {
            const double d = forecast.data[i] - target.data[i];
            se += d * d;
            ae += std::abs(d);
        }
    }
    const double n = static_cast<double>(split.count() * H * C);
    return {se / n, ae / n};
}

struct EpochMetrics {
    double train_mse = 0.0;
    std::optional<double> val_mse;   // absent when the validation split is empty
};

struct TrainResult {
    ForecastModel model;             // best-validation parameters
    std::vector<EpochMetrics> epochs;
    std::size_t best_epoch = 0;      // 0-based index into epochs
};

namespace detail {

// Mutable views over every trainable vector, in a fixed order. The
// weighting layer only trains when it is the active filter and not frozen.
inline std::vector<std::span<double>> trainable_views(ForecastModel& model, bool train_weighting) {
    std::vector<std::span<double>> views;
    if (train_weighting && model.filter.type == FilterType::StabilityWeighting) {
        views.emplace_back(model.params.w_r);
        views.emplace_back(model.params.b_r);
        views.emplace_back(model.params.w_i);
        views.emplace_back(model.params.b_i);
    }
    views.emplace_back(model.backbone.weight.data);
    if (model.backbone.decomposed()) views.emplace_back(model.backbone.trend_weight.data);
    views.emplace_back(model.backbone.bias);
    return views;
}

inline std::size_t total_size(const std::vector<std::span<double>>& views) {
    std::size_t n = 0;
    for (const auto& v : views) n += v.size();
    return n;
}

inline void gather(const std::vector<std::span<double>>& views, std::vector<double>& flat) {
    flat.resize(total_size(views));
    std::size_t at = 0;
    for (const auto& v : views) {
        std::copy(v.begin(), v.end(), flat.begin() + static_cast<std::ptrdiff_t>(at));
        at += v.size();
    }
}

inline void scatter(const std::vector<double>& flat, std::vector<std::span<double>>& views) {
    std::size_t at = 0;
    for (auto& v : views) {
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(at), v.size(), v.begin());
        at += v.size();
    }
}

} // namespace detail

/**
 * End-to-end training of normalize -> weighting -> backbone -> denormalize
 * against MSE on the raw targets. The stability measure is computed on the
 * training split before any parameter update. Deterministic under a fixed
 * seed; returns the parameters of the best validation epoch (ties go to the
 * earlier epoch; with no validation split, the training loss decides).
 */
inline TrainResult train(const WindowSets& sets, const TrainConfig& train_config,
                         const ModelConfig& model_config) {
    validate_train_config(train_config);
    require(!sets.train.empty(), "train: training split has no windows");

    StabilityMeasure measure = measure_from_training_split(sets);
    ForecastModel model = build_model(model_config, sets.lookback, sets.horizon,
                                      std::move(measure), train_config.seed);

    auto views = detail::trainable_views(model, train_config.train_weighting);
    const std::size_t n_params = detail::total_size(views);
    const bool weighting_trains =
        train_config.train_weighting && model.filter.type == FilterType::StabilityWeighting;

    Sgd sgd{train_config.learning_rate};
    Adam adam{train_config.learning_rate, train_config.beta1, train_config.beta2,
              train_config.adam_eps, {}, {}, 0};

    const std::size_t H = sets.horizon;
    const std::size_t C = sets.series.cols;
    std::vector<std::size_t> order = sets.train.starts;
    std::mt19937_64 shuffle_rng(train_config.seed);

    std::vector<double> flat_params;
    std::vector<double> flat_grads(n_params, 0.0);

    TrainResult result;
    result.model = model;
    double best_score = std::numeric_limits<double>::infinity();

    for (std::size_t epoch = 0; epoch < train_config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double epoch_se = 0.0;

        for (std::size_t batch_begin = 0, batch_index = 0; batch_begin < order.size();
             batch_begin += train_config.batch_size, ++batch_index) {
            const std::size_t batch_end =
                std::min(batch_begin + train_config.batch_size, order.size());
            const std::size_t batch = batch_end - batch_begin;
            std::fill(flat_grads.begin(), flat_grads.end(), 0.0);

            double batch_se = 0.0;
            for (std::size_t i = batch_begin; i < batch_end; ++i) {
                const std::size_t start = order[i];
                const TimeWindow x = input_window(sets, start);
                const TimeWindow y = target_window(sets, start);

                const auto [z, stats] = normalize(x, model.norm_eps);
                TimeWindow weighted;
                ForwardTape tape;
                if (model.filter.type == FilterType::StabilityWeighting) {
                    std::tie(weighted, tape) = forward(model.params, model.measure, z);
                } else {
                    weighted = apply_filter(model.filter, model.measure, model.params, z);
                }
                const TimeWindow forecast_z = predict(model.backbone, weighted);
                const TimeWindow forecast = denormalize(forecast_z, stats);

                // d(mean squared error)/d(forecast), batch-mean folded in
                const double scale = 2.0 / static_cast<double>(H * C * batch);
                TimeWindow grad_forecast_z(H, C);
                for (std::size_t h = 0; h < H; ++h) {
                    for (std::size_t c = 0; c < C; ++c) {
                        const double d = forecast(h, c) - y(h, c);
                        batch_se += d * d;
                        grad_forecast_z(h, c) = scale * d * stats.stddev[c];
                    }
                }
                if (!std::isfinite(batch_se)) {
                    throw std::runtime_error("train: non-finite loss at epoch "
                                             + std::to_string(epoch + 1) + ", batch "
                                             + std::to_string(batch_index + 1));
                }

                auto [backbone_grads, grad_weighted] =
                    backbone_backward(model.backbone, weighted, grad_forecast_z);

                std::size_t at = 0;
                auto add_block = [&](const std::vector<double>& block) {
                    for (double g : block) flat_grads[at++] += g;
                };
                if (weighting_trains) {
                    const auto [param_grads, grad_input] = backward(tape, grad_weighted);
                    (void)grad_input;
                    add_block(param_grads.w_r);
                    add_block(param_grads.b_r);
                    add_block(param_grads.w_i);
                    add_block(param_grads.b_i);
                }
                add_block(backbone_grads.weight.data);
                if (model.backbone.decomposed()) add_block(backbone_grads.trend_weight.data);
                add_block(backbone_grads.bias);
            }

            epoch_se += batch_se;

            if (train_config.grad_clip > 0.0) {
                clip_by_global_norm(flat_grads, train_config.grad_clip);
            }
            detail::gather(views, flat_params);
            if (train_config.optimizer == OptimizerType::Adam) {
                adam.step(flat_params, flat_grads);
            } else {
                sgd.step(flat_params, flat_grads);
            }
            detail::scatter(flat_params, views);
        }

        EpochMetrics em;
        em.train_mse = epoch_se / static_cast<double>(order.size() * H * C);
        if (!sets.val.empty()) {
            em.val_mse = evaluate(model, sets, sets.val).mse;
        }
        result.epochs.push_back(em);

        const double score = em.val_mse.value_or(em.train_mse);
        if (score < best_score) {
            best_score = score;
            result.best_epoch = epoch;
            result.model = model;
        }
    }
    return result;
}

} // namespace frednormer
