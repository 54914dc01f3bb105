#pragma once

#include "frednormer/config.hpp"

#include <json.hpp>

namespace frednormer {

/// The flat config echo as a JSON object (key order is alphabetical, stable).
inline nlohmann::json config_echo_json(const RunConfig& config) {
    nlohmann::json echo = nlohmann::json::object();
    std::istringstream in(serialize_config(config));
    std::string line;
    while (std::getline(in, line)) {
        const std::size_t eq = line.find('=');
        echo[detail::trim(std::string_view(line).substr(0, eq))] =
            detail::trim(std::string_view(line).substr(eq + 1));
    }
    return echo;
}

/**
 * One JSON document per run. Everything except the "timing" field is a
 * pure function of (config, data, seed), which is what the reproducibility
 * contract compares.
 */
inline nlohmann::json metrics_json(const RunConfig& config, const TrainResult& result,
                                   const Metrics& test, const std::string& started_at,
                                   double wall_seconds) {
    nlohmann::json epochs = nlohmann::json::array();
    for (const EpochMetrics& em : result.epochs) {
        nlohmann::json e;
        e["train_mse"] = em.train_mse;
        if (em.val_mse) e["val_mse"] = *em.val_mse;
        epochs.push_back(std::move(e));
    }
    nlohmann::json doc;
    doc["config"] = config_echo_json(config);
    doc["epochs"] = std::move(epochs);
    doc["best_epoch"] = result.best_epoch;
    doc["test"] = {{"mse", test.mse}, {"mae", test.mae}};
    doc["timing"] = {{"started", started_at}, {"wall_seconds", wall_seconds}};
    return doc;
}

inline void write_json(const nlohmann::json& doc, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_json: cannot open '" + path + "' for writing");
    out << doc.dump(2) << '\n';
    if (!out) throw std::runtime_error("write_json: write to '" + path + "' failed");
}

inline nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_json: cannot open '" + path + "'");
    return nlohmann::json::parse(in);
}

/// Compare two metrics documents with the timing field masked out.
inline bool metrics_equal_modulo_timing(nlohmann::json a, nlohmann::json b) {
    a.erase("timing");
    b.erase("timing");
    return a == b;
}

} // namespace frednormer
