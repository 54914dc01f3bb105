// Command-line front end for the forecasting library: synthetic data
// generation, stability analysis, training, evaluation, numeric
// verification, and the filter ablation sweep.

#include "frednormer/pipeline.hpp"
#include "frednormer/report.hpp"
#include "frednormer/theory.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>

namespace fn = frednormer;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string now_utc_iso() {
    const std::time_t tt = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

struct SynthArgs {
    std::string spec_path;
    std::string out_path;
};

int run_synth(const SynthArgs& args) {
    const fn::RunConfig config = fn::parse_config_file(args.spec_path);
    const auto* synth = std::get_if<fn::SynthSpec>(&config.dataset.source);
    if (synth == nullptr) {
        throw std::runtime_error("synth: config must have data.source = synth");
    }
    fn::save_csv(fn::synthesize(*synth), args.out_path);
    std::cout << "wrote " << synth->length << " x " << synth->channels << " series to "
              << args.out_path << "\n";
    return 0;
}

struct StabilityArgs {
    std::string data_path;
    std::string config_path;
    std::string out_path;
    std::string plot_path;
};

// Per-bin mean/spread/score table, one row per bin, channels side by side.
void write_stability_plot(const fn::MeasureStats& stats, std::size_t sample_count,
                          const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    const std::size_t C = stats.scores.cols;
    out << "bin";
    for (std::size_t c = 0; c < C; ++c) {
        out << ",mu_ch" << c << ",sigma_ch" << c << ",stability_ch" << c;
    }
    out << "\n";
    for (std::size_t k = 0; k < stats.scores.rows; ++k) {
        out << k;
        for (std::size_t c = 0; c < C; ++c) {
            out << ',' << fn::format_double(stats.mu(k, c)) << ','
                << fn::format_double(stats.sigma(k, c)) << ','
                << fn::format_double(stats.scores(k, c));
        }
        out << "\n";
    }
    if (!out) throw std::runtime_error("write to '" + path + "' failed");
    (void)sample_count;
}

int run_stability(const StabilityArgs& args) {
    fn::RunConfig config = fn::parse_config_file(args.config_path);
    if (!args.data_path.empty()) {
        fn::CsvSource csv;
        if (const auto* existing = std::get_if<fn::CsvSource>(&config.dataset.source)) {
            csv = *existing;
        }
        csv.path = args.data_path;
        config.dataset.source = csv;
    }
    const fn::WindowSets sets = fn::make_windows(fn::load_series(config.dataset), config.dataset);

    fn::AmplitudeAccumulator acc;
    for (std::size_t start : sets.train.starts) {
        acc = fn::accumulate(std::move(acc), fn::input_window(sets, start));
    }
    const fn::MeasureStats stats = fn::finalize_stats(acc);
    const fn::StabilityMeasure measure = fn::finalize(acc);
    fn::save_measure(measure, args.out_path);

    const std::string plot_path =
        args.plot_path.empty() ? args.out_path + ".plot.csv" : args.plot_path;
    write_stability_plot(stats, measure.sample_count, plot_path);
    std::cout << "measure over " << measure.sample_count << " windows ("
              << measure.scores.rows << " bins x " << measure.scores.cols
              << " channels) -> " << args.out_path << ", plot -> " << plot_path << "\n";
    return 0;
}

struct TrainArgs {
    std::string config_path;
    std::string out_dir;
};

int run_train(const TrainArgs& args) {
    std::string out_dir = args.out_dir;
    if (out_dir.empty()) {
        if (const char* env = std::getenv("FREDNORMER_RUN_DIR")) out_dir = env;
    }
    if (out_dir.empty()) {
        throw std::runtime_error("train: pass --out or set FREDNORMER_RUN_DIR");
    }
    const fn::RunConfig config = fn::parse_config_file(args.config_path);
    fs::create_directories(out_dir);

    const std::string started = now_utc_iso();
    const auto t0 = std::chrono::steady_clock::now();
    const fn::WindowSets sets = fn::make_windows(fn::load_series(config.dataset), config.dataset);
    const fn::TrainResult result = fn::train(sets, config.train, config.model);
    const fn::Metrics test = fn::evaluate(result.model, sets, sets.test);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    write_text(out_dir + "/config.txt", fn::serialize_config(config));
    fn::save_model(result.model, out_dir + "/model.ckpt");
    fn::save_measure(result.model.measure, out_dir + "/measure.txt");
    fn::write_json(fn::metrics_json(config, result, test, started, wall),
                   out_dir + "/metrics.json");

    std::cout << "best epoch " << result.best_epoch + 1 << "/" << result.epochs.size()
              << ", test mse " << test.mse << ", mae " << test.mae << " -> " << out_dir << "\n";
    return 0;
}

struct EvalArgs {
    std::string checkpoint_path;
    std::string config_path;
    std::string data_path;
    std::string split = "test";
};

int run_eval(const EvalArgs& args) {
    const fn::ForecastModel model = fn::load_model(args.checkpoint_path);

    fn::RunConfig config;
    if (!args.config_path.empty()) {
        config = fn::parse_config_file(args.config_path);
    } else {
        if (args.data_path.empty()) {
            throw std::runtime_error("eval: pass --config and/or --data");
        }
        config.dataset.source = fn::CsvSource{args.data_path, true};
    }
    if (!args.data_path.empty() && !args.config_path.empty()) {
        fn::CsvSource csv;
        if (const auto* existing = std::get_if<fn::CsvSource>(&config.dataset.source)) {
            csv = *existing;
        }
        csv.path = args.data_path;
        config.dataset.source = csv;
    }
    config.dataset.lookback = model.lookback;
    config.dataset.horizon = model.horizon;

    const fn::WindowSets sets = fn::make_windows(fn::load_series(config.dataset), config.dataset);
    const fn::WindowSplit* split = &sets.test;
    if (args.split == "train") split = &sets.train;
    else if (args.split == "val") split = &sets.val;
    else if (args.split != "test") throw std::runtime_error("eval: split must be train, val or test");

    const fn::Metrics metrics = fn::evaluate(model, sets, *split);
    json doc;
    doc["split"] = args.split;
    doc["mse"] = metrics.mse;
    doc["mae"] = metrics.mae;
    doc["windows"] = split->count();
    std::cout << doc.dump(2) << "\n";
    return 0;
}

struct VerifyArgs {
    std::string data_path;
    std::string config_path;
    std::string checkpoint_path;
    std::size_t lookback = 0;
    std::size_t max_windows = 50;
    std::size_t stable_count = 8;
    unsigned long long seed = 0;
};

int run_verify(const VerifyArgs& args) {
    fn::Matrix series;
    std::size_t lookback = args.lookback;
    if (!args.config_path.empty()) {
        fn::RunConfig config = fn::parse_config_file(args.config_path);
        if (!args.data_path.empty()) {
            fn::CsvSource csv;
            if (const auto* existing = std::get_if<fn::CsvSource>(&config.dataset.source)) {
                csv = *existing;
            }
            csv.path = args.data_path;
            config.dataset.source = csv;
        }
        series = fn::load_series(config.dataset);
        if (lookback == 0) lookback = config.dataset.lookback;
    } else {
        if (args.data_path.empty()) throw std::runtime_error("verify: pass --data and/or --config");
        series = fn::load_csv(args.data_path, true);
        if (lookback == 0) lookback = 96;
    }
    if (series.rows < lookback) {
        throw std::runtime_error("verify: series shorter than the lookback window");
    }

    // evenly spaced windows across the whole series
    const std::size_t span = series.rows - lookback;
    const std::size_t count = std::min(args.max_windows, span + 1);
    std::vector<std::size_t> starts;
    for (std::size_t i = 0; i < count; ++i) {
        starts.push_back(count == 1 ? 0 : span * i / (count - 1));
    }

    std::mt19937_64 rng(args.seed);
    const std::size_t K = fn::spectrum_bins(lookback);
    std::size_t lemma_pass = 0, lemma_fail = 0, lemma_skip = 0;
    std::size_t theorem_pass = 0, theorem_fail = 0;
    double worst_lemma = 0.0, worst_theorem = 0.0;

    for (std::size_t start : starts) {
        fn::TimeWindow window(lookback, series.cols);
        for (std::size_t l = 0; l < lookback; ++l) {
            for (std::size_t c = 0; c < series.cols; ++c) window(l, c) = series(start + l, c);
        }
        for (std::size_t c = 0; c < series.cols; ++c) {
            json line;
            line["window_start"] = start;
            line["channel"] = c;
            try {
                const fn::LemmaReport lemma = fn::verify_lemma1(window, c);
                line["check"] = "lemma1";
                line["max_relative_deviation"] = lemma.max_relative_deviation;
                line["worst_bin"] = lemma.worst_bin;
                line["pass"] = lemma.pass();
                lemma.pass() ? ++lemma_pass : ++lemma_fail;
                worst_lemma = std::max(worst_lemma, lemma.max_relative_deviation);
                std::cout << line.dump() << "\n";
            } catch (const std::invalid_argument& err) {
                line["check"] = "lemma1";
                line["skipped"] = err.what();
                ++lemma_skip;
                std::cout << line.dump() << "\n";
                continue;
            }

            std::vector<std::size_t> subset;
            for (std::size_t k = 1; k < K; ++k) {
                if (std::uniform_int_distribution<int>(0, 1)(rng) == 1) subset.push_back(k);
            }
            const fn::ProportionReport prop = fn::verify_theorem1(window, c, subset);
            json tline;
            tline["check"] = "theorem1";
            tline["window_start"] = start;
            tline["channel"] = c;
            tline["subset_size"] = prop.subset.size();
            tline["ratio_before"] = prop.ratio_before;
            tline["ratio_after"] = prop.ratio_after;
            tline["pass"] = prop.pass();
            prop.pass() ? ++theorem_pass : ++theorem_fail;
            worst_theorem = std::max(worst_theorem, std::abs(prop.ratio_before - prop.ratio_after));
            std::cout << tline.dump() << "\n";
        }
    }

    if (!args.checkpoint_path.empty()) {
        const fn::ForecastModel model = fn::load_model(args.checkpoint_path);
        const std::size_t max_m = fn::spectrum_bins(model.lookback) - 1;
        const auto subset =
            fn::stable_subset(model.measure, std::min(args.stable_count, max_m), 0);
        const fn::Problem1Report report =
            fn::verify_problem1(model.params, model.measure, subset);
        json pline;
        pline["check"] = "problem1";
        pline["identity_params"] = report.identity_params;
        pline["ordering_holds"] = report.ordering_holds;
        pline["min_stable_weight"] = report.min_stable_weight;
        pline["max_other_weight"] = report.max_other_weight;
        pline["note"] = report.identity_params ? "identity weighting, ordering undefined"
                                               : "diagnostic only";
        std::cout << pline.dump() << "\n";
    }

    json summary;
    summary["check"] = "summary";
    summary["lemma1"] = {{"pass", lemma_pass}, {"fail", lemma_fail}, {"skipped", lemma_skip},
                         {"max_relative_deviation", worst_lemma}};
    summary["theorem1"] = {{"pass", theorem_pass}, {"fail", theorem_fail},
                           {"max_ratio_gap", worst_theorem}};
    std::cout << summary.dump() << "\n";
    return (lemma_fail == 0 && theorem_fail == 0) ? 0 : 1;
}

struct AblateArgs {
    std::string config_path;
    std::string out_dir;
};

int run_ablate(const AblateArgs& args) {
    const fn::RunConfig base = fn::parse_config_file(args.config_path);
    const fn::WindowSets sets = fn::make_windows(fn::load_series(base.dataset), base.dataset);

    struct Arm {
        const char* name;
        fn::FilterType type;
    };
    const Arm arms[] = {{"stability", fn::FilterType::StabilityWeighting},
                        {"lowpass", fn::FilterType::LowPass},
                        {"random", fn::FilterType::RandomSelect}};

    json rows = json::array();
    std::ostringstream table;
    table << "filter      test_mse      test_mae\n";
    for (const Arm& arm : arms) {
        fn::RunConfig config = base;
        config.model.filter_type = arm.type;
        const fn::TrainResult result = fn::train(sets, config.train, config.model);
        const fn::Metrics test = fn::evaluate(result.model, sets, sets.test);
        json row;
        row["filter"] = arm.name;
        row["test_mse"] = test.mse;
        row["test_mae"] = test.mae;
        row["best_epoch"] = result.best_epoch;
        rows.push_back(std::move(row));
        char buf[80];
        std::snprintf(buf, sizeof buf, "%-10s %12.6f %12.6f\n", arm.name, test.mse, test.mae);
        table << buf;
    }

    std::cout << table.str();
    if (!args.out_dir.empty()) {
        fs::create_directories(args.out_dir);
        write_text(args.out_dir + "/ablation.txt", table.str());
        json doc;
        doc["config"] = fn::config_echo_json(base);
        doc["arms"] = std::move(rows);
        fn::write_json(doc, args.out_dir + "/ablation.json");
        std::cout << "wrote " << args.out_dir << "/ablation.{txt,json}\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Frequency-stability weighted forecasting toolkit"};
    app.require_subcommand(1);

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic series CSV");
    synth->add_option("--spec,--config", synth_args.spec_path, "Config with synth.* keys")
        ->required()->check(CLI::ExistingFile);
    synth->add_option("--out", synth_args.out_path, "Output CSV path")->required();

    StabilityArgs stability_args;
    auto* stability = app.add_subcommand("stability", "Compute the frequency stability measure");
    stability->add_option("--config", stability_args.config_path, "Run config")
        ->required()->check(CLI::ExistingFile);
    stability->add_option("--data", stability_args.data_path, "CSV series (overrides config source)")
        ->check(CLI::ExistingFile);
    stability->add_option("--out", stability_args.out_path, "Measure file path")->required();
    stability->add_option("--plot", stability_args.plot_path,
                          "Per-bin mu/sigma/score CSV (default: <out>.plot.csv)");

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "Train a model and write a run directory");
    train->add_option("--config", train_args.config_path, "Run config")
        ->required()->check(CLI::ExistingFile);
    train->add_option("--out", train_args.out_dir,
                      "Run directory (default: $FREDNORMER_RUN_DIR)");

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint, print MSE/MAE JSON");
    eval->add_option("--checkpoint", eval_args.checkpoint_path, "Model checkpoint")
        ->required()->check(CLI::ExistingFile);
    eval->add_option("--config", eval_args.config_path, "Run config (dataset definition)")
        ->check(CLI::ExistingFile);
    eval->add_option("--data", eval_args.data_path, "CSV series (overrides config source)")
        ->check(CLI::ExistingFile);
    eval->add_option("--split", eval_args.split, "train|val|test (default test)");

    VerifyArgs verify_args;
    auto* verify = app.add_subcommand("verify", "Run the spectral identity checks, JSON lines out");
    verify->add_option("--data", verify_args.data_path, "CSV series")->check(CLI::ExistingFile);
    verify->add_option("--config", verify_args.config_path, "Run config")->check(CLI::ExistingFile);
    verify->add_option("--checkpoint", verify_args.checkpoint_path,
                       "Optional checkpoint for the weighting-order diagnostic")
        ->check(CLI::ExistingFile);
    verify->add_option("--lookback", verify_args.lookback, "Window length (default from config/96)");
    verify->add_option("--windows", verify_args.max_windows, "Max windows to check (default 50)");
    verify->add_option("--stable-count", verify_args.stable_count,
                       "Stable-set size for the diagnostic (default 8)");
    verify->add_option("--seed", verify_args.seed, "Subset draw seed");

    AblateArgs ablate_args;
    auto* ablate = app.add_subcommand("ablate", "Train the three filters on one dataset");
    ablate->add_option("--config", ablate_args.config_path, "Run config")
        ->required()->check(CLI::ExistingFile);
    ablate->add_option("--out", ablate_args.out_dir, "Directory for ablation.{txt,json}");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (synth->parsed()) return run_synth(synth_args);
        if (stability->parsed()) return run_stability(stability_args);
        if (train->parsed()) return run_train(train_args);
        if (eval->parsed()) return run_eval(eval_args);
        if (verify->parsed()) return run_verify(verify_args);
        if (ablate->parsed()) return run_ablate(ablate_args);
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
    return 0;
}
