#include "frednormer/stability.hpp"

#include "test_util.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <numbers>
#include <sstream>

using namespace frednormer;
using testutil::random_window;
using testutil::rel_err;

namespace {

// Two-pass batch oracle: hold all windows, compute amplitude moments
// directly, then apply the score formula.
Matrix batch_scores(const std::vector<TimeWindow>& windows, double eps = 1e-5) {
    const std::size_t K = spectrum_bins(windows.front().rows);
    const std::size_t C = windows.front().cols;
    const double n = static_cast<double>(windows.size());
    Matrix mu(K, C);
    Matrix m2(K, C);
    for (const TimeWindow& w : windows) {
        const AmplitudeMatrix amp = amplitudes(dft(w));
        for (std::size_t i = 0; i < amp.amplitudes.size(); ++i) {
            mu.data[i] += amp.amplitudes.data[i] / n;
            m2.data[i] += amp.amplitudes.data[i] * amp.amplitudes.data[i] / n;
        }
    }
    Matrix scores(K, C);
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const double var = std::max(m2.data[i] - mu.data[i] * mu.data[i], 0.0);
        scores.data[i] = mu.data[i] / (std::sqrt(var + eps) + eps);
    }
    return scores;
}

// Dataset of windows holding one fixed-amplitude tone and one tone whose
// amplitude is redrawn per window.
std::vector<TimeWindow> two_tone_windows(std::mt19937_64& rng, std::size_t n_windows,
                                         std::size_t L, std::size_t stable_bin,
                                         std::size_t unstable_bin) {
    std::uniform_real_distribution<double> amp(0.2, 2.0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    std::vector<TimeWindow> windows;
    for (std::size_t i = 0; i < n_windows; ++i) {
        const double a_unstable = amp(rng);
        const double p1 = phase(rng);
        const double p2 = phase(rng);
        TimeWindow w(L, 1);
        for (std::size_t t = 0; t < L; ++t) {
            const double x = 2.0 * std::numbers::pi * static_cast<double>(t)
                             / static_cast<double>(L);
            w(t, 0) = 1.0 * std::sin(x * static_cast<double>(stable_bin) + p1)
                      + a_unstable * std::sin(x * static_cast<double>(unstable_bin) + p2);
        }
        windows.push_back(std::move(w));
    }
    return windows;
}

} // namespace

TEST_CASE("single window accumulation is the amplitude matrix", "[stability]") {
    std::mt19937_64 rng(11);
    const TimeWindow w = random_window(rng, 16, 2);
    const AmplitudeAccumulator acc = accumulate(AmplitudeAccumulator{}, w);
    const AmplitudeMatrix amp = amplitudes(dft(w));
    REQUIRE(acc.count == 1);
    for (std::size_t i = 0; i < amp.amplitudes.size(); ++i) {
        CHECK_THAT(acc.sum_a.data[i], Catch::Matchers::WithinAbs(amp.amplitudes.data[i], 1e-12));
        CHECK_THAT(acc.sum_a2.data[i],
                   Catch::Matchers::WithinAbs(amp.amplitudes.data[i] * amp.amplitudes.data[i],
                                              1e-12));
    }
}

TEST_CASE("accumulation order does not matter", "[stability]") {
    std::mt19937_64 rng(12);
    const TimeWindow w1 = random_window(rng, 12, 1);
    const TimeWindow w2 = random_window(rng, 12, 1);
    const auto a = accumulate(accumulate(AmplitudeAccumulator{}, w1), w2);
    const auto b = accumulate(accumulate(AmplitudeAccumulator{}, w2), w1);
    REQUIRE(a.count == b.count);
    for (std::size_t i = 0; i < a.sum_a.size(); ++i) {
        CHECK_THAT(a.sum_a.data[i], Catch::Matchers::WithinAbs(b.sum_a.data[i], 1e-12));
        CHECK_THAT(a.sum_a2.data[i], Catch::Matchers::WithinAbs(b.sum_a2.data[i], 1e-12));
    }
}

TEST_CASE("streaming scores match the two-pass oracle", "[stability]") {
    std::mt19937_64 rng(13);
    std::vector<TimeWindow> windows;
    AmplitudeAccumulator acc;
    for (int i = 0; i < 50; ++i) {
        windows.push_back(random_window(rng, 24, 2));
        acc = accumulate(std::move(acc), windows.back());
    }
    const StabilityMeasure measure = finalize(acc);
    const Matrix oracle = batch_scores(windows);
    REQUIRE(measure.sample_count == 50);
    for (std::size_t i = 0; i < oracle.size(); ++i) {
        CHECK(rel_err(measure.scores.data[i], oracle.data[i]) < 1e-9);
    }
}

TEST_CASE("permutation of the dataset leaves the scores unchanged", "[stability]") {
    std::mt19937_64 rng(14);
    std::vector<TimeWindow> windows;
    for (int i = 0; i < 20; ++i) windows.push_back(random_window(rng, 16, 1));

    AmplitudeAccumulator forward_acc;
    for (const auto& w : windows) forward_acc = accumulate(std::move(forward_acc), w);

    std::shuffle(windows.begin(), windows.end(), rng);
    AmplitudeAccumulator shuffled_acc;
    for (const auto& w : windows) shuffled_acc = accumulate(std::move(shuffled_acc), w);

    const StabilityMeasure a = finalize(forward_acc);
    const StabilityMeasure b = finalize(shuffled_acc);
    for (std::size_t i = 0; i < a.scores.size(); ++i) {
        CHECK(rel_err(a.scores.data[i], b.scores.data[i]) < 1e-12);
    }
}

TEST_CASE("merge equals sequential accumulation", "[stability]") {
    std::mt19937_64 rng(15);
    std::vector<TimeWindow> windows;
    for (int i = 0; i < 10; ++i) windows.push_back(random_window(rng, 10, 2));

    AmplitudeAccumulator whole;
    for (const auto& w : windows) whole = accumulate(std::move(whole), w);

    AmplitudeAccumulator left;
    AmplitudeAccumulator right;
    for (std::size_t i = 0; i < windows.size(); ++i) {
        auto& shard = i < 5 ? left : right;
        shard = accumulate(std::move(shard), windows[i]);
    }
    const AmplitudeAccumulator merged = merge(std::move(left), right);
    REQUIRE(merged.count == whole.count);
    for (std::size_t i = 0; i < whole.sum_a.size(); ++i) {
        CHECK_THAT(merged.sum_a.data[i], Catch::Matchers::WithinAbs(whole.sum_a.data[i], 1e-12));
        CHECK_THAT(merged.sum_a2.data[i], Catch::Matchers::WithinAbs(whole.sum_a2.data[i], 1e-12));
    }
}

TEST_CASE("constant amplitude collapses the denominator to the eps floor", "[stability]") {
    // every window identical: variance is exactly zero, so sigma = sqrt(eps)
    TimeWindow w(8, 1);
    for (std::size_t t = 0; t < 8; ++t) {
        w(t, 0) = std::cos(2.0 * std::numbers::pi * static_cast<double>(t) / 8.0);
    }
    AmplitudeAccumulator acc;
    for (int i = 0; i < 5; ++i) acc = accumulate(std::move(acc), w);
    const StabilityMeasure measure = finalize(acc);

    const AmplitudeMatrix amp = amplitudes(dft(w));
    const double a = amp.amplitudes(1, 0);
    CHECK_THAT(a, Catch::Matchers::WithinAbs(4.0, 1e-9));   // L/2 for a unit cosine
    const double want = a / (std::sqrt(1e-5) + 1e-5);
    CHECK(rel_err(measure.scores(1, 0), want) < 1e-9);

    // the documented closed form at amplitude 2: a hair over 630
    const double s2 = 2.0 / (std::sqrt(1e-5) + 1e-5);
    CHECK(s2 > 630.0);
    CHECK(s2 < 631.0);
}

TEST_CASE("all-zero windows score zero", "[stability]") {
    AmplitudeAccumulator acc;
    for (int i = 0; i < 3; ++i) acc = accumulate(std::move(acc), TimeWindow(8, 2));
    const StabilityMeasure measure = finalize(acc);
    for (double s : measure.scores.data) CHECK(s == 0.0);
}

TEST_CASE("finalize rejects an empty accumulator", "[stability]") {
    CHECK_THROWS_AS(finalize(AmplitudeAccumulator{}), std::runtime_error);
}

TEST_CASE("stable tone outranks the unstable tone", "[stability]") {
    std::mt19937_64 rng(16);
    const std::size_t stable_bin = 5;
    const std::size_t unstable_bin = 2;
    AmplitudeAccumulator acc;
    for (const auto& w : two_tone_windows(rng, 200, 32, stable_bin, unstable_bin)) {
        acc = accumulate(std::move(acc), w);
    }
    const StabilityMeasure measure = finalize(acc);
    CHECK(measure.scores(stable_bin, 0) > measure.scores(unstable_bin, 0));
}

TEST_CASE("separation holds across 100 independent dataset draws", "[stability]") {
    std::mt19937_64 rng(17);
    int ordered = 0;
    for (int draw = 0; draw < 100; ++draw) {
        AmplitudeAccumulator acc;
        for (const auto& w : two_tone_windows(rng, 40, 32, 9, 3)) {
            acc = accumulate(std::move(acc), w);
        }
        const StabilityMeasure measure = finalize(acc);
        if (measure.scores(9, 0) > measure.scores(3, 0)) ++ordered;
    }
    CHECK(ordered == 100);
}

TEST_CASE("scores are nearly scale invariant where sigma dominates eps", "[stability]") {
    std::mt19937_64 rng(18);
    std::vector<TimeWindow> windows;
    for (int i = 0; i < 60; ++i) windows.push_back(random_window(rng, 24, 1, 5.0));

    AmplitudeAccumulator base;
    AmplitudeAccumulator scaled;
    const double c = 37.0;
    for (const auto& w : windows) {
        base = accumulate(std::move(base), w);
        TimeWindow ws = w;
        for (double& v : ws.data) v *= c;
        scaled = accumulate(std::move(scaled), ws);
    }
    const MeasureStats from_base = finalize_stats(base);
    const MeasureStats from_scaled = finalize_stats(scaled);
    for (std::size_t i = 0; i < from_base.scores.size(); ++i) {
        CHECK(rel_err(from_scaled.mu.data[i], c * from_base.mu.data[i]) < 1e-9);
        if (from_base.sigma.data[i] > 1e-2) {   // sigma well above the eps terms
            CHECK(rel_err(from_scaled.scores.data[i], from_base.scores.data[i]) < 1e-3);
        }
    }
}

TEST_CASE("stable_subset picks the top scores away from DC", "[stability]") {
    StabilityMeasure measure;
    measure.sample_count = 1;
    measure.scores = Matrix(6, 1);
    measure.scores(0, 0) = 100.0;   // DC must never appear
    measure.scores(1, 0) = 1.0;
    measure.scores(2, 0) = 5.0;
    measure.scores(3, 0) = 9.0;
    measure.scores(4, 0) = 5.0;
    measure.scores(5, 0) = 2.0;

    CHECK(stable_subset(measure, 1, 0) == std::vector<std::size_t>{3});
    // tie between bins 2 and 4 resolves to the lower index
    CHECK(stable_subset(measure, 2, 0) == std::vector<std::size_t>({2, 3}));
    CHECK(stable_subset(measure, 5, 0) == std::vector<std::size_t>({1, 2, 3, 4, 5}));
    CHECK_THROWS_AS(stable_subset(measure, 0, 0), std::invalid_argument);
    CHECK_THROWS_AS(stable_subset(measure, 6, 0), std::invalid_argument);
}

TEST_CASE("stable_subset matches a sort-based oracle", "[stability]") {
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> dist(0.0, 10.0);
    StabilityMeasure measure;
    measure.sample_count = 1;
    measure.scores = Matrix(33, 2);
    for (double& v : measure.scores.data) v = dist(rng);

    for (std::size_t channel = 0; channel < 2; ++channel) {
        const auto got = stable_subset(measure, 5, channel);

        std::vector<std::size_t> oracle(32);
        std::iota(oracle.begin(), oracle.end(), std::size_t{1});
        std::stable_sort(oracle.begin(), oracle.end(), [&](std::size_t a, std::size_t b) {
            return measure.scores(a, channel) > measure.scores(b, channel);
        });
        oracle.resize(5);
        std::sort(oracle.begin(), oracle.end());
        CHECK(got == oracle);
    }
}

TEST_CASE("measure file round trip is bitwise exact", "[stability]") {
    std::mt19937_64 rng(20);
    AmplitudeAccumulator acc;
    for (int i = 0; i < 7; ++i) acc = accumulate(std::move(acc), random_window(rng, 20, 3));
    const StabilityMeasure measure = finalize(acc);

    std::ostringstream out;
    save_measure(measure, out);
    std::istringstream in(out.str());
    const StabilityMeasure back = load_measure(in, "roundtrip");

    REQUIRE(back.scores.same_shape(measure.scores));
    CHECK(back.sample_count == measure.sample_count);
    CHECK(back.epsilon == measure.epsilon);
    for (std::size_t i = 0; i < measure.scores.size(); ++i) {
        CHECK(back.scores.data[i] == measure.scores.data[i]);
    }
}

TEST_CASE("malformed measure files fail with a parse error", "[stability]") {
    auto load_text = [](const std::string& text) {
        std::istringstream in(text);
        return load_measure(in, "test");
    };
    CHECK_THROWS_AS(load_text(""), std::runtime_error);
    CHECK_THROWS_AS(load_text("3 1 5 1e-5\n0.5\n"), std::runtime_error);            // truncated
    CHECK_THROWS_AS(load_text("2 2 5 1e-5\n0.5 0.5\n0.5\n"), std::runtime_error);   // ragged row
    CHECK_THROWS_AS(load_text("2 1 5 1e-5\n0.5\npotato\n"), std::runtime_error);    // non-numeric
    CHECK_THROWS_AS(load_text("2 1 0 1e-5\n0.5\n0.5\n"), std::runtime_error);       // zero count
    CHECK_THROWS_AS(load_text("nonsense\n"), std::runtime_error);
}
