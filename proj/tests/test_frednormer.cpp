#include "frednormer/frednormer.hpp"

#include "test_util.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <complex>
#include <numbers>
#include <set>
#include <sstream>

using namespace frednormer;
using testutil::random_window;
using testutil::rel_err;

namespace {

StabilityMeasure random_measure(std::mt19937_64& rng, std::size_t bins, std::size_t channels) {
    std::uniform_real_distribution<double> dist(0.0, 4.0);
    StabilityMeasure measure;
    measure.sample_count = 1;
    measure.scores = Matrix(bins, channels);
    for (double& v : measure.scores.data) v = dist(rng);
    return measure;
}

FredNormerParams random_params(std::mt19937_64& rng, std::size_t bins) {
    std::uniform_real_distribution<double> dist(-1.5, 1.5);
    FredNormerParams p = init_params(bins);
    for (auto* v : {&p.w_r, &p.b_r, &p.w_i, &p.b_i}) {
        for (double& x : *v) x = dist(rng);
    }
    return p;
}

// Straight-line reimplementation of the whole layer with std::complex:
// difference, full defining-sum transform, per-bin affine modulation of the
// two parts, conjugate-symmetric extension, full inverse, real part.
TimeWindow naive_layer(const FredNormerParams& params, const StabilityMeasure& measure,
                       const TimeWindow& window) {
    const std::size_t L = window.rows;
    const std::size_t C = window.cols;
    const std::size_t K = L / 2 + 1;

    Matrix d(L, C);
    for (std::size_t l = 1; l < L; ++l) {
        for (std::size_t c = 0; c < C; ++c) d(l, c) = window(l, c) - window(l - 1, c);
    }

    TimeWindow out(L, C);
    for (std::size_t c = 0; c < C; ++c) {
        std::vector<std::complex<double>> full(L);
        for (std::size_t k = 0; k < K; ++k) {
            std::complex<double> f(0.0, 0.0);
            for (std::size_t t = 0; t < L; ++t) {
                const double angle = -2.0 * std::numbers::pi * static_cast<double>(k * t)
                                     / static_cast<double>(L);
                f += d(t, c) * std::polar(1.0, angle);
            }
            const double s = measure.scores(k, c);
            full[k] = {f.real() * (s * params.w_r[k] + params.b_r[k]),
                       f.imag() * (s * params.w_i[k] + params.b_i[k])};
        }
        for (std::size_t k = K; k < L; ++k) full[k] = std::conj(full[L - k]);
        for (std::size_t l = 0; l < L; ++l) {
            std::complex<double> acc(0.0, 0.0);
            for (std::size_t k = 0; k < L; ++k) {
                const double angle = 2.0 * std::numbers::pi * static_cast<double>(k * l)
                                     / static_cast<double>(L);
                acc += full[k] * std::polar(1.0, angle);
            }
            out(l, c) = acc.real() / static_cast<double>(L);
        }
    }
    return out;
}

double loss_against(const TimeWindow& out, const TimeWindow& weights) {
    double loss = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) loss += out.data[i] * weights.data[i];
    return loss;
}

} // namespace

TEST_CASE("diff1 basics", "[frednormer]") {
    TimeWindow constant(5, 2, 3.0);
    for (double v : diff1(constant).data) CHECK(v == 0.0);

    TimeWindow w(3, 1);
    w(0, 0) = 1.0;
    w(1, 0) = 3.0;
    w(2, 0) = 6.0;
    const TimeWindow d = diff1(w);
    CHECK(d(0, 0) == 0.0);
    CHECK(d(1, 0) == 2.0);
    CHECK(d(2, 0) == 3.0);

    TimeWindow too_short(1, 1, 1.0);
    CHECK_THROWS_AS(diff1(too_short), std::invalid_argument);
}

TEST_CASE("cumulative sum of diff1 reconstructs the window", "[frednormer]") {
    std::mt19937_64 rng(31);
    const TimeWindow w = random_window(rng, 19, 2);
    const TimeWindow d = diff1(w);
    for (std::size_t c = 0; c < 2; ++c) {
        double running = w(0, c);
        CHECK_THAT(running + d(0, c), Catch::Matchers::WithinAbs(w(0, c), 1e-12));
        for (std::size_t l = 1; l < 19; ++l) {
            running += d(l, c);
            CHECK_THAT(running, Catch::Matchers::WithinAbs(w(l, c), 1e-10));
        }
    }
}

TEST_CASE("default init makes the layer the identity on the differenced signal",
          "[frednormer]") {
    std::mt19937_64 rng(32);
    const TimeWindow w = random_window(rng, 24, 2);
    const StabilityMeasure measure = random_measure(rng, spectrum_bins(24), 2);
    const FredNormerParams params = init_params(spectrum_bins(24));
    const auto [out, tape] = forward(params, measure, w);
    const TimeWindow d = diff1(w);
    for (std::size_t i = 0; i < out.size(); ++i) {
        CHECK_THAT(out.data[i], Catch::Matchers::WithinAbs(d.data[i], 1e-10));
    }
    CHECK(tape.length == 24);
    CHECK(tape.channels == 2);
}

TEST_CASE("all-zero parameters zero the output", "[frednormer]") {
    std::mt19937_64 rng(33);
    const TimeWindow w = random_window(rng, 16, 1);
    const StabilityMeasure measure = random_measure(rng, spectrum_bins(16), 1);
    FredNormerParams params = init_params(spectrum_bins(16));
    std::fill(params.b_r.begin(), params.b_r.end(), 0.0);
    std::fill(params.b_i.begin(), params.b_i.end(), 0.0);
    const auto [out, tape] = forward(params, measure, w);
    for (double v : out.data) CHECK_THAT(v, Catch::Matchers::WithinAbs(0.0, 1e-12));
}

TEST_CASE("forward matches the straight-line reimplementation", "[frednormer]") {
    std::mt19937_64 rng(34);
    for (std::size_t L : {4, 8, 16, 32}) {
        const std::size_t C = L == 32 ? 2 : 1;
        const TimeWindow w = random_window(rng, L, C);
        const StabilityMeasure measure = random_measure(rng, spectrum_bins(L), C);
        const FredNormerParams params = random_params(rng, spectrum_bins(L));
        const auto [out, tape] = forward(params, measure, w);
        const TimeWindow want = naive_layer(params, measure, w);
        for (std::size_t i = 0; i < out.size(); ++i) {
            INFO("L = " << L << ", flat index " << i);
            CHECK(rel_err(out.data[i], want.data[i], 1e-9) < 1e-9);
        }
    }
}

TEST_CASE("forward is linear in the input", "[frednormer]") {
    std::mt19937_64 rng(35);
    const std::size_t L = 20;
    const StabilityMeasure measure = random_measure(rng, spectrum_bins(L), 1);
    const FredNormerParams params = random_params(rng, spectrum_bins(L));
    const TimeWindow w1 = random_window(rng, L, 1);
    const TimeWindow w2 = random_window(rng, L, 1);
    const double a = 0.9;
    const double b = -2.3;
    TimeWindow mix(L, 1);
    for (std::size_t i = 0; i < mix.size(); ++i) mix.data[i] = a * w1.data[i] + b * w2.data[i];

    const TimeWindow out_mix = forward(params, measure, mix).first;
    const TimeWindow out1 = forward(params, measure, w1).first;
    const TimeWindow out2 = forward(params, measure, w2).first;
    for (std::size_t i = 0; i < mix.size(); ++i) {
        const double want = a * out1.data[i] + b * out2.data[i];
        CHECK(rel_err(out_mix.data[i], want, 1e-6) < 1e-9);
    }
}

TEST_CASE("zero output gradient produces zero gradients", "[frednormer]") {
    std::mt19937_64 rng(36);
    const TimeWindow w = random_window(rng, 12, 2);
    const StabilityMeasure measure = random_measure(rng, spectrum_bins(12), 2);
    const FredNormerParams params = random_params(rng, spectrum_bins(12));
    const auto [out, tape] = forward(params, measure, w);
    const auto [grads, grad_input] = backward(tape, TimeWindow(12, 2));
    for (const auto* v : {&grads.w_r, &grads.b_r, &grads.w_i, &grads.b_i}) {
        for (double g : *v) CHECK(g == 0.0);
    }
    for (double g : grad_input.data) CHECK(g == 0.0);
}

TEST_CASE("parameter gradients match central finite differences", "[frednormer]") {
    std::mt19937_64 rng(37);
    const std::size_t L = 16;
    const std::size_t C = 2;
    const std::size_t K = spectrum_bins(L);
    const TimeWindow w = random_window(rng, L, C);
    const StabilityMeasure measure = random_measure(rng, K, C);
    const FredNormerParams params = random_params(rng, K);
    const TimeWindow loss_weights = random_window(rng, L, C);

    const auto [out, tape] = forward(params, measure, w);
    const auto [grads, grad_input] = backward(tape, loss_weights);

    const double h = 1e-5;
    auto fd = [&](FredNormerParams p, std::vector<double> FredNormerParams::* member,
                  std::size_t k) {
        (p.*member)[k] += h;
        const double up = loss_against(forward(p, measure, w).first, loss_weights);
        (p.*member)[k] -= 2.0 * h;
        const double down = loss_against(forward(p, measure, w).first, loss_weights);
        return (up - down) / (2.0 * h);
    };

    for (std::size_t k : {std::size_t{0}, std::size_t{3}, K - 1}) {
        CHECK(rel_err(grads.w_r[k], fd(params, &FredNormerParams::w_r, k), 1e-7) < 1e-4);
        CHECK(rel_err(grads.b_r[k], fd(params, &FredNormerParams::b_r, k), 1e-7) < 1e-4);
        CHECK(rel_err(grads.w_i[k], fd(params, &FredNormerParams::w_i, k), 1e-7) < 1e-4);
        CHECK(rel_err(grads.b_i[k], fd(params, &FredNormerParams::b_i, k), 1e-7) < 1e-4);
    }
}

TEST_CASE("input gradient matches central finite differences on an 8x1 window",
          "[frednormer]") {
    std::mt19937_64 rng(38);
    const std::size_t L = 8;
    const std::size_t K = spectrum_bins(L);
    TimeWindow w = random_window(rng, L, 1);
    const StabilityMeasure measure = random_measure(rng, K, 1);
    const FredNormerParams params = random_params(rng, K);
    const TimeWindow loss_weights = random_window(rng, L, 1);

    const auto [out, tape] = forward(params, measure, w);
    const auto [grads, grad_input] = backward(tape, loss_weights);

    const double h = 1e-5;
    for (std::size_t l = 0; l < L; ++l) {
        w(l, 0) += h;
        const double up = loss_against(forward(params, measure, w).first, loss_weights);
        w(l, 0) -= 2.0 * h;
        const double down = loss_against(forward(params, measure, w).first, loss_weights);
        w(l, 0) += h;
        const double want = (up - down) / (2.0 * h);
        INFO("l = " << l);
        CHECK(rel_err(grad_input(l, 0), want, 1e-7) < 1e-4);
    }
}

TEST_CASE("all-pass low-pass filter reduces to the differenced signal", "[frednormer]") {
    std::mt19937_64 rng(39);
    const std::size_t L = 24;
    const std::size_t K = spectrum_bins(L);
    const TimeWindow w = random_window(rng, L, 2);
    const StabilityMeasure measure = random_measure(rng, K, 2);
    const FredNormerParams params = random_params(rng, K);
    const TimeWindow out = apply_filter(FilterKind::low_pass(K - 1), measure, params, w);
    const TimeWindow d = diff1(w);
    for (std::size_t i = 0; i < out.size(); ++i) {
        CHECK_THAT(out.data[i], Catch::Matchers::WithinAbs(d.data[i], 1e-10));
    }
}

TEST_CASE("tight low-pass removes the high tone", "[frednormer]") {
    const std::size_t L = 32;
    const std::size_t K = spectrum_bins(L);
    TimeWindow w(L, 1);
    for (std::size_t t = 0; t < L; ++t) {
        const double x = 2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(L);
        w(t, 0) = std::sin(x) + 0.7 * std::sin(5.0 * x);
    }
    std::mt19937_64 rng(40);
    const StabilityMeasure measure = random_measure(rng, K, 1);
    const FredNormerParams params = init_params(K);

    const TimeWindow out = apply_filter(FilterKind::low_pass(1), measure, params, w);
    const Spectrum out_spec = dft(out);
    const Spectrum in_spec = dft(diff1(w));
    const double in_bin5 = std::hypot(in_spec.real_part(5, 0), in_spec.imag_part(5, 0));
    const double out_bin5 = std::hypot(out_spec.real_part(5, 0), out_spec.imag_part(5, 0));
    REQUIRE(in_bin5 > 1.0);   // the tone survives differencing
    CHECK(out_bin5 < 1e-9 * in_bin5);
}

TEST_CASE("random selection is a deterministic m-subset of non-zero bins", "[frednormer]") {
    const auto bins1 = random_select_bins(5, 17, 99);
    const auto bins2 = random_select_bins(5, 17, 99);
    CHECK(bins1 == bins2);
    CHECK(bins1.size() == 5);
    const std::set<std::size_t> unique(bins1.begin(), bins1.end());
    CHECK(unique.size() == 5);
    for (std::size_t k : bins1) {
        CHECK(k >= 1);
        CHECK(k <= 16);
    }
    CHECK(random_select_bins(5, 17, 100) != bins1);   // different seed moves the subset

    std::mt19937_64 rng(41);
    const TimeWindow w = random_window(rng, 32, 1);
    const StabilityMeasure measure = random_measure(rng, spectrum_bins(32), 1);
    const FredNormerParams params = init_params(spectrum_bins(32));
    const TimeWindow a = apply_filter(FilterKind::random_select(4, 7), measure, params, w);
    const TimeWindow b = apply_filter(FilterKind::random_select(4, 7), measure, params, w);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.data[i] == b.data[i]);
}

TEST_CASE("filter argument validation", "[frednormer]") {
    std::mt19937_64 rng(42);
    const TimeWindow w = random_window(rng, 16, 1);
    const std::size_t K = spectrum_bins(16);
    const StabilityMeasure measure = random_measure(rng, K, 1);
    const FredNormerParams params = init_params(K);
    CHECK_THROWS_AS(apply_filter(FilterKind::low_pass(0), measure, params, w),
                    std::invalid_argument);
    CHECK_THROWS_AS(apply_filter(FilterKind::low_pass(K), measure, params, w),
                    std::invalid_argument);
    CHECK_THROWS_AS(apply_filter(FilterKind::random_select(0, 1), measure, params, w),
                    std::invalid_argument);
    CHECK_THROWS_AS(apply_filter(FilterKind::random_select(K, 1), measure, params, w),
                    std::invalid_argument);
}

TEST_CASE("init schemes", "[frednormer]") {
    const FredNormerParams identity = init_params(9);
    for (double v : identity.w_r) CHECK(v == 0.0);
    for (double v : identity.b_r) CHECK(v == 1.0);
    for (double v : identity.w_i) CHECK(v == 0.0);
    for (double v : identity.b_i) CHECK(v == 1.0);

    const FredNormerParams unit_w = init_params(9, InitScheme::UnitW);
    for (double v : unit_w.w_r) CHECK(v == 1.0);
    for (double v : unit_w.b_r) CHECK(v == 0.0);

    // unit-w effective weight equals the stability score itself
    std::mt19937_64 rng(43);
    const StabilityMeasure measure = random_measure(rng, 9, 2);
    const auto [er, ei] = effective_weights(unit_w, measure);
    for (std::size_t k = 0; k < 9; ++k) {
        for (std::size_t c = 0; c < 2; ++c) {
            CHECK(er(k, c) == measure.scores(k, c));
            CHECK(ei(k, c) == measure.scores(k, c));
        }
    }

    const FredNormerParams again = init_params(9, InitScheme::UnitW);
    CHECK(again.w_r == unit_w.w_r);
    CHECK(again.b_r == unit_w.b_r);
}

TEST_CASE("parameter file round trip and malformed input", "[frednormer]") {
    std::mt19937_64 rng(44);
    const FredNormerParams params = random_params(rng, 12);
    std::ostringstream out;
    save_params(params, out);
    std::istringstream in(out.str());
    const FredNormerParams back = load_params(in, "roundtrip");
    CHECK(back.w_r == params.w_r);
    CHECK(back.b_r == params.b_r);
    CHECK(back.w_i == params.w_i);
    CHECK(back.b_i == params.b_i);

    auto load_text = [](const std::string& text) {
        std::istringstream stream(text);
        return load_params(stream, "test");
    };
    CHECK_THROWS_AS(load_text(""), std::runtime_error);
    CHECK_THROWS_AS(load_text("2\n1 2\n3 4\n5 6\n"), std::runtime_error);       // missing b_i
    CHECK_THROWS_AS(load_text("2\n1 2 3\n1 2\n1 2\n1 2\n"), std::runtime_error); // wrong width
    CHECK_THROWS_AS(load_text("0\n\n\n\n\n"), std::runtime_error);               // zero bins
}
