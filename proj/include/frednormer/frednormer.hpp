#pragma once

#include "frednormer/stability.hpp"

#include <fstream>
#include <random>
#include <utility>

namespace frednormer {

/**
 * Learnable per-frequency weights of the stability weighting layer. The
 * effective multiplier for bin k, channel c on the real branch is
 * S(k,c) * w_r(k) + b_r(k), and likewise on the imaginary branch; real and
 * imaginary parts are modulated by separate parameter sets.
 */
struct FredNormerParams {
    std::vector<double> w_r;
    std::vector<double> b_r;
    std::vector<double> w_i;
    std::vector<double> b_i;

    std::size_t bins() const { return w_r.size(); }

    bool all_finite() const {
        for (const auto* v : {&w_r, &b_r, &w_i, &b_i})
            for (double x : *v)
                if (!std::isfinite(x)) return false;
        return true;
    }
};

enum class InitScheme {
    Identity,   // w = 0, b = 1: the layer starts as a no-op modulation
    UnitW,      // w = 1, b = 0: effective weight equals S(k,c)
};

inline FredNormerParams init_params(std::size_t k, InitScheme scheme = InitScheme::Identity) {
    require(k >= 1, "init_params: need at least one frequency bin");
    FredNormerParams p;
    const double w = scheme == InitScheme::UnitW ? 1.0 : 0.0;
    const double b = scheme == InitScheme::UnitW ? 0.0 : 1.0;
    p.w_r.assign(k, w);
    p.b_r.assign(k, b);
    p.w_i.assign(k, w);
    p.b_i.assign(k, b);
    return p;
}

/// Intermediates recorded by forward() for the exact reverse pass.
struct ForwardTape {
    std::size_t length = 0;
    std::size_t channels = 0;
    Matrix spectrum_real;   // K x C, spectrum of the differenced input, pre-modulation
    Matrix spectrum_imag;
    Matrix weight_real;     // K x C effective multipliers
    Matrix weight_imag;
    Matrix stability;       // K x C scores used
};

/**
 * Length-preserving first difference: d(0,c) = 0,
 * d(l,c) = x(l,c) - x(l-1,c) for l >= 1.
 */
inline TimeWindow diff1(const TimeWindow& window) {
    validate_window(window, "diff1");
    TimeWindow out(window.rows, window.cols);
    for (std::size_t l = 1; l < window.rows; ++l) {
        for (std::size_t c = 0; c < window.cols; ++c) {
            out(l, c) = window(l, c) - window(l - 1, c);
        }
    }
    return out;
}

/**
 * The weighting layer: difference the window, transform to the half
 * spectrum, scale the real/imaginary parts by affine functions of the
 * stability scores, and transform back, keeping the real part. Output has
 * the input's exact L x C shape.
 */
inline std::pair<TimeWindow, ForwardTape> forward(const FredNormerParams& params,
                                                  const StabilityMeasure& measure,
                                                  const TimeWindow& window) {
    validate_window(window, "frednormer forward");
    const std::size_t L = window.rows;
    const std::size_t C = window.cols;
    const std::size_t K = spectrum_bins(L);
    require(params.all_finite(), "frednormer forward: non-finite parameters");
    require(params.bins() == K && params.b_r.size() == K && params.w_i.size() == K
                && params.b_i.size() == K,
            "frednormer forward: parameter length does not match the window's bin count");
    require(measure.scores.rows == K && measure.scores.cols == C,
            "frednormer forward: stability measure shape does not match the window");

    const Spectrum spec = dft(diff1(window));

    ForwardTape tape;
    tape.length = L;
    tape.channels = C;
    tape.spectrum_real = spec.real_part;
    tape.spectrum_imag = spec.imag_part;
    tape.stability = measure.scores;
    tape.weight_real = Matrix(K, C);
    tape.weight_imag = Matrix(K, C);

    Spectrum weighted;
    weighted.real_part = Matrix(K, C);
    weighted.imag_part = Matrix(K, C);
    weighted.source_length = L;
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t c = 0; c < C; ++c) {
            const double s = measure.scores(k, c);
            const double er = s * params.w_r[k] + params.b_r[k];
            const double ei = s * params.w_i[k] + params.b_i[k];
            tape.weight_real(k, c) = er;
            tape.weight_imag(k, c) = ei;
            weighted.real_part(k, c) = spec.real_part(k, c) * er;
            weighted.imag_part(k, c) = spec.imag_part(k, c) * ei;
        }
    }
    return {idft_real(weighted), std::move(tape)};
}

/**
 * Exact reverse-mode gradients of forward() with respect to the four
 * parameter vectors and the input window.
 */
inline std::pair<FredNormerParams, TimeWindow> backward(const ForwardTape& tape,
                                                        const TimeWindow& grad_out) {
    const std::size_t L = tape.length;
    const std::size_t C = tape.channels;
    const std::size_t K = spectrum_bins(L);
    require(grad_out.rows == L && grad_out.cols == C,
            "frednormer backward: gradient shape does not match the tape");
    require(grad_out.all_finite(), "frednormer backward: non-finite gradient");
    const auto table = detail::trig_table(L);

    // adjoint of idft_real: distribute the time-domain gradient over bins
    Matrix g_wr_spec(K, C);   // d loss / d weighted real part
    Matrix g_wi_spec(K, C);
    for (std::size_t k = 0; k < K; ++k) {
        const double scale = bin_multiplicity(k, L) / static_cast<double>(L);
        const double* ck = &table->cos_kt[k * L];
        const double* sk = &table->sin_kt[k * L];
        double* gr = &g_wr_spec.data[k * C];
        double* gi = &g_wi_spec.data[k * C];
        for (std::size_t l = 0; l < L; ++l) {
            const double c = ck[l] * scale;
            const double s = sk[l] * scale;
            const double* row = &grad_out.data[l * C];
            for (std::size_t ch = 0; ch < C; ++ch) {
                gr[ch] += row[ch] * c;
                gi[ch] -= row[ch] * s;
            }
        }
    }

    // adjoint of the bilinear modulation
    FredNormerParams grads;
    grads.w_r.assign(K, 0.0);
    grads.b_r.assign(K, 0.0);
    grads.w_i.assign(K, 0.0);
    grads.b_i.assign(K, 0.0);
    Matrix g_spec_real(K, C);   // gradient on the pre-modulation spectrum
    Matrix g_spec_imag(K, C);
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t c = 0; c < C; ++c) {
            const double gr = g_wr_spec(k, c);
            const double gi = g_wi_spec(k, c);
            g_spec_real(k, c) = gr * tape.weight_real(k, c);
            g_spec_imag(k, c) = gi * tape.weight_imag(k, c);
            const double g_er = gr * tape.spectrum_real(k, c);
            const double g_ei = gi * tape.spectrum_imag(k, c);
            grads.w_r[k] += g_er * tape.stability(k, c);
            grads.b_r[k] += g_er;
            grads.w_i[k] += g_ei * tape.stability(k, c);
            grads.b_i[k] += g_ei;
        }
    }

    // adjoint of the forward transform
    Matrix g_diff(L, C);
    for (std::size_t k = 0; k < K; ++k) {
        const double* ck = &table->cos_kt[k * L];
        const double* sk = &table->sin_kt[k * L];
        const double* gr = &g_spec_real.data[k * C];
        const double* gi = &g_spec_imag.data[k * C];
        for (std::size_t l = 0; l < L; ++l) {
            const double c = ck[l];
            const double s = sk[l];
            double* row = &g_diff.data[l * C];
            for (std::size_t ch = 0; ch < C; ++ch) {
                row[ch] += gr[ch] * c - gi[ch] * s;
            }
        }
    }

    // adjoint of diff1; the leading zero row carries no input dependence
    TimeWindow grad_input(L, C);
    for (std::size_t l = 0; l < L; ++l) {
        for (std::size_t c = 0; c < C; ++c) {
            double g = l >= 1 ? g_diff(l, c) : 0.0;
            if (l + 1 < L) g -= g_diff(l + 1, c);
            grad_input(l, c) = g;
        }
    }
    return {std::move(grads), std::move(grad_input)};
}

enum class FilterType { StabilityWeighting, LowPass, RandomSelect };

/**
 * Which spectral filter drives the weighting stage. StabilityWeighting is
 * the learnable layer; the other two are fixed ablation filters that keep a
 * bin subset at unit weight and zero out the rest.
 */
struct FilterKind {
    FilterType type = FilterType::StabilityWeighting;
    std::size_t cutoff = 0;         // LowPass: pass bins k <= cutoff
    std::size_t select_count = 0;   // RandomSelect: number of kept non-zero bins
    unsigned long long seed = 0;    // RandomSelect: subset seed

    static FilterKind stability() { return {}; }
    static FilterKind low_pass(std::size_t cutoff) {
        FilterKind k;
        k.type = FilterType::LowPass;
        k.cutoff = cutoff;
        return k;
    }
    static FilterKind random_select(std::size_t m, unsigned long long seed) {
        FilterKind k;
        k.type = FilterType::RandomSelect;
        k.select_count = m;
        k.seed = seed;
        return k;
    }
};

/// Seed-deterministic m-subset of the non-zero bins {1, .., K-1}.
inline std::vector<std::size_t> random_select_bins(std::size_t m, std::size_t bins,
                                                   unsigned long long seed) {
    require(bins >= 2, "random_select_bins: need at least one non-zero bin");
    require(m >= 1 && m <= bins - 1, "random_select_bins: m must be in [1, K-1]");
    std::vector<std::size_t> idx(bins - 1);
    std::iota(idx.begin(), idx.end(), std::size_t{1});
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < m; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(m);
    std::sort(idx.begin(), idx.end());
    return idx;
}

/**
 * Run the weighting stage under the chosen filter. StabilityWeighting uses
 * the learnable parameters; LowPass and RandomSelect run the same
 * difference / transform / weight / invert pipeline with fixed 0/1 weights.
 */
inline TimeWindow apply_filter(const FilterKind& kind, const StabilityMeasure& measure,
                               const FredNormerParams& params, const TimeWindow& window) {
    if (kind.type == FilterType::StabilityWeighting) {
        return forward(params, measure, window).first;
    }

    validate_window(window, "apply_filter");
    const std::size_t L = window.rows;
    const std::size_t K = spectrum_bins(L);
    std::vector<double> keep(K, 0.0);
    if (kind.type == FilterType::LowPass) {
        require(kind.cutoff >= 1 && kind.cutoff <= K - 1,
                "apply_filter: low-pass cutoff must be in [1, K-1]");
        for (std::size_t k = 0; k <= kind.cutoff; ++k) keep[k] = 1.0;
    } else {
        for (std::size_t k : random_select_bins(kind.select_count, K, kind.seed)) keep[k] = 1.0;
    }

    Spectrum spec = dft(diff1(window));
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t c = 0; c < window.cols; ++c) {
            spec.real_part(k, c) *= keep[k];
            spec.imag_part(k, c) *= keep[k];
        }
    }
    return idft_real(spec);
}

/// Per-bin effective multipliers (real and imaginary branches) for a frozen measure.
inline std::pair<Matrix, Matrix> effective_weights(const FredNormerParams& params,
                                                   const StabilityMeasure& measure) {
    const std::size_t K = measure.scores.rows;
    const std::size_t C = measure.scores.cols;
    require(params.bins() == K, "effective_weights: parameter/measure bin mismatch");
    Matrix er(K, C), ei(K, C);
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t c = 0; c < C; ++c) {
            const double s = measure.scores(k, c);
            er(k, c) = s * params.w_r[k] + params.b_r[k];
            ei(k, c) = s * params.w_i[k] + params.b_i[k];
        }
    }
    return {std::move(er), std::move(ei)};
}

/**
 * Parameter checkpoint: header "K", then the four K-length vectors
 * (w_r, b_r, w_i, b_i), one per line, full round-trip precision.
 */
inline void save_params(const FredNormerParams& params, std::ostream& out) {
    out << params.bins() << '\n';
    for (const auto* v : {&params.w_r, &params.b_r, &params.w_i, &params.b_i}) {
        for (std::size_t i = 0; i < v->size(); ++i) {
            if (i) out << ' ';
            out << format_double((*v)[i]);
        }
        out << '\n';
    }
}

inline void save_params(const FredNormerParams& params, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_params: cannot open '" + path + "' for writing");
    save_params(params, out);
    if (!out) throw std::runtime_error("save_params: write to '" + path + "' failed");
}

inline FredNormerParams load_params(std::istream& in, const std::string& name) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(name + ": missing header line");
    const auto header = split_fields(line);
    if (header.size() != 1) throw std::runtime_error(name + ": header must be the bin count K");
    const std::size_t K = parse_size_field(header[0], name + " header K");
    if (K == 0) throw std::runtime_error(name + ": bin count must be positive");

    FredNormerParams params;
    std::vector<double>* vecs[4] = {&params.w_r, &params.b_r, &params.w_i, &params.b_i};
    const char* names[4] = {"w_r", "b_r", "w_i", "b_i"};
    for (int v = 0; v < 4; ++v) {
        if (!std::getline(in, line)) throw std::runtime_error(name + ": truncated before " + names[v]);
        const auto fields = split_fields(line);
        if (fields.size() != K) {
            throw std::runtime_error(name + ": " + names[v] + " has " + std::to_string(fields.size())
                                     + " entries, header says " + std::to_string(K));
        }
        vecs[v]->resize(K);
        for (std::size_t i = 0; i < K; ++i) {
            (*vecs[v])[i] = parse_double_field(fields[i], name + std::string(" ") + names[v]);
        }
    }
    if (!params.all_finite()) throw std::runtime_error(name + ": non-finite parameter");
    return params;
}

inline FredNormerParams load_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_params: cannot open '" + path + "'");
    return load_params(in, "parameter file " + path);
}

} // namespace frednormer
