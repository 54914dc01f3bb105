#pragma once

#include "frednormer/matrix.hpp"

#include <map>
#include <memory>
#include <mutex>

namespace frednormer {

/**
 * Half spectrum of a length-L real window: K = floor(L/2) + 1 complex
 * coefficients per channel, stored as paired real/imaginary K x C matrices.
 *
 * Spectra produced by independent real/imaginary reweighting are generally
 * not Hermitian-consistent; idft_real() still inverts them deterministically
 * by conjugate-symmetric extension followed by real-part truncation.
 */
struct Spectrum {
    Matrix real_part;                // K x C
    Matrix imag_part;                // K x C
    std::size_t source_length = 0;   // L of the originating window

    std::size_t bins() const { return real_part.rows; }
    std::size_t channels() const { return real_part.cols; }
};

struct AmplitudeMatrix {
    Matrix amplitudes;               // K x C, entries >= 0
};

inline std::size_t spectrum_bins(std::size_t length) { return length / 2 + 1; }

// Multiplicity of bin k when folding the half spectrum back to length L.
// DC and (for even L) the Nyquist bin occur once; every other bin stands
// for a conjugate pair.
inline double bin_multiplicity(std::size_t k, std::size_t length) {
    if (k == 0) return 1.0;
    if (length % 2 == 0 && k == length / 2) return 1.0;
    return 2.0;
}

namespace detail {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// cos/sin lookup for a fixed window length, shared by dft/idft_real.
// Angles are reduced with (k*t) mod L before evaluating, so the table is
// exactly periodic in both indices.
struct TrigTable {
    std::size_t length;
    std::size_t bins;
    std::vector<double> cos_kt;      // bins x length
    std::vector<double> sin_kt;

    explicit TrigTable(std::size_t L)
        : length(L), bins(spectrum_bins(L)), cos_kt(bins * L), sin_kt(bins * L) {
        const double step = kTwoPi / static_cast<double>(L);
        for (std::size_t k = 0; k < bins; ++k) {
            for (std::size_t t = 0; t < L; ++t) {
                const double angle = step * static_cast<double>((k * t) % L);
                cos_kt[k * L + t] = std::cos(angle);
                sin_kt[k * L + t] = std::sin(angle);
            }
        }
    }
};

inline std::shared_ptr<const TrigTable> trig_table(std::size_t length) {
    static std::mutex mu;
    static std::map<std::size_t, std::shared_ptr<const TrigTable>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[length];
    if (!slot) slot = std::make_shared<TrigTable>(length);
    return slot;
}

} // namespace detail

/**
 * Forward transform: F(k,c) = sum_t x(t,c) * e^{-i 2 pi k t / L} for
 * k = 0 .. floor(L/2). Uses a table-driven direct summation; the contract
 * is the defining sum itself.
 */
inline Spectrum dft(const TimeWindow& window) {
    validate_window(window, "dft");
    const std::size_t L = window.rows;
    const std::size_t C = window.cols;
    const std::size_t K = spectrum_bins(L);
    const auto table = detail::trig_table(L);

    Spectrum out;
    out.real_part = Matrix(K, C);
    out.imag_part = Matrix(K, C);
    out.source_length = L;
    for (std::size_t k = 0; k < K; ++k) {
        const double* ck = &table->cos_kt[k * L];
        const double* sk = &table->sin_kt[k * L];
        double* re = &out.real_part.data[k * C];
        double* im = &out.imag_part.data[k * C];
        for (std::size_t t = 0; t < L; ++t) {
            const double c = ck[t];
            const double s = sk[t];
            const double* row = &window.data[t * C];
            for (std::size_t ch = 0; ch < C; ++ch) {
                re[ch] += row[ch] * c;
                im[ch] -= row[ch] * s;
            }
        }
    }
    return out;
}

/**
 * Inverse transform keeping only the real part:
 *
 *   x(l,c) = (1/L) * sum_k m(k) * (Fr(k,c) cos(2 pi k l / L)
 *                                  - Fi(k,c) sin(2 pi k l / L))
 *
 * with m(k) = bin_multiplicity. Equals the real part of the naive full
 * inverse after conjugate-symmetric extension, for any half spectrum.
 */
inline TimeWindow idft_real(const Spectrum& spectrum) {
    const std::size_t L = spectrum.source_length;
    const std::size_t K = spectrum.bins();
    const std::size_t C = spectrum.channels();
    require(L >= 2, "idft_real: source length must be at least 2");
    require(K == spectrum_bins(L), "idft_real: bin count does not match source length");
    require(spectrum.imag_part.rows == K && spectrum.imag_part.cols == C,
            "idft_real: real/imag shape mismatch");
    require(spectrum.real_part.all_finite() && spectrum.imag_part.all_finite(),
            "idft_real: spectrum has non-finite entries");
    const auto table = detail::trig_table(L);

    TimeWindow out(L, C);
    const double inv_len = 1.0 / static_cast<double>(L);
    for (std::size_t k = 0; k < K; ++k) {
        const double scale = bin_multiplicity(k, L) * inv_len;
        const double* ck = &table->cos_kt[k * L];
        const double* sk = &table->sin_kt[k * L];
        const double* re = &spectrum.real_part.data[k * C];
        const double* im = &spectrum.imag_part.data[k * C];
        for (std::size_t l = 0; l < L; ++l) {
            const double c = ck[l] * scale;
            const double s = sk[l] * scale;
            double* row = &out.data[l * C];
            for (std::size_t ch = 0; ch < C; ++ch) {
                row[ch] += re[ch] * c - im[ch] * s;
            }
        }
    }
    return out;
}

/// Elementwise magnitude sqrt(re^2 + im^2) of the coefficients.
inline AmplitudeMatrix amplitudes(const Spectrum& spectrum) {
    const std::size_t K = spectrum.bins();
    const std::size_t C = spectrum.channels();
    require(spectrum.imag_part.rows == K && spectrum.imag_part.cols == C,
            "amplitudes: real/imag shape mismatch");
    require(spectrum.real_part.all_finite() && spectrum.imag_part.all_finite(),
            "amplitudes: spectrum has non-finite entries");

    AmplitudeMatrix out;
    out.amplitudes = Matrix(K, C);
    for (std::size_t i = 0; i < out.amplitudes.size(); ++i) {
        const double r = spectrum.real_part.data[i];
        const double m = spectrum.imag_part.data[i];
        out.amplitudes.data[i] = std::sqrt(r * r + m * m);
    }
    return out;
}

} // namespace frednormer
