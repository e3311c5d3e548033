#pragma once

// Sample-level Monte-Carlo model of the quantum layer. Channels act on symbol
// means; the unit vacuum contribution is injected once, at detection, which
// makes the sample statistics coincide with the covariance-matrix model.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "cvmdi/error.hpp"
#include "cvmdi/random.hpp"

namespace cvmdi::channel {

/// One quadrature pair in √SNU: x = real part, p = imaginary part.
using QuadSymbol = std::complex<double>;
using Symbols = std::vector<QuadSymbol>;

struct ChannelParams {
    double tau = 1.0;              // transmissivity, (0, 1]
    double xi_in = 0.0;            // excess noise at channel input, SNU
    double phase_sigma = 0.0;      // stationary std of the residual phase, rad
    double phase_corr_len = 500.0; // correlation length of the phase process, symbols
    double phase_mean = 0.0;       // bulk phase the process reverts to, rad

    void validate() const {
        if (!(tau > 0.0 && tau <= 1.0)) throw DomainError("ChannelParams: tau must be in (0, 1]");
        if (!(xi_in >= 0.0)) throw DomainError("ChannelParams: xi_in must be >= 0");
        if (!(phase_sigma >= 0.0)) throw DomainError("ChannelParams: phase_sigma must be >= 0");
        if (!(phase_corr_len > 0.0)) throw DomainError("ChannelParams: phase_corr_len must be > 0");
        if (!std::isfinite(phase_mean)) throw DomainError("ChannelParams: phase_mean must be finite");
    }
};

struct RelayParams {
    double eta = 1.0;           // relay quantum efficiency, (0, 1]
    double nu_el = 0.0;         // electronic noise per quadrature, SNU
    double imbalance = 0.0;     // beamsplitter transmittance minus 1/2
    double detector_gain = 1.0; // raw detector units per √SNU

    void validate() const {
        if (!(eta > 0.0 && eta <= 1.0)) throw DomainError("RelayParams: eta must be in (0, 1]");
        if (!(nu_el >= 0.0)) throw DomainError("RelayParams: nu_el must be >= 0");
        if (!(std::abs(imbalance) <= 0.05)) throw DomainError("RelayParams: |imbalance| must be <= 0.05");
        if (!(detector_gain > 0.0 && std::isfinite(detector_gain))) throw DomainError("RelayParams: detector_gain must be > 0");
    }
};

struct CalibrationRecord {
    double vacuum_variance_raw = 0.0;     // LO on, signal blocked
    double electronic_variance_raw = 0.0; // LO off
    double snu_scale = 0.0;               // SNU per raw variance unit
    std::size_t n_samples = 0;

    /// Electronic noise expressed in SNU; it stays inside the calibrated data.
    double electronic_noise_snu() const { return electronic_variance_raw * snu_scale; }
};

namespace detail {
inline void fill_complex_gaussian(std::span<QuadSymbol> out, double variance, Engine& eng) {
    if (variance == 0.0) {
        std::fill(out.begin(), out.end(), QuadSymbol{});
        return;
    }
    std::normal_distribution<double> n(0.0, std::sqrt(variance));
    for (auto& s : out) {
        const double x = n(eng);
        s = QuadSymbol(x, n(eng));
    }
}
}  // namespace detail

/// n i.i.d. symbols with x, p ~ N(0, v_mod).
inline Symbols draw_symbols(std::size_t n, double v_mod, std::uint64_t seed) {
    if (n == 0) throw DomainError("draw_symbols: n must be >= 1");
    if (!(v_mod >= 0.0)) throw DomainError("draw_symbols: v_mod must be >= 0");
    Symbols out(n);
    Engine eng(seed);
    detail::fill_complex_gaussian(out, v_mod, eng);
    return out;
}

/// Ornstein-Uhlenbeck phase: stationary N(mean, sigma²), correlation exp(-|k|/corr_len).
inline std::vector<double> ou_phase(std::size_t n, double sigma, double corr_len, double mean, std::uint64_t seed) {
    if (!(sigma >= 0.0) || !(corr_len > 0.0)) throw DomainError("ou_phase: invalid parameters");
    std::vector<double> theta(n, mean);
    if (sigma == 0.0 || n == 0) return theta;
    Engine eng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    const double a = std::exp(-1.0 / corr_len);
    const double drive = sigma * std::sqrt(1.0 - a * a);
    double dev = sigma * z(eng);
    for (std::size_t k = 0; k < n; ++k) {
        theta[k] = mean + dev;
        dev = a * dev + drive * z(eng);
    }
    return theta;
}

struct ChannelOutput {
    Symbols symbols;
    std::vector<double> phase;  // applied phase per symbol
};

/// α -> √τ·α·e^{iθ_k} + n_k, with n_k of per-quadrature variance τ·ξ_in.
inline ChannelOutput propagate_channel_traced(std::span<const QuadSymbol> in, const ChannelParams& p, std::uint64_t seed) {
    p.validate();
    ChannelOutput out;
    out.phase = ou_phase(in.size(), p.phase_sigma, p.phase_corr_len, p.phase_mean, sub_seed(seed, 0));
    out.symbols.resize(in.size());
    Engine eng(sub_seed(seed, 1));
    detail::fill_complex_gaussian(out.symbols, p.tau * p.xi_in, eng);
    const double amp = std::sqrt(p.tau);
    for (std::size_t k = 0; k < in.size(); ++k)
        out.symbols[k] += amp * in[k] * std::polar(1.0, out.phase[k]);
    return out;
}

inline Symbols propagate_channel(std::span<const QuadSymbol> in, const ChannelParams& p, std::uint64_t seed) {
    return propagate_channel_traced(in, p, seed).symbols;
}

/// Same channel applied to an oversampled waveform. The phase process is drawn
/// at the symbol rate from the same seed as propagate_channel and linearly
/// interpolated between symbol centres (symbol m is centred on sample
/// m·sps + centre_offset). Noise is white per sample.
inline Symbols propagate_waveform(std::span<const QuadSymbol> samples, const ChannelParams& p, std::size_t n_symbols,
                                  std::size_t sps, std::size_t centre_offset, std::uint64_t seed) {
    p.validate();
    if (sps == 0 || n_symbols == 0) throw DomainError("propagate_waveform: sps and n_symbols must be positive");
    const auto theta = ou_phase(n_symbols, p.phase_sigma, p.phase_corr_len, p.phase_mean, sub_seed(seed, 0));
    Symbols out(samples.size());
    Engine eng(sub_seed(seed, 2));
    detail::fill_complex_gaussian(out, p.tau * p.xi_in, eng);
    const double amp = std::sqrt(p.tau);
    const double last = static_cast<double>(n_symbols - 1);
    for (std::size_t k = 0; k < samples.size(); ++k) {
        double u = (static_cast<double>(k) - static_cast<double>(centre_offset)) / static_cast<double>(sps);
        u = std::clamp(u, 0.0, last);
        const auto i0 = static_cast<std::size_t>(u);
        const std::size_t i1 = std::min(i0 + 1, n_symbols - 1);
        const double f = u - static_cast<double>(i0);
        const double th = (1.0 - f) * theta[i0] + f * theta[i1];
        out[k] += amp * samples[k] * std::polar(1.0, th);
    }
    return out;
}

/// Continuous-variable Bell measurement at the relay, output in SNU:
///   γ_x = √η(√t·x_A − √(1−t)·x_B) + n_x,  γ_p = √η(√(1−t)·p_A + √t·p_B) + n_p
/// with t = 1/2 + imbalance and n of per-quadrature variance 1 + ν_el.
/// Works on symbol sequences and on sample streams alike.
inline Symbols relay_bsm(std::span<const QuadSymbol> a, std::span<const QuadSymbol> b, const RelayParams& r, std::uint64_t seed) {
    r.validate();
    if (a.size() != b.size()) throw DomainError("relay_bsm: input lengths differ");
    const double t = 0.5 + r.imbalance;
    const double ga = std::sqrt(r.eta * t), gb = std::sqrt(r.eta * (1.0 - t));
    Symbols out(a.size());
    Engine eng(seed);
    detail::fill_complex_gaussian(out, 1.0 + r.nu_el, eng);
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double gx = ga * a[k].real() - gb * b[k].real();
        const double gp = gb * a[k].imag() + ga * b[k].imag();
        out[k] += QuadSymbol(gx, gp);
    }
    return out;
}

/// Convert SNU-referred detector output to raw detector units.
inline Symbols to_raw(std::span<const QuadSymbol> snu, double detector_gain) {
    Symbols out(snu.begin(), snu.end());
    for (auto& s : out) s *= detector_gain;
    return out;
}

namespace detail {
inline double mean_square(std::span<const QuadSymbol> v) {
    double acc = 0.0;
    for (const auto& s : v) acc += std::norm(s);
    return acc / (2.0 * static_cast<double>(v.size()));
}
}  // namespace detail

/// One-time shot-noise calibration: records with the signal path blocked
/// (vacuum + electronic) and with the LO off (electronic only). The SNU scale
/// makes vacuum-minus-electronic equal to one; electronic noise is not removed.
inline CalibrationRecord calibrate_shot_noise(const RelayParams& r, std::size_t n, std::uint64_t seed) {
    r.validate();
    if (n < 100000) throw DomainError("calibrate_shot_noise: need at least 1e5 samples");
    Symbols rec(n);
    Engine eng(seed);
    const double g2 = r.detector_gain * r.detector_gain;
    CalibrationRecord c;
    c.n_samples = n;
    detail::fill_complex_gaussian(rec, g2 * (1.0 + r.nu_el), eng);
    c.vacuum_variance_raw = detail::mean_square(rec);
    detail::fill_complex_gaussian(rec, g2 * r.nu_el, eng);
    c.electronic_variance_raw = detail::mean_square(rec);
    const double shot = c.vacuum_variance_raw - c.electronic_variance_raw;
    if (!(shot > 0.0)) throw NumericalError("calibrate_shot_noise: vacuum variance not above electronic variance");
    c.snu_scale = 1.0 / shot;
    return c;
}

inline Symbols apply_calibration(std::span<const QuadSymbol> raw, const CalibrationRecord& c) {
    if (!(c.snu_scale > 0.0)) throw DomainError("apply_calibration: invalid calibration record");
    Symbols out(raw.begin(), raw.end());
    const double s = std::sqrt(c.snu_scale);
    for (auto& v : out) v *= s;
    return out;
}

}  // namespace cvmdi::channel
