#pragma once

// Baseband transmitter/receiver processing: RRC pulse shaping with an optional
// pilot tone, pilot removal, delay search, matched filtering, pilot phase
// tracking and covariance-maximizing phase alignment.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <span>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "cvmdi/channel.hpp"
#include "cvmdi/error.hpp"
#include "cvmdi/fft.hpp"

namespace cvmdi::dsp {

using cplx = std::complex<double>;
using channel::Symbols;

struct Waveform {
    std::vector<cplx> samples;
    double sample_rate = 1e9;
};

struct RrcSpec {
    double roll_off = 0.2;
    std::size_t span_symbols = 20;
    std::size_t samples_per_symbol = 50;

    void validate() const {
        if (!(roll_off > 0.0 && roll_off < 1.0)) throw ConfigError("RrcSpec: roll_off must be in (0, 1)");
        if (span_symbols == 0 || span_symbols % 2 != 0) throw ConfigError("RrcSpec: span_symbols must be even and positive");
        if (samples_per_symbol == 0) throw ConfigError("RrcSpec: samples_per_symbol must be positive");
    }
    std::size_t n_taps() const { return span_symbols * samples_per_symbol + 1; }
    /// Delay of one filter in samples.
    std::size_t group_delay() const { return span_symbols * samples_per_symbol / 2; }

    auto key() const { return std::tuple(roll_off, span_symbols, samples_per_symbol); }
};

struct PilotSpec {
    double freq = 15e6;
    double amplitude_ratio = 3.0;  // pilot amplitude over RMS symbol amplitude
};

struct PhaseTrace {
    std::vector<double> unwrapped_phase;
    double mean = 0.0;
    double std = 0.0;
    std::size_t decimation = 1;  // input samples per trace point
};

inline constexpr double kPi = std::numbers::pi;

// ---------------------------------------------------------------- filters

namespace detail {

inline double rrc_value(double t, double beta) {
    if (std::abs(t) < 1e-12) return 1.0 - beta + 4.0 * beta / kPi;
    if (std::abs(std::abs(t) - 1.0 / (4.0 * beta)) < 1e-9) {
        return beta / std::sqrt(2.0) *
               ((1.0 + 2.0 / kPi) * std::sin(kPi / (4.0 * beta)) + (1.0 - 2.0 / kPi) * std::cos(kPi / (4.0 * beta)));
    }
    const double num = std::sin(kPi * t * (1.0 - beta)) + 4.0 * beta * t * std::cos(kPi * t * (1.0 + beta));
    const double den = kPi * t * (1.0 - 16.0 * beta * beta * t * t);
    return num / den;
}

/// Autocorrelation of h at multiples of sps, minus the Nyquist target δ_m.
inline Eigen::VectorXd nyquist_residual(const Eigen::VectorXd& h, std::size_t sps, std::size_t span) {
    const auto L = static_cast<Eigen::Index>(h.size());
    Eigen::VectorXd c(static_cast<Eigen::Index>(span + 1));
    for (std::size_t m = 0; m <= span; ++m) {
        const auto s = static_cast<Eigen::Index>(m * sps);
        c(static_cast<Eigen::Index>(m)) = h.head(L - s).dot(h.tail(L - s)) - (m == 0 ? 1.0 : 0.0);
    }
    return c;
}

/// Truncating the RRC leaves ISI near 1e-3. Project the taps back onto the
/// exact Nyquist set with weighted minimum-norm Gauss-Newton steps, the weight
/// being stopband energy, so the spectral mask is preserved.
inline Eigen::VectorXd refine_nyquist(Eigen::VectorXd h, std::size_t sps, std::size_t span, double roll_off) {
    const auto L = h.size();
    const double f_stop = (1.0 + roll_off) / (2.0 * static_cast<double>(sps));
    const double lambda = 1e-5;
    Eigen::MatrixXd Q(L, L);
    for (Eigen::Index i = 0; i < L; ++i) {
        for (Eigen::Index j = 0; j < L; ++j) {
            const auto k = static_cast<double>(std::abs(i - j));
            Q(i, j) = (k == 0.0) ? 2.0 * (0.5 - f_stop) : -std::sin(2.0 * kPi * f_stop * k) / (kPi * k);
        }
        Q(i, i) += lambda;
    }
    const Eigen::LLT<Eigen::MatrixXd> llt(Q);
    const auto M = static_cast<Eigen::Index>(span + 1);
    Eigen::MatrixXd Jt(L, M);
    for (int it = 0; it < 100; ++it) {
        const Eigen::VectorXd c = nyquist_residual(h, sps, span);
        if (c.cwiseAbs().maxCoeff() < 1e-15) break;
        Jt.setZero();
        for (Eigen::Index m = 0; m < M; ++m) {
            const auto s = m * static_cast<Eigen::Index>(sps);
            Jt.col(m).head(L - s) += h.tail(L - s);
            Jt.col(m).tail(L - s) += h.head(L - s);
        }
        const Eigen::MatrixXd QJ = llt.solve(Jt);
        const Eigen::MatrixXd G = Jt.transpose() * QJ;
        h -= QJ * G.ldlt().solve(c);
        // The outermost lag constrains h_0·h_{L-1}; keep the symmetric branch.
        h = 0.5 * (h + h.reverse()).eval();
    }
    return h;
}

}  // namespace detail

/// Unit-energy RRC taps (span·sps + 1 of them), adjusted to be exactly Nyquist
/// at symbol spacing. Cached per spec.
inline const std::vector<double>& rrc_taps(const RrcSpec& spec) {
    spec.validate();
    static std::mutex mu;
    static std::map<std::tuple<double, std::size_t, std::size_t>, std::vector<double>> cache;
    std::lock_guard lock(mu);
    if (auto it = cache.find(spec.key()); it != cache.end()) return it->second;

    const auto L = static_cast<Eigen::Index>(spec.n_taps());
    const double half = static_cast<double>(spec.group_delay());
    const double sps = static_cast<double>(spec.samples_per_symbol);
    Eigen::VectorXd h(L);
    for (Eigen::Index i = 0; i < L; ++i) h(i) = detail::rrc_value((static_cast<double>(i) - half) / sps, spec.roll_off);
    h /= h.norm();
    if (L <= 4001) h = detail::refine_nyquist(h, spec.samples_per_symbol, spec.span_symbols, spec.roll_off);
    return cache.emplace(spec.key(), std::vector<double>(h.data(), h.data() + h.size())).first->second;
}

/// Kaiser-windowed-sinc low-pass with unit DC gain.
inline std::vector<double> design_lowpass(double cutoff_hz, double sample_rate, std::size_t n_taps, double kaiser_beta = 4.5) {
    if (!(cutoff_hz > 0.0 && cutoff_hz < sample_rate / 2.0)) throw ConfigError("design_lowpass: cutoff must be in (0, fs/2)");
    if (n_taps < 3 || n_taps % 2 == 0) throw ConfigError("design_lowpass: n_taps must be odd and >= 3");
    const double fc = cutoff_hz / sample_rate;
    const double centre = static_cast<double>(n_taps - 1) / 2.0;
    const double i0b = std::cyl_bessel_i(0.0, kaiser_beta);
    std::vector<double> h(n_taps);
    double sum = 0.0;
    for (std::size_t n = 0; n < n_taps; ++n) {
        const double k = static_cast<double>(n) - centre;
        const double sinc = (k == 0.0) ? 2.0 * fc : std::sin(2.0 * kPi * fc * k) / (kPi * k);
        const double r = k / centre;
        const double w = std::cyl_bessel_i(0.0, kaiser_beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0b;
        h[n] = sinc * w;
        sum += h[n];
    }
    for (auto& v : h) v /= sum;
    return h;
}

/// Zero-phase FIR filtering: output aligned with the input, same length.
inline Waveform filter_zero_phase(const Waveform& w, std::span<const double> taps) {
    const std::size_t delay = (taps.size() - 1) / 2;
    auto full = fft::convolve(w.samples, taps);
    Waveform out{std::vector<cplx>(w.samples.size()), w.sample_rate};
    for (std::size_t i = 0; i < out.samples.size(); ++i) out.samples[i] = full[i + delay];
    return out;
}

// ---------------------------------------------------------------- transmitter

/// Pulse-shaped baseband: symbol m is centred on sample m·sps + group_delay;
/// output length n·sps + span·sps. The pilot e^{i2πft} is added over the
/// whole record.
inline Waveform modulate_waveform(std::span<const cplx> symbols, const RrcSpec& rrc,
                                  const std::optional<PilotSpec>& pilot = std::nullopt, double sample_rate = 1e9) {
    if (symbols.empty()) throw DomainError("modulate_waveform: no symbols");
    const auto& h = rrc_taps(rrc);
    const std::size_t sps = rrc.samples_per_symbol;
    Waveform w{std::vector<cplx>(symbols.size() * sps + rrc.span_symbols * sps), sample_rate};
    for (std::size_t m = 0; m < symbols.size(); ++m) {
        const cplx a = symbols[m];
        if (a == cplx{}) continue;
        cplx* out = w.samples.data() + m * sps;
        for (std::size_t i = 0; i < h.size(); ++i) out[i] += a * h[i];
    }
    if (pilot) {
        const double symbol_rate = sample_rate / static_cast<double>(sps);
        const double band_edge = (1.0 + rrc.roll_off) * symbol_rate / 2.0;
        if (!(pilot->freq < sample_rate / 2.0)) throw ConfigError("modulate_waveform: pilot above Nyquist");
        if (!(pilot->freq > band_edge)) throw ConfigError("modulate_waveform: pilot inside the signal band");
        if (!(pilot->amplitude_ratio > 0.0)) throw ConfigError("modulate_waveform: pilot amplitude ratio must be > 0");
        double power = 0.0;
        for (const auto& s : symbols) power += std::norm(s);
        const double amp = pilot->amplitude_ratio * std::sqrt(power / static_cast<double>(symbols.size()));
        const double dphi = 2.0 * kPi * pilot->freq / sample_rate;
        for (std::size_t k = 0; k < w.samples.size(); ++k)
            w.samples[k] += std::polar(amp, std::fmod(dphi * static_cast<double>(k), 2.0 * kPi));
    }
    return w;
}

// ---------------------------------------------------------------- receiver

/// Linear-phase low-pass between the signal band edge and the pilot. Group
/// delay is removed, so sample indices are unchanged.
inline Waveform lowpass_remove_pilot(const Waveform& w, double cutoff_hz, double band_edge_hz = 12e6, double pilot_hz = 15e6,
                                     std::size_t n_taps = 1001) {
    if (!(cutoff_hz > band_edge_hz && cutoff_hz < pilot_hz))
        throw ConfigError("lowpass_remove_pilot: cutoff must lie between the band edge and the pilot");
    const auto taps = design_lowpass(cutoff_hz, w.sample_rate, n_taps);
    return filter_zero_phase(w, taps);
}

/// Integer delay d ≥ 0 maximizing |Σ conj(tx[n])·rx[n+d]|, searched up to
/// max_lag using the first `window` samples of tx.
inline std::size_t estimate_delay(std::span<const cplx> tx, std::span<const cplx> rx, std::size_t max_lag,
                                  std::size_t window = std::size_t{1} << 18) {
    const std::size_t n = std::min({tx.size(), window, rx.size() > max_lag ? rx.size() - max_lag : std::size_t{0}});
    if (n < 10000) throw DomainError("estimate_delay: overlap must be at least 1e4 samples");
    const auto c = fft::cross_correlate(tx.first(n), rx.first(std::min(rx.size(), n + max_lag)), max_lag);
    std::size_t best = 0;
    double peak = 0.0;
    for (std::size_t d = 0; d < c.size(); ++d) {
        if (std::abs(c[d]) > peak) {
            peak = std::abs(c[d]);
            best = d;
        }
    }
    // Floor: lags away from the main lobe.
    const std::size_t excl = std::max<std::size_t>(16, c.size() / 8);
    double sq = 0.0;
    std::size_t count = 0;
    for (std::size_t d = 0; d < c.size(); ++d) {
        if (d + excl > best && d < best + excl) continue;
        sq += std::norm(c[d]);
        ++count;
    }
    const double floor_rms = count ? std::sqrt(sq / static_cast<double>(count)) : 0.0;
    if (peak == 0.0 || (count > 0 && !(peak >= 5.0 * floor_rms))) throw SyncError("estimate_delay: no significant correlation peak");
    return best;
}

/// Matched filter and decimation: symbol m is read at sample
/// delay + m·sps + 2·group_delay. A unit symbol returns amplitude 1.
inline Symbols demodulate_symbols(const Waveform& rx, const RrcSpec& rrc, std::size_t delay, std::size_t n_symbols) {
    const auto& h = rrc_taps(rrc);
    const std::size_t sps = rrc.samples_per_symbol;
    const std::size_t G = h.size() - 1;
    if (n_symbols == 0) return {};
    if (delay + (n_symbols - 1) * sps + G >= rx.samples.size())
        throw DomainError("demodulate_symbols: not enough samples for the requested symbols");
    Symbols out(n_symbols);
    for (std::size_t m = 0; m < n_symbols; ++m) {
        const cplx* seg = rx.samples.data() + delay + m * sps;  // rx[j - i] for i = G..0
        cplx acc{};
        for (std::size_t i = 0; i <= G; ++i) acc += h[G - i] * seg[i];
        out[m] = acc;
    }
    return out;
}

inline std::vector<double> unwrap(std::span<const double> phase) {
    std::vector<double> out(phase.begin(), phase.end());
    double offset = 0.0;
    for (std::size_t i = 1; i < out.size(); ++i) {
        const double d = phase[i] - phase[i - 1];
        if (d > kPi) offset -= 2.0 * kPi * std::ceil((d - kPi) / (2.0 * kPi));
        else if (d < -kPi) offset += 2.0 * kPi * std::ceil((-d - kPi) / (2.0 * kPi));
        out[i] = phase[i] + offset;
    }
    return out;
}

/// Pilot phase: the spectrum within ±bandwidth of the pilot is shifted to DC
/// and inverse transformed at a reduced rate, then the angle is unwrapped.
/// `guard` samples at each end are excluded from the statistics.
inline PhaseTrace pilot_phase_trace(const Waveform& rx, const PilotSpec& pilot, double bandwidth_hz = 1e6,
                                    std::size_t guard = 5000) {
    const double fs = rx.sample_rate;
    if (!(pilot.freq > -fs / 2.0 && pilot.freq < fs / 2.0)) throw ConfigError("pilot_phase_trace: pilot above Nyquist");
    if (!(bandwidth_hz > 0.0)) throw ConfigError("pilot_phase_trace: bandwidth must be positive");
    const std::size_t n = rx.samples.size();
    if (n <= 2 * guard + 64) throw DomainError("pilot_phase_trace: record too short");

    const std::size_t N = fft::next_pow2(n);
    fft::cvec padded(N, cplx{});
    std::copy(rx.samples.begin(), rx.samples.end(), padded.begin());
    const fft::cvec X = fft::forward(padded);
    padded = {};

    const double df = fs / static_cast<double>(N);
    const auto half_bins = static_cast<long long>(std::floor(bandwidth_hz / df));
    const auto kf = static_cast<long long>(std::llround(pilot.freq / df));
    const std::size_t M = std::max<std::size_t>(64, fft::next_pow2(static_cast<std::size_t>(8 * half_bins + 8)));
    if (M > N) throw ConfigError("pilot_phase_trace: bandwidth too wide for the record");
    const std::size_t D = N / M;

    const auto wrap = [](long long k, std::size_t len) {
        const auto L = static_cast<long long>(len);
        return static_cast<std::size_t>(((k % L) + L) % L);
    };

    // Pilot detection: strongest in-band bin against the median bin power.
    std::vector<double> power(N);
    for (std::size_t i = 0; i < N; ++i) power[i] = std::norm(X[i]);
    double peak = 0.0;
    for (long long k = -half_bins; k <= half_bins; ++k) peak = std::max(peak, power[wrap(kf + k, N)]);
    auto mid = power.begin() + static_cast<std::ptrdiff_t>(N / 2);
    std::nth_element(power.begin(), mid, power.end());
    const double median = *mid;
    power = {};
    if (!(peak > 0.0) || !(peak > 100.0 * median)) throw SyncError("pilot_phase_trace: pilot lost");

    // Flat over the inner half of the band with a cosine roll-off outside it,
    // which keeps time-domain ringing short.
    fft::cvec Y(M, cplx{});
    for (long long k = -half_bins; k <= half_bins; ++k) {
        const double r = std::abs(static_cast<double>(k)) / static_cast<double>(half_bins + 1);
        const double w = r <= 0.5 ? 1.0 : std::pow(std::cos(kPi * (r - 0.5)), 2);
        Y[wrap(k, M)] = w * X[wrap(kf + k, N)];
    }
    const fft::cvec y = fft::inverse(Y);

    // Residual offset between the pilot and the centre bin shows up as a ramp.
    const double f_off = pilot.freq - static_cast<double>(kf) * df;
    const std::size_t first = (guard + D - 1) / D;
    const std::size_t last = (n - guard) / D;  // exclusive
    std::vector<double> raw;
    raw.reserve(last - first);
    for (std::size_t j = first; j < last; ++j) {
        const double t = static_cast<double>(j * D) / fs;
        raw.push_back(std::arg(y[j]) - std::fmod(2.0 * kPi * f_off * t, 2.0 * kPi));
    }
    PhaseTrace tr;
    tr.decimation = D;
    tr.unwrapped_phase = unwrap(raw);
    double s = 0.0, s2 = 0.0;
    for (double v : tr.unwrapped_phase) s += v;
    tr.mean = s / static_cast<double>(tr.unwrapped_phase.size());
    for (double v : tr.unwrapped_phase) s2 += (v - tr.mean) * (v - tr.mean);
    tr.std = std::sqrt(s2 / static_cast<double>(tr.unwrapped_phase.size()));
    return tr;
}

// ---------------------------------------------------------------- alignment

namespace detail {
inline cplx complex_covariance(std::span<const cplx> a, std::span<const cplx> ref) {
    cplx ma{}, mr{};
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mr += ref[i];
    }
    const double n = static_cast<double>(a.size());
    ma /= n;
    mr /= n;
    cplx c{};
    for (std::size_t i = 0; i < a.size(); ++i) c += (a[i] - ma) * std::conj(ref[i] - mr);
    return c / n;
}
}  // namespace detail

/// Re Cov(α·e^{iθ}, γ), summed over both quadratures.
inline double aligned_covariance(std::span<const cplx> symbols, std::span<const cplx> reference, double theta) {
    return (std::polar(1.0, theta) * detail::complex_covariance(symbols, reference)).real();
}

struct Alignment {
    double theta = 0.0;  // in (-π, π]
    Symbols rotated;
    double covariance = 0.0;
};

/// Rotation maximizing the in-phase covariance with the reference. Since
/// Re(e^{iθ}c) peaks at θ = -arg c, no search is needed.
inline Alignment phase_align(std::span<const cplx> symbols, std::span<const cplx> reference) {
    if (symbols.size() != reference.size()) throw DomainError("phase_align: lengths differ");
    if (symbols.size() < 1000) throw DomainError("phase_align: need at least 1e3 symbols");
    const cplx c = detail::complex_covariance(symbols, reference);
    double ps = 0.0, pr = 0.0;
    for (std::size_t i = 0; i < symbols.size(); ++i) {
        ps += std::norm(symbols[i]);
        pr += std::norm(reference[i]);
    }
    const double n = static_cast<double>(symbols.size());
    const double scale = std::sqrt((ps / n) * (pr / n));
    if (!(scale > 0.0) || !(std::abs(c) > 5.0 * scale / std::sqrt(n)))
        throw SyncError("phase_align: symbols and reference are uncorrelated");
    Alignment a;
    a.theta = -std::arg(c);
    if (a.theta <= -kPi) a.theta += 2.0 * kPi;
    const cplx rot = std::polar(1.0, a.theta);
    a.rotated.resize(symbols.size());
    for (std::size_t i = 0; i < symbols.size(); ++i) a.rotated[i] = symbols[i] * rot;
    a.covariance = std::abs(c);
    return a;
}

/// Excess noise from a residual phase of std σ on Gaussian modulation V.
inline double phase_noise_to_excess(double sigma, double v_mod) {
    if (!(sigma >= 0.0) || !(v_mod >= 0.0)) throw DomainError("phase_noise_to_excess: arguments must be >= 0");
    return 2.0 * v_mod * (1.0 - std::exp(-sigma * sigma / 2.0));
}

}  // namespace cvmdi::dsp
