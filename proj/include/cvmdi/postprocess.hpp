#pragma once

// Post-processing once the relay outcome γ is public: quadrature displacement,
// channel estimation, worst-case bounds and privacy amplification.
//
// Excess noise is reported referred to the relay input, before the trusted
// efficiency η and the 50:50 split: a residual γ variance of 1 + (η/2)·ξ
// reads as ξ. A channel-input noise ξ_in on link k then contributes τ_k·ξ_in.

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cvmdi/channel.hpp"
#include "cvmdi/error.hpp"
#include "cvmdi/random.hpp"
#include "cvmdi/stats.hpp"

namespace cvmdi::postprocess {

using cplx = std::complex<double>;
using channel::Symbols;

struct DisplacementCoeffs {
    double rho = 0.0;        // γ_x - ρ·x_B
    double beta_disp = 0.0;  // γ_p + β·p_B
    double rescale = 1.0;    // gain applied after displacement
};

struct Displacement {
    Symbols inferred;  // u = u_x + i·u_p
    DisplacementCoeffs coeffs;
};

namespace detail {
struct Split {
    std::vector<double> x, p;
};
inline Split split(std::span<const cplx> v) {
    Split s{std::vector<double>(v.size()), std::vector<double>(v.size())};
    for (std::size_t i = 0; i < v.size(); ++i) {
        s.x[i] = v[i].real();
        s.p[i] = v[i].imag();
    }
    return s;
}
}  // namespace detail

/// Bob's inference of Alice's symbols from γ. Without coefficients, ρ and β
/// are regressed so that Bob's own symbols cancel, and the rescale brings
/// the mean quadrature variance of u to `target_variance` (Bob's symbol
/// variance when not given).
inline Displacement displacement_infer(std::span<const cplx> gamma, std::span<const cplx> bob,
                                       const std::optional<DisplacementCoeffs>& coeffs = std::nullopt,
                                       std::optional<double> target_variance = std::nullopt) {
    if (gamma.size() != bob.size() || gamma.empty()) throw DomainError("displacement_infer: lengths must match and be non-zero");
    const auto g = detail::split(gamma);
    const auto b = detail::split(bob);
    Displacement d;
    if (coeffs) {
        if (!(coeffs->rescale > 0.0) || !std::isfinite(coeffs->rho) || !std::isfinite(coeffs->beta_disp))
            throw DomainError("displacement_infer: invalid coefficients");
        d.coeffs = *coeffs;
    } else {
        const double vbx = stats::variance(b.x), vbp = stats::variance(b.p);
        if (!(vbx > 0.0 && vbp > 0.0)) throw DomainError("displacement_infer: Bob's symbols have zero variance");
        d.coeffs.rho = stats::covariance(g.x, b.x) / vbx;
        d.coeffs.beta_disp = -stats::covariance(g.p, b.p) / vbp;
        d.coeffs.rescale = 1.0;
    }
    d.inferred.resize(gamma.size());
    for (std::size_t i = 0; i < gamma.size(); ++i)
        d.inferred[i] = cplx(g.x[i] - d.coeffs.rho * b.x[i], g.p[i] + d.coeffs.beta_disp * b.p[i]);
    if (!coeffs) {
        const auto u = detail::split(d.inferred);
        const double vu = 0.5 * (stats::variance(u.x) + stats::variance(u.p));
        const double target = target_variance.value_or(0.5 * (stats::variance(b.x) + stats::variance(b.p)));
        if (!(vu > 0.0 && target > 0.0)) throw DomainError("displacement_infer: degenerate variances");
        d.coeffs.rescale = std::sqrt(target / vu);
    }
    for (auto& u : d.inferred) u *= d.coeffs.rescale;
    return d;
}

struct EstimationResult {
    double tau_a_hat = 0.0;
    double tau_b_hat = 0.0;
    double xi_hat_relay = 0.0;  // SNU, relay-input referred, electronic noise included
    std::vector<double> frame_xi;
    std::vector<double> frame_tau_a;
    std::vector<double> frame_tau_b;
    std::vector<std::size_t> frame_n;
    double tau_a_wc = 0.0;
    double tau_wc = 0.0;  // worst case of τ_B
    double xi_wc = 0.0;
    double epsilon_pe = 0.0;
    bool bounds_set = false;
    std::size_t n_used = 0;
    double electronic_noise_snu = 0.0;  // from calibration, informational
    bool xi_negative = false;
};

/// Per-frame estimate from SNU-calibrated γ and phase-aligned symbols, using
/// E[γ_x | x_A, x_B] = √(ητ_A/2)·x_A - √(ητ_B/2)·x_B and the p analogue.
/// Both gains come from one joint least-squares fit per quadrature, so the
/// sample cross-covariance of the two parties' symbols does not leak into ξ̂.
inline EstimationResult estimate_channel(std::span<const cplx> alice, std::span<const cplx> bob, std::span<const cplx> gamma,
                                         const channel::CalibrationRecord* calib, double eta) {
    if (calib == nullptr || !(calib->snu_scale > 0.0)) throw ConfigError("estimate_channel: shot-noise calibration missing");
    if (!(eta > 0.0 && eta <= 1.0)) throw DomainError("estimate_channel: eta must be in (0, 1]");
    if (alice.size() != bob.size() || alice.size() != gamma.size()) throw DomainError("estimate_channel: lengths differ");
    if (alice.size() < 2) throw DomainError("estimate_channel: need at least two symbols");
    const auto a = detail::split(alice), b = detail::split(bob), g = detail::split(gamma);

    double tau_a = 0.0, tau_b = 0.0, resid = 0.0;
    const std::vector<double>* aq[2] = {&a.x, &a.p};
    const std::vector<double>* bq[2] = {&b.x, &b.p};
    const std::vector<double>* gq[2] = {&g.x, &g.p};
    for (int q = 0; q < 2; ++q) {
        const double va = stats::variance(*aq[q]), vb = stats::variance(*bq[q]);
        if (!(va > 0.0 && vb > 0.0)) throw DomainError("estimate_channel: symbols have zero variance");
        const double ca = stats::covariance(*gq[q], *aq[q]);
        const double cb = stats::covariance(*gq[q], *bq[q]);
        const double cab = stats::covariance(*aq[q], *bq[q]);
        const double det = va * vb - cab * cab;
        if (!(det > 0.0)) throw DomainError("estimate_channel: Alice's and Bob's symbols are collinear");
        const double ka = (vb * ca - cab * cb) / det;
        const double kb = (va * cb - cab * ca) / det;
        tau_a += 2.0 * ka * ka / eta;
        tau_b += 2.0 * kb * kb / eta;
        resid += stats::variance(*gq[q]) - ka * ca - kb * cb - 1.0;
    }
    EstimationResult r;
    r.tau_a_hat = tau_a / 2.0;
    r.tau_b_hat = tau_b / 2.0;
    r.xi_hat_relay = (2.0 / eta) * resid / 2.0;
    r.xi_negative = r.xi_hat_relay < 0.0;
    r.n_used = alice.size();
    r.frame_xi = {r.xi_hat_relay};
    r.frame_tau_a = {r.tau_a_hat};
    r.frame_tau_b = {r.tau_b_hat};
    r.frame_n = {r.n_used};
    r.electronic_noise_snu = calib->electronic_noise_snu();
    return r;
}

/// Pool per-frame results: symbol-weighted means, frame series concatenated.
inline EstimationResult merge_frames(std::span<const EstimationResult> frames) {
    if (frames.empty()) throw DomainError("merge_frames: no frames");
    EstimationResult r;
    double w = 0.0;
    for (const auto& f : frames) {
        const double n = static_cast<double>(f.n_used);
        r.tau_a_hat += n * f.tau_a_hat;
        r.tau_b_hat += n * f.tau_b_hat;
        r.xi_hat_relay += n * f.xi_hat_relay;
        w += n;
        r.frame_xi.insert(r.frame_xi.end(), f.frame_xi.begin(), f.frame_xi.end());
        r.frame_tau_a.insert(r.frame_tau_a.end(), f.frame_tau_a.begin(), f.frame_tau_a.end());
        r.frame_tau_b.insert(r.frame_tau_b.end(), f.frame_tau_b.begin(), f.frame_tau_b.end());
        r.frame_n.insert(r.frame_n.end(), f.frame_n.begin(), f.frame_n.end());
        r.n_used += f.n_used;
    }
    if (!(w > 0.0)) throw DomainError("merge_frames: frames contain no symbols");
    r.tau_a_hat /= w;
    r.tau_b_hat /= w;
    r.xi_hat_relay /= w;
    r.xi_negative = r.xi_hat_relay < 0.0;
    r.electronic_noise_snu = frames.front().electronic_noise_snu;
    return r;
}

/// Gaussian confidence bounds from frame-wise scatter:
/// ξ_wc = ξ̂ + z·s_ξ/√m, τ_wc = τ̂ - z·s_τ/√m with P(Z > z) = ε.
inline EstimationResult worst_case_bounds(EstimationResult est, double epsilon_pe, std::size_t m_frames) {
    if (!(epsilon_pe > 0.0 && epsilon_pe < 0.5)) throw DomainError("worst_case_bounds: epsilon_pe must be in (0, 0.5)");
    if (m_frames < 2) throw DomainError("worst_case_bounds: need at least two frames");
    const auto sd = [](const std::vector<double>& v) {
        stats::Moments m;
        for (double x : v) m.add(x);
        return m.stddev();
    };
    const double z = stats::normal_upper_quantile(epsilon_pe);
    const double k = z / std::sqrt(static_cast<double>(m_frames));
    est.xi_wc = std::max(0.0, est.xi_hat_relay + k * sd(est.frame_xi));
    est.tau_wc = std::max(0.0, est.tau_b_hat - k * sd(est.frame_tau_b));
    est.tau_a_wc = std::max(0.0, est.tau_a_hat - k * sd(est.frame_tau_a));
    est.epsilon_pe = epsilon_pe;
    est.bounds_set = true;
    return est;
}

/// Worst case equal to the point estimates, for runs too short to bound.
inline EstimationResult point_bounds(EstimationResult est, double epsilon_pe) {
    est.xi_wc = std::max(0.0, est.xi_hat_relay);
    est.tau_wc = est.tau_b_hat;
    est.tau_a_wc = est.tau_a_hat;
    est.epsilon_pe = epsilon_pe;
    est.bounds_set = true;
    return est;
}

// ---------------------------------------------------------------- privacy amplification

/// First row/column bits of the Toeplitz matrix: n_in + n_out - 1 seeded bits.
inline std::vector<std::uint8_t> toeplitz_seed_bits(std::uint64_t seed, std::size_t n_bits) {
    std::vector<std::uint8_t> bits(n_bits);
    Engine eng(seed);
    std::uint64_t word = 0;
    for (std::size_t i = 0; i < n_bits; ++i) {
        if (i % 64 == 0) word = eng();
        bits[i] = static_cast<std::uint8_t>((word >> (i % 64)) & 1U);
    }
    return bits;
}

/// Toeplitz hashing over GF(2): out[i] = ⊕_j T(i, j)·in[j] with
/// T(i, j) = r[i - j + n_in - 1].
inline std::vector<std::uint8_t> privacy_amplify(std::span<const std::uint8_t> bits, std::uint64_t seed, std::size_t out_len) {
    if (out_len > bits.size()) throw DomainError("privacy_amplify: output longer than input");
    if (out_len == 0) return {};
    const std::size_t n = bits.size();
    const auto r = toeplitz_seed_bits(seed, n + out_len - 1);
    std::vector<std::uint8_t> out(out_len, 0);
    for (std::size_t i = 0; i < out_len; ++i) {
        std::uint8_t acc = 0;
        for (std::size_t j = 0; j < n; ++j) acc ^= static_cast<std::uint8_t>(r[i + n - 1 - j] & (bits[j] & 1U));
        out[i] = acc;
    }
    return out;
}

}  // namespace cvmdi::postprocess
