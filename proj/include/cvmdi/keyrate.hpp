#pragma once

// Entanglement-based model and collective-attack key rates.
//
// Each party holds one arm of a TMSV(V + 1); the travelling arms cross their
// channels, the relay efficiency η (a trusted beamsplitter with vacuum ancillas
// fA, fB unless trusted_eta is false), the 50:50 beamsplitter and homodyne
// detection of x on one output and p on the other. Noise added at the
// detectors is untrusted. Alice's variable is the key reference.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "cvmdi/error.hpp"
#include "cvmdi/gaussian.hpp"
#include "cvmdi/postprocess.hpp"

namespace cvmdi::keyrate {

using gaussian::CovMatrix;

struct EbModel {
    double v_a = 6.5;
    double v_b = 6.5;
    double tau_a = 1.0;
    double tau_b = 1.0;
    double xi_in_a = 0.0;
    double xi_in_b = 0.0;
    double eta = 1.0;
    double nu_el = 0.0;  // untrusted detector noise, SNU per quadrature
    bool trusted_eta = true;

    void validate() const {
        if (!(v_a >= 0.0 && v_b >= 0.0)) throw DomainError("EbModel: modulation variances must be >= 0");
        if (!(tau_a > 0.0 && tau_a <= 1.0 && tau_b > 0.0 && tau_b <= 1.0)) throw DomainError("EbModel: tau must be in (0, 1]");
        if (!(xi_in_a >= 0.0 && xi_in_b >= 0.0)) throw DomainError("EbModel: excess noise must be >= 0");
        if (!(eta > 0.0 && eta <= 1.0)) throw DomainError("EbModel: eta must be in (0, 1]");
        if (!(nu_el >= 0.0)) throw DomainError("EbModel: nu_el must be >= 0");
    }

    /// Model whose only noise is a relay-input-referred excess ξ placed at the
    /// detectors. Transmissivities are clipped into (0, 1].
    static EbModel from_relay_excess(double v_a, double v_b, double tau_a, double tau_b, double eta, double xi_relay,
                                     bool trusted_eta = true) {
        const auto clip = [](double t) { return std::clamp(t, 1e-9, 1.0); };
        EbModel m{v_a, v_b, clip(tau_a), clip(tau_b), 0.0, 0.0, eta, 0.5 * eta * std::max(0.0, xi_relay), trusted_eta};
        m.validate();
        return m;
    }

    /// Relay-input-referred excess noise this model produces.
    double xi_relay() const { return tau_a * xi_in_a + tau_b * xi_in_b + 2.0 * nu_el / eta; }
};

/// Post-measurement state. Modes: a, b, then fA, fB when η is trusted.
inline CovMatrix build_eb_state(const EbModel& m) {
    using namespace gaussian;
    m.validate();
    CovMatrix s = direct_sum(tmsv_cm(m.v_a + 1.0), tmsv_cm(m.v_b + 1.0));  // a, A', b, B'
    if (m.trusted_eta) s = direct_sum(s, CovMatrix::vacuum(2));            // fA, fB
    s = apply_loss_noise(s, 1, m.tau_a, m.xi_in_a);
    s = apply_loss_noise(s, 3, m.tau_b, m.xi_in_b);
    if (m.trusted_eta) {
        s = apply_beamsplitter(s, 1, 4, m.eta);
        s = apply_beamsplitter(s, 3, 5, m.eta);
    } else {
        s = apply_loss_noise(s, 1, m.eta, 0.0);
        s = apply_loss_noise(s, 3, m.eta, 0.0);
    }
    s = apply_beamsplitter(s, 1, 3, 0.5);  // mode 1: (A'+B')/√2, mode 3: (B'-A')/√2
    s = add_noise(s, 1, m.nu_el);
    s = add_noise(s, 3, m.nu_el);
    s = condition_on_homodyne(s, 3, Quadrature::X);
    return condition_on_homodyne(s, 1, Quadrature::P);
}

/// Conditional 2-mode state of the retained modes (a, b).
inline CovMatrix build_eb_cm(const EbModel& m) { return gaussian::reduce(build_eb_state(m), {0, 1}); }

/// Alice-Bob information per use, both quadratures: Alice's symbol
/// corresponds to heterodyne of a, Bob's estimate to heterodyne of b.
inline double mutual_information(const CovMatrix& cm) {
    if (cm.n_modes() < 2) throw DomainError("mutual_information: need a two-mode state");
    const CovMatrix ab = cm.n_modes() == 2 ? cm : gaussian::reduce(cm, {0, 1});
    const CovMatrix a_given_b = gaussian::condition_on_heterodyne(ab, 1);
    double i = 0.0;
    for (Eigen::Index q = 0; q < 2; ++q) i += 0.5 * std::log2((ab(q, q) + 1.0) / (a_given_b(q, q) + 1.0));
    return std::max(0.0, i);
}

enum class Direction { Alice, Bob };

/// χ = S(state) - S(state | heterodyne of the reference mode). Modes beyond
/// (a, b) are trusted and kept in both terms.
inline double holevo_bound(const CovMatrix& cm, Direction ref = Direction::Alice) {
    if (cm.n_modes() < 2) throw DomainError("holevo_bound: need at least two modes");
    const std::size_t mode = ref == Direction::Alice ? 0 : 1;
    const double chi = gaussian::entropy(cm) - gaussian::entropy(gaussian::condition_on_heterodyne(cm, mode));
    return std::max(0.0, chi);
}

struct KeyRateReport {
    double i_ab = 0.0;
    double chi = 0.0;
    double rate_asym_signed = 0.0;
    double rate_asym = 0.0;  // clamped at 0
    double rate_finite_signed = 0.0;
    double rate_finite = 0.0;  // clamped at 0
    double throughput = 0.0;   // bit/s, rate_finite·B (already net of fer)
    double fer = 0.0;
    double beta_ir = 1.0;
    double symbol_rate = 0.0;
    double chi_worst = 0.0;
    double correction = 0.0;
};

/// Secret-key throughput in bit/s.
inline double throughput(double rate_per_use, double symbol_rate) { return rate_per_use * symbol_rate; }

inline KeyRateReport rate_asymptotic(const EbModel& m, double beta_ir, double symbol_rate = 20e6) {
    if (!(beta_ir > 0.0 && beta_ir <= 1.0)) throw DomainError("rate_asymptotic: beta_ir must be in (0, 1]");
    const CovMatrix s = build_eb_state(m);
    KeyRateReport r;
    r.i_ab = mutual_information(s);
    r.chi = holevo_bound(s, Direction::Alice);
    r.chi_worst = r.chi;
    r.beta_ir = beta_ir;
    r.symbol_rate = symbol_rate;
    r.rate_asym_signed = beta_ir * r.i_ab - r.chi;
    r.rate_asym = std::max(0.0, r.rate_asym_signed);
    r.rate_finite_signed = r.rate_asym_signed;
    r.rate_finite = r.rate_asym;
    r.throughput = throughput(r.rate_finite, symbol_rate);
    return r;
}

struct FiniteSizeOptions {
    std::size_t n_block = 4'000'000;
    double beta_ir = 0.97;
    double fer = 0.0;
    double symbol_rate = 20e6;
    double correction_c = 0.0;  // Δ = c·√(log2(2/ε)/n)
};

/// `base` supplies modulation variances, η and the trust setting; channel
/// parameters come from the estimate. I_AB uses point estimates, χ the
/// worst case. Disclosed frames yield no key: a positive rate scales by
/// (1 - fer), a negative one does not improve.
inline KeyRateReport rate_finite(const EbModel& base, const postprocess::EstimationResult& est, const FiniteSizeOptions& o) {
    if (o.n_block < 1000) throw DomainError("rate_finite: n_block must be >= 1e3");
    if (!est.bounds_set) throw DomainError("rate_finite: worst-case bounds missing");
    if (!(o.fer >= 0.0 && o.fer <= 1.0)) throw DomainError("rate_finite: fer must be in [0, 1]");
    if (!(o.correction_c >= 0.0)) throw DomainError("rate_finite: correction must be >= 0");
    const auto point = EbModel::from_relay_excess(base.v_a, base.v_b, est.tau_a_hat, est.tau_b_hat, base.eta, est.xi_hat_relay,
                                                  base.trusted_eta);
    KeyRateReport r = rate_asymptotic(point, o.beta_ir, o.symbol_rate);
    // χ need not fall or rise monotonically with τ, so take the largest value
    // over the corners of the transmissivity interval at the worst-case noise.
    r.chi_worst = 0.0;
    for (double ta : {est.tau_a_hat, est.tau_a_wc})
        for (double tb : {est.tau_b_hat, est.tau_wc}) {
            const auto worst = EbModel::from_relay_excess(base.v_a, base.v_b, ta, tb, base.eta, est.xi_wc, base.trusted_eta);
            r.chi_worst = std::max(r.chi_worst, holevo_bound(build_eb_state(worst), Direction::Alice));
        }
    r.fer = o.fer;
    r.correction = o.correction_c * std::sqrt(std::log2(2.0 / est.epsilon_pe) / static_cast<double>(o.n_block));
    const double s = o.beta_ir * r.i_ab - r.chi_worst;
    r.rate_finite_signed = (s > 0.0 ? (1.0 - o.fer) * s : s) - r.correction;
    r.rate_finite = std::max(0.0, r.rate_finite_signed);
    r.throughput = throughput(r.rate_finite, o.symbol_rate);
    return r;
}

}  // namespace cvmdi::keyrate
