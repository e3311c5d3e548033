#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include <gtest/gtest.h>

#include "cvmdi/channel.hpp"
#include "cvmdi/dsp.hpp"
#include "cvmdi/postprocess.hpp"
#include "cvmdi/stats.hpp"

using namespace cvmdi;
using namespace cvmdi::postprocess;
using channel::Symbols;

namespace {

constexpr double kEta = 0.94;
constexpr double kV = 6.5;

std::vector<double> re(const Symbols& s) {
    std::vector<double> v(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) v[i] = s[i].real();
    return v;
}
std::vector<double> im(const Symbols& s) {
    std::vector<double> v(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) v[i] = s[i].imag();
    return v;
}

struct Run {
    Symbols alice, bob, gamma;
    channel::CalibrationRecord calib;
};

// Symbol-level relay experiment; relay-referred excess ξ enters as detector noise (η/2)ξ.
Run simulate(std::size_t n, std::uint64_t seed, double tau_b = 0.56, double xi_relay = 0.0, double phase_a = 0.0,
             double phase_b = 0.0, double sigma = 0.0) {
    Run r;
    r.alice = channel::draw_symbols(n, kV, sub_seed(seed, 1));
    r.bob = channel::draw_symbols(n, kV, sub_seed(seed, 2));
    const auto ra = channel::propagate_channel(
        r.alice, channel::ChannelParams{.tau = 1.0, .phase_sigma = sigma, .phase_mean = phase_a}, sub_seed(seed, 3));
    const auto rb = channel::propagate_channel(
        r.bob, channel::ChannelParams{.tau = tau_b, .phase_sigma = sigma, .phase_mean = phase_b}, sub_seed(seed, 4));
    const channel::RelayParams relay{.eta = kEta, .nu_el = 0.5 * kEta * xi_relay};
    r.gamma = channel::relay_bsm(ra, rb, relay, sub_seed(seed, 5));
    r.calib = channel::calibrate_shot_noise(relay, 100'000, sub_seed(seed, 6));
    return r;
}

// Inverse of P(Z > z) = ε by bisection on erfc.
double bisect_quantile(double eps) {
    double lo = 0.0, hi = 40.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (0.5 * std::erfc(mid / std::sqrt(2.0)) > eps ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

// ---------------------------------------------------------------- displacement

TEST(Displacement, NoiselessToyCancelsBobExactly) {
    const auto a = channel::draw_symbols(10'000, kV, 1), b = channel::draw_symbols(10'000, kV, 2);
    Symbols g(a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        g[i] = {(a[i].real() - b[i].real()) / std::sqrt(2.0), (a[i].imag() + b[i].imag()) / std::sqrt(2.0)};
    const auto d = displacement_infer(g, b);
    // Regression coefficient is exact only up to the sample cross-term of a and b.
    EXPECT_NEAR(d.coeffs.rho, -1.0 / std::sqrt(2.0), 0.05);
    EXPECT_NEAR(d.coeffs.beta_disp, -1.0 / std::sqrt(2.0), 0.05);
    const auto fixed = displacement_infer(g, b, DisplacementCoeffs{-1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0), std::sqrt(2.0)});
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_NEAR(fixed.inferred[i].real(), a[i].real(), 1e-12);
        EXPECT_NEAR(fixed.inferred[i].imag(), a[i].imag(), 1e-12);
    }
    EXPECT_NEAR(stats::correlation(re(fixed.inferred), re(a)), 1.0, 1e-12);
}

TEST(Displacement, BaselineRunImprovesCorrelationAndOrthogonalizes) {
    const std::size_t n = 1'000'000;
    const auto r = simulate(n, 7, 0.56, 0.0395);
    const auto d = displacement_infer(r.gamma, r.bob);
    const auto ux = re(d.inferred), ax = re(r.alice), gx = re(r.gamma), bx = re(r.bob);
    EXPECT_GT(stats::correlation(ux, ax), stats::correlation(gx, ax));
    EXPECT_LT(std::abs(stats::correlation(ux, bx)), 3.0 / std::sqrt(double(n)));
    EXPECT_LT(std::abs(stats::correlation(im(d.inferred), im(r.bob))), 3.0 / std::sqrt(double(n)));
    EXPECT_NEAR(0.5 * (stats::variance(ux) + stats::variance(im(d.inferred))),
                0.5 * (stats::variance(bx) + stats::variance(im(r.bob))), 1e-9);
}

TEST(Displacement, OrthogonalityHoldsAcrossSeeds) {
    const std::size_t n = 100'000;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto r = simulate(n, 100 + seed, 0.3 + 0.05 * double(seed), 0.02);
        const auto d = displacement_infer(r.gamma, r.bob);
        EXPECT_LT(std::abs(stats::correlation(re(d.inferred), re(r.bob))), 3.0 / std::sqrt(double(n))) << seed;
    }
}

TEST(Displacement, DegenerateBobModulationIsRejected) {
    const Symbols g = channel::draw_symbols(1000, 1.0, 1), b(1000);
    EXPECT_THROW(displacement_infer(g, b), DomainError);
    EXPECT_THROW(displacement_infer(g, Symbols(999)), DomainError);
    EXPECT_THROW(displacement_infer(g, g, DisplacementCoeffs{0.0, 0.0, 0.0}), DomainError);
}

// ---------------------------------------------------------------- estimation

TEST(EstimateChannel, NoiselessSyntheticRecoversTruth) {
    const auto r = simulate(1'000'000, 11);
    const auto e = estimate_channel(r.alice, r.bob, r.gamma, &r.calib, kEta);
    EXPECT_NEAR(e.tau_a_hat, 1.0, 0.01);
    EXPECT_NEAR(e.tau_b_hat, 0.56, 0.01);
    EXPECT_NEAR(e.xi_hat_relay, 0.0, 0.002);
    EXPECT_EQ(e.n_used, 1'000'000u);
    ASSERT_EQ(e.frame_xi.size(), 1u);
}

TEST(EstimateChannel, BackToBackLossless) {
    const auto r = simulate(1'000'000, 12, 1.0);
    const auto e = estimate_channel(r.alice, r.bob, r.gamma, &r.calib, kEta);
    EXPECT_NEAR(e.tau_b_hat, 1.0, 0.01);
}

TEST(EstimateChannel, RelayExcessNoiseIsRecovered) {
    const auto r = simulate(1'000'000, 13, 0.56, 0.0395);
    const auto e = estimate_channel(r.alice, r.bob, r.gamma, &r.calib, kEta);
    EXPECT_NEAR(e.xi_hat_relay, 0.0395, 0.003);
}

TEST(EstimateChannel, ChannelInputNoiseIsReferredByTransmissivity) {
    const std::size_t n = 1'000'000;
    const auto a = channel::draw_symbols(n, kV, 1), b = channel::draw_symbols(n, kV, 2);
    const auto ra = channel::propagate_channel(a, {.tau = 1.0, .xi_in = 0.02}, 3);
    const auto rb = channel::propagate_channel(b, {.tau = 0.5, .xi_in = 0.04}, 4);
    const channel::RelayParams relay{.eta = kEta};
    const auto g = channel::relay_bsm(ra, rb, relay, 5);
    const auto cal = channel::calibrate_shot_noise(relay, 100'000, 6);
    const auto e = estimate_channel(a, b, g, &cal, kEta);
    EXPECT_NEAR(e.xi_hat_relay, 1.0 * 0.02 + 0.5 * 0.04, 0.005);
}

TEST(EstimateChannel, MissingCalibrationAndBadInputs) {
    const auto r = simulate(10'000, 1);
    EXPECT_THROW(estimate_channel(r.alice, r.bob, r.gamma, nullptr, kEta), ConfigError);
    EXPECT_THROW(estimate_channel(r.alice, r.bob, r.gamma, &r.calib, 0.0), DomainError);
    EXPECT_THROW(estimate_channel(std::span(r.alice).first(10), r.bob, r.gamma, &r.calib, kEta), DomainError);
}

TEST(EstimateChannel, NegativeEstimateIsReportedAndFlagged) {
    // Shot noise below the calibrated unit reads as negative excess noise.
    auto r = simulate(200'000, 3, 0.56, 0.0);
    for (auto& g : r.gamma) g *= 0.99;
    const auto e = estimate_channel(r.alice, r.bob, r.gamma, &r.calib, kEta);
    EXPECT_LT(e.xi_hat_relay, 0.0);
    EXPECT_TRUE(e.xi_negative);
    const auto wc = point_bounds(e, 1e-10);
    EXPECT_EQ(wc.xi_wc, 0.0);
}

TEST(MergeFrames, SymbolWeightedMeans) {
    EstimationResult a, b;
    a.tau_a_hat = 1.0, a.tau_b_hat = 0.5, a.xi_hat_relay = 0.01, a.n_used = 100;
    a.frame_xi = {0.01}, a.frame_tau_a = {1.0}, a.frame_tau_b = {0.5}, a.frame_n = {100};
    b.tau_a_hat = 0.8, b.tau_b_hat = 0.6, b.xi_hat_relay = 0.04, b.n_used = 300;
    b.frame_xi = {0.04}, b.frame_tau_a = {0.8}, b.frame_tau_b = {0.6}, b.frame_n = {300};
    const std::vector<EstimationResult> f{a, b};
    const auto m = merge_frames(f);
    EXPECT_DOUBLE_EQ(m.tau_a_hat, 0.85);
    EXPECT_DOUBLE_EQ(m.tau_b_hat, 0.575);
    EXPECT_DOUBLE_EQ(m.xi_hat_relay, 0.0325);
    EXPECT_EQ(m.n_used, 400u);
    EXPECT_EQ(m.frame_xi, (std::vector<double>{0.01, 0.04}));
    EXPECT_THROW(merge_frames(std::span<const EstimationResult>{}), DomainError);
}

// ---------------------------------------------------------------- worst case

TEST(WorstCase, QuantileMatchesBisectionOracle) {
    EXPECT_NEAR(stats::normal_upper_quantile(1e-10), 6.3613, 0.001);
    for (double eps : {1e-10, 1e-6, 1e-3, 0.05, 0.3})
        EXPECT_NEAR(stats::normal_upper_quantile(eps), bisect_quantile(eps), 1e-9) << eps;
}

TEST(WorstCase, ZeroScatterLeavesEstimates) {
    EstimationResult e;
    e.xi_hat_relay = 0.0395, e.tau_b_hat = 0.56, e.tau_a_hat = 1.0;
    e.frame_xi = std::vector<double>(20, 0.0395);
    e.frame_tau_b = std::vector<double>(20, 0.56);
    e.frame_tau_a = std::vector<double>(20, 1.0);
    const auto w = worst_case_bounds(e, 1e-10, 20);
    EXPECT_DOUBLE_EQ(w.xi_wc, 0.0395);
    EXPECT_DOUBLE_EQ(w.tau_wc, 0.56);
    EXPECT_TRUE(w.bounds_set);
}

TEST(WorstCase, ShiftIsQuantileTimesStandardError) {
    EstimationResult e;
    e.xi_hat_relay = 0.04, e.tau_b_hat = 0.5, e.tau_a_hat = 1.0;
    e.frame_xi = {0.03, 0.05, 0.04, 0.04};
    e.frame_tau_b = {0.49, 0.51, 0.5, 0.5};
    e.frame_tau_a = {1.0, 1.0, 1.0, 1.0};
    const auto w = worst_case_bounds(e, 1e-10, 4);
    const double sxi = std::sqrt((1e-4 + 1e-4) / 3.0), stau = std::sqrt((1e-4 + 1e-4) / 3.0);
    const double z = bisect_quantile(1e-10);
    EXPECT_NEAR(w.xi_wc, 0.04 + z * sxi / 2.0, 1e-12);
    EXPECT_NEAR(w.tau_wc, 0.5 - z * stau / 2.0, 1e-12);
    EXPECT_GE(w.xi_wc, w.xi_hat_relay);
    EXPECT_LE(w.tau_wc, w.tau_b_hat);
}

TEST(WorstCase, FloorsAndValidation) {
    EstimationResult e;
    e.xi_hat_relay = -0.01, e.tau_b_hat = 0.01;
    e.frame_xi = {-0.011, -0.009}, e.frame_tau_b = {0.0, 0.02}, e.frame_tau_a = {1.0, 1.0};
    const auto w = worst_case_bounds(e, 1e-10, 2);
    EXPECT_EQ(w.xi_wc, 0.0);
    EXPECT_EQ(w.tau_wc, 0.0);
    EXPECT_THROW(worst_case_bounds(e, 0.0, 2), DomainError);
    EXPECT_THROW(worst_case_bounds(e, 0.5, 2), DomainError);
    EXPECT_THROW(worst_case_bounds(e, 1e-10, 1), DomainError);
}

// ---------------------------------------------------------------- alignment in the loop

TEST(PhaseAlignment, CovarianceAlignmentMatchesGenieWithin1mSNU) {
    const std::size_t n = 100'000;
    const double pa = 0.5, pb = -3.0;
    const auto r = simulate(n, 21, 0.56, 0.0395, pa, pb, 0.06);
    // Alice enters γ as α_A, Bob as -conj(α_B).
    const auto al = dsp::phase_align(r.alice, r.gamma);
    Symbols bob_ref(n);
    for (std::size_t i = 0; i < n; ++i) bob_ref[i] = -std::conj(r.bob[i]);
    const auto bl = dsp::phase_align(bob_ref, r.gamma);
    Symbols bob_aligned(n), alice_genie(n), bob_genie(n);
    for (std::size_t i = 0; i < n; ++i) {
        bob_aligned[i] = -std::conj(bl.rotated[i]);
        alice_genie[i] = r.alice[i] * std::polar(1.0, pa);
        bob_genie[i] = r.bob[i] * std::polar(1.0, pb);
    }
    const auto est = estimate_channel(al.rotated, bob_aligned, r.gamma, &r.calib, kEta);
    const auto genie = estimate_channel(alice_genie, bob_genie, r.gamma, &r.calib, kEta);
    EXPECT_LT(std::abs(est.xi_hat_relay - genie.xi_hat_relay), 0.001);
}

// ---------------------------------------------------------------- consistency

TEST(EstimatorConsistency, FiftySeedsCentredWithPredictedSpread) {
    const std::size_t n = 100'000;
    const double xi = 0.0395;
    std::vector<EstimationResult> frames;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        const auto r = simulate(n, 5000 + seed, 0.56, xi);
        frames.push_back(estimate_channel(r.alice, r.bob, r.gamma, &r.calib, kEta));
    }
    const auto merged = merge_frames(frames);
    stats::Moments m;
    for (double x : merged.frame_xi) m.add(x);
    EXPECT_NEAR(merged.xi_hat_relay, xi, 0.001) << "standard error of the mean " << m.stddev() / std::sqrt(50.0);
    // Residual variance R = 1 + (η/2)ξ estimated from 2n samples, referred by 2/η.
    const double predicted = (2.0 / kEta) * (1.0 + 0.5 * kEta * xi) / std::sqrt(double(n));
    EXPECT_NEAR(m.stddev() / predicted, 1.0, 0.3);
}

// ---------------------------------------------------------------- privacy amplification

TEST(PrivacyAmplification, EmptyAndZeroInputs) {
    const std::vector<std::uint8_t> bits(64, 0);
    EXPECT_TRUE(privacy_amplify(bits, 5, 0).empty());
    for (auto b : privacy_amplify(bits, 5, 16)) EXPECT_EQ(b, 0);
    EXPECT_THROW(privacy_amplify(bits, 5, 65), DomainError);
}

TEST(PrivacyAmplification, MatchesNaiveMatrixProduct) {
    std::vector<std::uint8_t> bits(64);
    std::uint64_t word = 0x9E3779B97F4A7C15ULL;
    for (std::size_t j = 0; j < 64; ++j) bits[j] = static_cast<std::uint8_t>((word >> j) & 1U);
    const std::uint64_t seed = 1234;
    const std::size_t out = 16, n = 64;
    const auto r = toeplitz_seed_bits(seed, n + out - 1);
    // Dense Toeplitz matrix: constant along diagonals, T(i, j) = r[i - j + n - 1].
    std::vector<std::vector<int>> t(out, std::vector<int>(n));
    for (std::size_t i = 0; i < out; ++i)
        for (std::size_t j = 0; j < n; ++j) t[i][j] = r[i + n - 1 - j];
    for (std::size_t i = 1; i < out; ++i)
        for (std::size_t j = 1; j < n; ++j) ASSERT_EQ(t[i][j], t[i - 1][j - 1]);
    const auto key = privacy_amplify(bits, seed, out);
    ASSERT_EQ(key.size(), out);
    for (std::size_t i = 0; i < out; ++i) {
        int s = 0;
        for (std::size_t j = 0; j < n; ++j) s += t[i][j] * bits[j];
        EXPECT_EQ(key[i], s % 2) << i;
    }
}

TEST(PrivacyAmplification, LinearAndDeterministic) {
    std::vector<std::uint8_t> a(200), b(200), c(200);
    for (std::size_t i = 0; i < 200; ++i) {
        a[i] = static_cast<std::uint8_t>((i * 7 + 3) % 5 < 2);
        b[i] = static_cast<std::uint8_t>((i * 11 + 1) % 3 == 0);
        c[i] = a[i] ^ b[i];
    }
    const auto ha = privacy_amplify(a, 9, 50), hb = privacy_amplify(b, 9, 50), hc = privacy_amplify(c, 9, 50);
    for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(hc[i], ha[i] ^ hb[i]);
    EXPECT_EQ(privacy_amplify(a, 9, 50), ha);
    EXPECT_NE(privacy_amplify(a, 10, 50), ha);
}
