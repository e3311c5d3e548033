// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cvmdi/cvmdi.hpp"

using namespace cvmdi;
using cplx = std::complex<double>;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ProtocolConfig baseline() {
    return ProtocolConfig{};  // the defaults are the baseline operating point
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double var_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

/// Welch statistic for equal-size samples.
double welch_t(const std::vector<double>& a, const std::vector<double>& b) {
    const double se = std::sqrt(var_of(a) / static_cast<double>(a.size()) + var_of(b) / static_cast<double>(b.size()));
    return se > 0.0 ? (mean_of(a) - mean_of(b)) / se : 0.0;
}

// Frame-level correlation checks collected from every baseline run.
struct CorrelationLog {
    std::size_t frames = 0;
    std::size_t failures = 0;
    double worst_margin = 1e300;     // min of Corr(u_x, x_A) - Corr(γ_x, x_A)
    double worst_orthogonal = 0.0;   // max of |Corr(u_x, x_B)|·√n / 3
    void add(const harness::RunReport& r) {
        for (const auto& f : r.frames) {
            ++frames;
            const double margin = f.corr_ux_xa - f.corr_gx_xa;
            const double orth = std::abs(f.corr_ux_xb) * std::sqrt(static_cast<double>(f.n_used)) / 3.0;
            worst_margin = std::min(worst_margin, margin);
            worst_orthogonal = std::max(worst_orthogonal, orth);
            if (!(margin > 0.0 && orth < 1.0)) ++failures;
        }
    }
};

CorrelationLog g_corr;

std::vector<cplx> shifted(std::span<const cplx> x, std::size_t d) {
    std::vector<cplx> out(x.size() + d);
    std::copy(x.begin(), x.end(), out.begin() + static_cast<std::ptrdiff_t>(d));
    return out;
}

// ---------------------------------------------------------------- criteria

Outcome phase_formula() {
    const double xi = dsp::phase_noise_to_excess(0.06, 6.5);
    return {std::abs(xi - 0.0234) <= 0.0005, fmt("xi_phase(0.06 rad, V=6.5) = %.5f SNU (target 0.0234 +- 0.0005)", xi)};
}

Outcome phase_statistics() {
    auto cfg = baseline();
    cfg.mode = RunMode::Waveform;
    cfg.n_symbols = cfg.symbols_per_frame();
    const auto rep = harness::run_experiment(cfg);
    g_corr.add(rep);
    const auto& m = rep.frames.at(0).meta;
    return {m.has_phase && std::abs(m.phase_std - 0.06) <= 0.006,
            fmt("pilot phase std %.4f rad over %llu samples (target 0.06 +- 0.006), mean %.4f rad", m.phase_std,
                static_cast<unsigned long long>(cfg.frame_samples), m.phase_mean)};
}

harness::RunReport g_baseline_run;

Outcome excess_noise() {
    const auto t0 = std::chrono::steady_clock::now();
    g_baseline_run = harness::run_experiment(baseline());
    g_corr.add(g_baseline_run);
    const auto& e = g_baseline_run.estimate;
    const double secs = seconds_since(t0);
    const bool ok = g_baseline_run.frames.size() == 20 && std::abs(e.xi_hat_relay - 0.0395) <= 0.003 &&
                    std::abs(e.xi_wc - 0.045) <= 0.2 * 0.045 && secs <= 60.0;
    return {ok, fmt("xi_hat %.2f mSNU (39.5 +- 3), xi_wc %.2f mSNU (45 +- 20%%), %zu frames, %.1f s", 1e3 * e.xi_hat_relay,
                    1e3 * e.xi_wc, g_baseline_run.frames.size(), secs)};
}

Outcome key_rate() {
    const auto& k = g_baseline_run.keyrate;
    const bool in_band = std::abs(k.rate_finite - 0.152) <= 0.2 * 0.152;
    const double tp = keyrate::throughput(0.152, 20e6);
    const bool arithmetic = std::abs(tp - 3.04e6) <= 1e-9 * 3.04e6;
    const bool ordered = k.rate_finite_signed <= k.rate_asym_signed;

    // Monotonicity of the model in the worst-case noise and in τ_B.
    const auto base = harness::base_model(baseline());
    bool monotone = true;
    double prev = 1e9;
    for (int i = 0; i <= 20; ++i) {
        auto est = g_baseline_run.estimate;
        est.xi_wc = 0.03 + 0.002 * i;
        const double r = keyrate::rate_finite(base, est, {4'000'000, 0.97, 0.0, 20e6, 0.0}).rate_finite_signed;
        monotone = monotone && r <= prev + 1e-12;
        prev = r;
    }
    prev = -1e9;
    for (int i = 1; i <= 20; ++i) {
        const auto m = keyrate::EbModel::from_relay_excess(6.5, 6.5, 1.0, 0.05 * i, 0.94, 0.0395, true);
        const double r = keyrate::rate_asymptotic(m, 0.97).rate_asym_signed;
        monotone = monotone && r >= prev - 1e-12;
        prev = r;
    }
    return {in_band && arithmetic && ordered && monotone,
            fmt("rate_finite %.4f bit/use (0.152 +- 20%%), rate_asym %.4f, throughput(0.152, 20 MBaud) = %.1f bit/s, "
                "finite <= asym: %s, monotone: %s",
                k.rate_finite, k.rate_asym, tp, ordered ? "yes" : "no", monotone ? "yes" : "no")};
}

Outcome dsp_transparency() {
    // Noiseless RRC cascade.
    const auto sym = channel::draw_symbols(10'000, 6.5, 1);
    const dsp::RrcSpec rrc{};
    const auto back = dsp::demodulate_symbols(dsp::modulate_waveform(sym, rrc), rrc, 0, sym.size());
    double err = 0.0, pow = 0.0;
    for (std::size_t i = 0; i < sym.size(); ++i) err += std::norm(back[i] - sym[i]), pow += std::norm(sym[i]);
    const double loop_rms = std::sqrt(err / pow);

    std::vector<double> xs, xw, ts, tw;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto cfg = baseline();
        cfg.seed = seed;
        cfg.n_symbols = cfg.symbols_per_frame();
        const auto s = harness::run_experiment(cfg);
        cfg.mode = RunMode::Waveform;
        const auto w = harness::run_experiment(cfg);
        g_corr.add(s);
        g_corr.add(w);
        xs.push_back(s.estimate.xi_hat_relay);
        xw.push_back(w.estimate.xi_hat_relay);
        ts.push_back(s.estimate.tau_b_hat);
        tw.push_back(w.estimate.tau_b_hat);
    }
    const double diff = mean_of(xw) - mean_of(xs);
    const double t_xi = welch_t(xw, xs), t_tau = welch_t(tw, ts);
    const bool ok = std::abs(diff) < 0.003 && std::abs(t_xi) < 3.0 && std::abs(t_tau) < 3.0 && loop_rms < 1e-10;
    return {ok, fmt("mean xi_hat waveform %.2f vs symbol %.2f mSNU (|diff| %.2f < 3), Welch t xi %.2f tau_B %.2f (< 3), "
                    "loopback rms %.2e (< 1e-10)",
                    1e3 * mean_of(xw), 1e3 * mean_of(xs), 1e3 * std::abs(diff), t_xi, t_tau, loop_rms)};
}

Outcome delay_and_phase() {
    // Clean loopback, every integer shift.
    const dsp::RrcSpec rrc{};
    const auto tx = dsp::modulate_waveform(channel::draw_symbols(400, 6.5, 5), rrc).samples;
    std::size_t clean_bad = 0;
    for (std::size_t d = 0; d <= 10'000; ++d)
        if (dsp::estimate_delay(tx, shifted(tx, d), 10'000) != d) ++clean_bad;

    // 0 dB SNR on 1e5 samples.
    std::mt19937_64 eng(3);
    std::normal_distribution<double> z;
    std::vector<cplx> w(100'000);
    for (auto& v : w) v = {z(eng), z(eng)};
    std::size_t noisy_bad = 0;
    for (std::size_t d : {0, 1, 137, 5000, 9999, 10'000}) {
        auto rx = shifted(w, d);
        for (auto& v : rx) v += cplx(z(eng), z(eng));
        if (dsp::estimate_delay(w, rx, 10'000) != d) ++noisy_bad;
    }

    // Phase alignment on 1e5-symbol blocks against a 64-point grid.
    const auto sym = channel::draw_symbols(100'000, 6.5, 1);
    double worst_err = 0.0;
    bool beats_grid = true;
    for (double rot : {-3.0, -0.7, 0.0, 0.7, 2.5}) {
        channel::Symbols r(sym.size());
        for (std::size_t i = 0; i < sym.size(); ++i) r[i] = sym[i] * std::polar(1.0, rot);
        const auto a = dsp::phase_align(r, sym);
        worst_err = std::max(worst_err, std::abs(std::remainder(a.theta + rot, 2.0 * dsp::kPi)));
        const double best = dsp::aligned_covariance(r, sym, a.theta);
        for (int k = 0; k < 64; ++k)
            if (dsp::aligned_covariance(r, sym, -dsp::kPi + 2.0 * dsp::kPi * k / 64.0) > best) beats_grid = false;
    }
    return {clean_bad == 0 && noisy_bad == 0 && worst_err < 1e-3 && beats_grid,
            fmt("clean shifts 0..10000 wrong: %zu, 0 dB shifts wrong: %zu, phase error %.2e rad (< 1e-3), beats grid: %s",
                clean_bad, noisy_bad, worst_err, beats_grid ? "yes" : "no")};
}

Eigen::MatrixXd sample_gaussian(const Eigen::MatrixXd& cov, std::size_t n, std::uint64_t seed) {
    const Eigen::MatrixXd L = Eigen::LLT<Eigen::MatrixXd>(cov).matrixL();
    std::mt19937_64 eng(seed);
    std::normal_distribution<double> z;
    Eigen::MatrixXd out(static_cast<Eigen::Index>(n), cov.rows());
    Eigen::VectorXd w(cov.rows());
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        for (Eigen::Index k = 0; k < w.size(); ++k) w(k) = z(eng);
        out.row(i) = (L * w).transpose();
    }
    return out;
}

/// Residual covariance of `y` after least-squares regression on `x`.
Eigen::MatrixXd residual_cov(const Eigen::MatrixXd& y, const Eigen::MatrixXd& x) {
    const Eigen::MatrixXd coef = (x.transpose() * x).ldlt().solve(x.transpose() * y);
    const Eigen::MatrixXd r = y - x * coef;
    const Eigen::MatrixXd c = r.rowwise() - r.colwise().mean();
    return c.transpose() * c / static_cast<double>(r.rows());
}

Outcome gaussian_core() {
    using namespace gaussian;
    // TMSV homodyne: diag(1/μ, μ).
    double tmsv_err = 0.0;
    for (double mu : {1.0, 2.0, 7.5, 30.0}) {
        const auto c = condition_on_homodyne(tmsv_cm(mu), 1, Quadrature::X);
        Matrix expect = Matrix::Zero(2, 2);
        expect(0, 0) = 1.0 / mu;
        expect(1, 1) = mu;
        tmsv_err = std::max(tmsv_err, (c.matrix() - expect).cwiseAbs().maxCoeff());
    }
    // Purity under conditioning.
    std::mt19937_64 eng(11);
    std::uniform_real_distribution<double> u(0.05, 0.95), mu(1.2, 20.0);
    double purity_err = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        auto cm = direct_sum(tmsv_cm(mu(eng)), tmsv_cm(mu(eng)));
        cm = apply_beamsplitter(apply_beamsplitter(cm, 1, 2, u(eng)), 0, 3, u(eng));
        const auto mode = static_cast<std::size_t>(trial % 4);
        for (const auto& c : {condition_on_homodyne(cm, mode, trial % 2 ? Quadrature::P : Quadrature::X),
                              condition_on_heterodyne(cm, mode)})
            for (double nu : symplectic_eigenvalues(c)) purity_err = std::max(purity_err, std::abs(nu - 1.0));
    }
    // Symplectic spectrum under beamsplitters.
    const auto mixed = direct_sum(apply_loss_noise(tmsv_cm(7.5), 1, 0.56, 0.05), apply_loss_noise(tmsv_cm(3.5), 0, 0.3, 0.0));
    const auto before = symplectic_eigenvalues(mixed);
    double bs_err = 0.0;
    for (int k = 1; k <= 9; ++k)
        for (auto [i, j] : {std::pair{0u, 1u}, std::pair{1u, 2u}, std::pair{0u, 3u}}) {
            const auto after = symplectic_eigenvalues(apply_beamsplitter(mixed, i, j, 0.1 * k));
            for (std::size_t n = 0; n < before.size(); ++n) bs_err = std::max(bs_err, std::abs(after[n] - before[n]));
        }
    // Monte-Carlo conditional covariances by regression, 1e6 samples.
    const auto cm = apply_loss_noise(tmsv_cm(7.5), 1, 0.56, 0.05);
    const std::size_t n = 1'000'000;
    Matrix ext = Matrix::Zero(6, 6);
    ext.topLeftCorner(4, 4) = cm.matrix();
    ext.bottomRightCorner(2, 2) = Matrix::Identity(2, 2);
    const auto x = sample_gaussian(ext, n, 5);
    const Eigen::MatrixXd a = x.leftCols(2);
    double worst_z = 0.0;
    auto compare = [&](const Eigen::MatrixXd& emp, const CovMatrix& cond) {
        for (Eigen::Index i = 0; i < 2; ++i)
            for (Eigen::Index j = 0; j < 2; ++j) {
                const double se = std::sqrt((cond(i, i) * cond(j, j) + cond(i, j) * cond(i, j)) / static_cast<double>(n));
                worst_z = std::max(worst_z, std::abs(emp(i, j) - cond(i, j)) / se);
            }
    };
    compare(residual_cov(a, x.col(2)), condition_on_homodyne(cm, 1, Quadrature::X));
    compare(residual_cov(a, x.col(3)), condition_on_homodyne(cm, 1, Quadrature::P));
    Eigen::MatrixXd rec(static_cast<Eigen::Index>(n), 2);
    rec.col(0) = x.col(2) + x.col(4);
    rec.col(1) = x.col(3) + x.col(5);
    compare(residual_cov(a, rec), condition_on_heterodyne(cm, 1));
    const bool ok = tmsv_err < 1e-12 && purity_err < 1e-8 && bs_err < 1e-9 && worst_z < 3.0;
    return {ok, fmt("TMSV homodyne err %.1e, purity err %.1e, beamsplitter spectrum err %.1e, MC worst |z| %.2f (< 3)", tmsv_err,
                    purity_err, bs_err, worst_z)};
}

Outcome correlation() {
    return {g_corr.frames > 0 && g_corr.failures == 0,
            fmt("%zu frames from all baseline runs, failures %zu, min Corr(u_x,x_A)-Corr(g_x,x_A) %.4f, "
                "max |Corr(u_x,x_B)|/(3/sqrt n) %.3f",
                g_corr.frames, g_corr.failures, g_corr.worst_margin, g_corr.worst_orthogonal)};
}

Outcome sweep() {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<double> asym, finite, model;
    bool ordered = true;
    for (int i = 0; i < 10; ++i) {
        const double km = 2.0 * i;
        auto cfg = baseline();
        cfg.tau_b = std::pow(10.0, -0.02 * km);
        const auto r = harness::run_experiment(cfg);
        asym.push_back(r.keyrate.rate_asym);
        finite.push_back(r.keyrate.rate_finite);
        ordered = ordered && r.keyrate.rate_finite_signed <= r.keyrate.rate_asym_signed;
        const auto m = keyrate::EbModel::from_relay_excess(cfg.v_a, cfg.v_b, cfg.tau_a, cfg.tau_b, cfg.eta, cfg.target_xi_relay(), true);
        model.push_back(keyrate::rate_asymptotic(m, cfg.beta_ir).rate_asym);
        std::fprintf(stderr, "  sweep %4.1f km tau_B %.4f: model asym %.4f, run asym %.4f, run finite %.4f\n", km, cfg.tau_b,
                     model.back(), asym.back(), finite.back());
    }
    auto non_increasing = [](const std::vector<double>& v) {
        for (std::size_t i = 1; i < v.size(); ++i)
            if (v[i] > v[i - 1]) return false;
        return true;
    };
    const double secs = seconds_since(t0);
    const bool mono = non_increasing(model) && non_increasing(finite) && non_increasing(asym);
    return {secs < 600.0 && ordered && mono,
            fmt("10 points x 20 frames in %.1f s (< 600), finite <= asym: %s, non-increasing with distance: %s", secs,
                ordered ? "yes" : "no", mono ? "yes" : "no")};
}

}  // namespace

int main() {
    const std::pair<const char*, std::function<Outcome()>> criteria[] = {
        {"phase-noise excess formula", phase_formula},
        {"pilot phase statistics", phase_statistics},
        {"excess-noise estimation", excess_noise},
        {"key-rate reproduction", key_rate},
        {"DSP transparency", dsp_transparency},
        {"delay and phase recovery", delay_and_phase},
        {"Gaussian-core oracles", gaussian_core},
        {"a-posteriori correlation", correlation},
        {"distance sweep", sweep},
    };
    int failed = 0, idx = 0;
    for (const auto& [name, fn] : criteria) {
        ++idx;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::printf("criterion %d %s: %s (%s) [%.1f s]\n", idx, name, o.pass ? "PASS" : "FAIL", o.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
    }
    std::printf("%d of %d criteria passed\n", idx - failed, idx);
    return failed == 0 ? 0 : 1;
}
