#pragma once

// End-to-end runs: calibration, frame simulation at symbol or waveform level,
// receiver DSP, estimation, key rates and report files.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cvmdi/channel.hpp"
#include "cvmdi/config.hpp"
#include "cvmdi/container.hpp"
#include "cvmdi/dsp.hpp"
#include "cvmdi/error.hpp"
#include "cvmdi/keyrate.hpp"
#include "cvmdi/postprocess.hpp"
#include "cvmdi/random.hpp"
#include "cvmdi/stats.hpp"

namespace cvmdi::harness {

using channel::Symbols;
using container::Frame;
using cplx = std::complex<double>;

/// Runs `f`, tagging any library error with the stage name.
template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError(name, e);
    }
}

// ---------------------------------------------------------------- calibration

inline channel::CalibrationRecord calibrate(const ProtocolConfig& cfg) {
    return channel::calibrate_shot_noise(cfg.relay(), static_cast<std::size_t>(cfg.calibration_samples),
                                         stream_seed(cfg.seed, 0, StreamRole::Calibration));
}

inline nlohmann::ordered_json calibration_to_json(const channel::CalibrationRecord& c) {
    return {{"vacuum_variance_raw", c.vacuum_variance_raw},
            {"electronic_variance_raw", c.electronic_variance_raw},
            {"snu_scale", c.snu_scale},
            {"n_samples", c.n_samples}};
}

inline channel::CalibrationRecord calibration_from_json(const nlohmann::json& j) {
    try {
        channel::CalibrationRecord c;
        c.vacuum_variance_raw = j.at("vacuum_variance_raw").get<double>();
        c.electronic_variance_raw = j.at("electronic_variance_raw").get<double>();
        c.snu_scale = j.at("snu_scale").get<double>();
        c.n_samples = j.at("n_samples").get<std::size_t>();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("calibration record: ") + e.what());
    }
}

// ---------------------------------------------------------------- simulation

struct FrameSymbols {
    Symbols alice, bob;
};

inline FrameSymbols draw_frame_symbols(const ProtocolConfig& cfg, std::uint64_t frame) {
    const std::size_t n = cfg.frame_symbols(static_cast<std::size_t>(frame));
    return {channel::draw_symbols(n, cfg.v_a, stream_seed(cfg.seed, frame, StreamRole::AliceSymbols)),
            channel::draw_symbols(n, cfg.v_b, stream_seed(cfg.seed, frame, StreamRole::BobSymbols))};
}

/// Symbol-level frame: γ per symbol in raw detector units.
inline Frame simulate_symbol_frame(const ProtocolConfig& cfg, std::uint64_t frame) {
    auto s = draw_frame_symbols(cfg, frame);
    const auto ra = channel::propagate_channel(s.alice, cfg.channel_a(), stream_seed(cfg.seed, frame, StreamRole::AliceChannel));
    const auto rb = channel::propagate_channel(s.bob, cfg.channel_b(), stream_seed(cfg.seed, frame, StreamRole::BobChannel));
    const auto relay = cfg.relay();
    Frame f;
    f.id = frame;
    f.gamma = channel::to_raw(channel::relay_bsm(ra, rb, relay, stream_seed(cfg.seed, frame, StreamRole::RelayNoise)),
                              relay.detector_gain);
    f.meta.n_generated = s.alice.size();
    f.alice = std::move(s.alice);
    f.bob = std::move(s.bob);
    return f;
}

/// Waveform-level frame: pulse-shaped transmitters, fibre delays, channel,
/// relay on every sample. γ holds raw detector samples.
inline Frame simulate_waveform_frame(const ProtocolConfig& cfg, std::uint64_t frame) {
    auto s = draw_frame_symbols(cfg, frame);
    const auto rrc = cfg.rrc();
    const std::size_t n = s.alice.size(), sps = rrc.samples_per_symbol;
    const std::size_t da = static_cast<std::size_t>(cfg.delay_a), db = static_cast<std::size_t>(cfg.delay_b);
    const std::size_t len = n * sps + rrc.span_symbols * sps + std::max(da, db);

    auto delayed = [&](const Symbols& sym, bool pilot, std::size_t d) {
        const auto w = dsp::modulate_waveform(sym, rrc, pilot ? std::optional(cfg.pilot()) : std::nullopt, cfg.sample_rate);
        Symbols out(len);
        std::copy(w.samples.begin(), w.samples.end(), out.begin() + static_cast<std::ptrdiff_t>(d));
        return out;
    };
    Symbols ra = channel::propagate_waveform(delayed(s.alice, cfg.pilot_on_alice, da), cfg.channel_a(), n, sps,
                                             rrc.group_delay() + da, stream_seed(cfg.seed, frame, StreamRole::AliceChannel));
    const Symbols rb = channel::propagate_waveform(delayed(s.bob, cfg.pilot_on_bob, db), cfg.channel_b(), n, sps,
                                                   rrc.group_delay() + db, stream_seed(cfg.seed, frame, StreamRole::BobChannel));
    const auto relay = cfg.relay();
    ra = channel::relay_bsm(ra, rb, relay, stream_seed(cfg.seed, frame, StreamRole::RelayNoise));
    for (auto& v : ra) v *= relay.detector_gain;
    Frame f;
    f.id = frame;
    f.gamma = std::move(ra);
    f.meta.n_generated = n;
    f.alice = std::move(s.alice);
    f.bob = std::move(s.bob);
    return f;
}

inline Frame simulate_frame(const ProtocolConfig& cfg, std::uint64_t frame) {
    return cfg.mode == RunMode::Symbol ? simulate_symbol_frame(cfg, frame) : simulate_waveform_frame(cfg, frame);
}

// ---------------------------------------------------------------- receiver

inline constexpr std::size_t kPhaseTracePoints = 4096;

/// Symbol-level receiver: calibration only.
inline Frame receive_symbol_frame(Frame f, const channel::CalibrationRecord& calib) {
    f.gamma = channel::apply_calibration(f.gamma, calib);
    return f;
}

/// Waveform receiver: calibration, pilot tracking, pilot removal, delay
/// estimation on the transmitted samples, matched filtering and pairing of
/// the two parties' symbols.
inline Frame receive_waveform_frame(const ProtocolConfig& cfg, Frame raw, const channel::CalibrationRecord& calib) {
    const auto rrc = cfg.rrc();
    const std::size_t sps = rrc.samples_per_symbol, n = raw.alice.size();
    const double fs = cfg.sample_rate;
    dsp::Waveform rx{channel::apply_calibration(raw.gamma, calib), fs};
    raw.gamma = {};

    // Bob enters γ conjugated; his pilot is tracked on conj(γ).
    dsp::PhaseTrace trace;
    const bool track = cfg.pilot_on_bob;
    if (track) {
        dsp::Waveform conj_rx{Symbols(rx.samples.size()), fs};
        for (std::size_t i = 0; i < rx.samples.size(); ++i) conj_rx.samples[i] = std::conj(rx.samples[i]);
        trace = dsp::pilot_phase_trace(conj_rx, cfg.pilot(), cfg.pilot_bandwidth);
    }

    const double band_edge = (1.0 + cfg.rrc_roll_off) * cfg.symbol_rate / 2.0;
    rx = dsp::lowpass_remove_pilot(rx, cfg.lowpass_cutoff, band_edge, cfg.pilot_freq, static_cast<std::size_t>(cfg.lowpass_taps));

    // References without pilots: the pilots are gone from the filtered record.
    const auto tx_a = dsp::modulate_waveform(raw.alice, rrc, std::nullopt, fs);
    auto tx_b = dsp::modulate_waveform(raw.bob, rrc, std::nullopt, fs);
    for (auto& v : tx_b.samples) v = std::conj(v);
    const auto lag = static_cast<std::size_t>(cfg.max_lag);
    const std::size_t d_a = dsp::estimate_delay(tx_a.samples, rx.samples, lag);
    std::size_t d_b = dsp::estimate_delay(tx_b.samples, rx.samples, lag);
    // Adjacent lags of a band-limited pulse are nearly equal, so each estimate
    // is good to a sample or so; the difference must be close to whole symbols.
    const auto diff = static_cast<long long>(d_b) - static_cast<long long>(d_a);
    const auto ssps = static_cast<long long>(sps);
    const long long k = static_cast<long long>(std::llround(static_cast<double>(diff) / static_cast<double>(ssps)));
    const long long residual = diff - k * ssps;
    if (std::abs(residual) > std::max(2LL, ssps / 10))
        throw SyncError("receiver: delay difference " + std::to_string(diff) + " is not a whole number of symbols");
    d_b = static_cast<std::size_t>(static_cast<long long>(d_a) + k * ssps);  // γ symbol m pairs Alice m with Bob m - k
    if (static_cast<long long>(n) <= std::abs(k) + 1000) throw SyncError("receiver: delay difference leaves too few symbols");

    const auto g = dsp::demodulate_symbols(rx, rrc, d_a, n);
    rx = {};
    const std::size_t first = k > 0 ? static_cast<std::size_t>(k) : 0;
    const std::size_t last = k < 0 ? n - static_cast<std::size_t>(-k) : n;
    Frame f;
    f.id = raw.id;
    f.meta.n_generated = n;
    f.meta.delay_a = static_cast<double>(d_a);
    f.meta.delay_b = static_cast<double>(d_b);
    for (std::size_t m = first; m < last; ++m) {
        f.alice.push_back(raw.alice[m]);
        f.bob.push_back(raw.bob[static_cast<std::size_t>(static_cast<long long>(m) - k)]);
        f.gamma.push_back(g[m]);
    }
    if (track) {
        // Undo the sign of Bob's term and the pilot's propagation delay.
        const double shift = -dsp::kPi + 2.0 * dsp::kPi * cfg.pilot_freq * static_cast<double>(d_b) / fs;
        double mean = trace.mean + shift;
        mean = std::remainder(mean, 2.0 * dsp::kPi);
        const double offset = mean - trace.mean;
        f.meta.has_phase = true;
        f.meta.phase_mean = mean;
        f.meta.phase_std = trace.std;
        const std::size_t stride = std::max<std::size_t>(1, (trace.unwrapped_phase.size() + kPhaseTracePoints - 1) / kPhaseTracePoints);
        f.meta.phase_step = trace.decimation * stride;
        for (std::size_t i = 0; i < trace.unwrapped_phase.size(); i += stride) f.phase_trace.push_back(trace.unwrapped_phase[i] + offset);
    }
    return f;
}

inline Frame receive_frame(const ProtocolConfig& cfg, Frame raw, const channel::CalibrationRecord& calib) {
    return cfg.mode == RunMode::Symbol ? receive_symbol_frame(std::move(raw), calib)
                                       : receive_waveform_frame(cfg, std::move(raw), calib);
}

// ---------------------------------------------------------------- per-frame processing

inline constexpr std::size_t kScatterPoints = 2000;

struct FrameResult {
    std::uint64_t id = 0;
    container::FrameMeta meta;
    std::size_t n_used = 0;
    double theta_a = 0.0;
    double theta_b = 0.0;
    postprocess::DisplacementCoeffs coeffs;
    postprocess::EstimationResult est;
    double corr_ux_xa = 0.0;
    double corr_gx_xa = 0.0;
    double corr_ux_xb = 0.0;
    std::vector<std::array<double, 8>> scatter;  // x_A, γ_x, u_x, x_B, p_A, γ_p, u_p, p_B
    std::vector<double> phase_trace;
};

/// Phase alignment of both parties against γ, displacement and estimation.
inline FrameResult process_frame(const ProtocolConfig& cfg, const Frame& f, const channel::CalibrationRecord& calib) {
    const std::size_t n = f.alice.size();
    if (f.bob.size() != n || f.gamma.size() != n) throw DomainError("process_frame: array lengths differ");
    FrameResult r;
    r.id = f.id;
    r.meta = f.meta;
    r.n_used = n;
    r.phase_trace = f.phase_trace;

    // γ carries Alice as α_A and Bob as -conj(α_B).
    const auto al = dsp::phase_align(f.alice, f.gamma);
    Symbols bob_ref(n);
    for (std::size_t i = 0; i < n; ++i) bob_ref[i] = -std::conj(f.bob[i]);
    const auto bl = dsp::phase_align(bob_ref, f.gamma);
    Symbols bob(n);
    for (std::size_t i = 0; i < n; ++i) bob[i] = -std::conj(bl.rotated[i]);
    r.theta_a = al.theta;
    r.theta_b = -bl.theta;

    const auto d = postprocess::displacement_infer(f.gamma, bob);
    r.coeffs = d.coeffs;
    r.est = postprocess::estimate_channel(al.rotated, bob, f.gamma, &calib, cfg.eta);

    std::vector<double> ax(n), gx(n), ux(n), bx(n);
    for (std::size_t i = 0; i < n; ++i) {
        ax[i] = al.rotated[i].real();
        gx[i] = f.gamma[i].real();
        ux[i] = d.inferred[i].real();
        bx[i] = bob[i].real();
    }
    r.corr_ux_xa = stats::correlation(ux, ax);
    r.corr_gx_xa = stats::correlation(gx, ax);
    r.corr_ux_xb = stats::correlation(ux, bx);
    for (std::size_t i = 0; i < std::min(n, kScatterPoints); ++i)
        r.scatter.push_back({ax[i], gx[i], ux[i], bx[i], al.rotated[i].imag(), f.gamma[i].imag(), d.inferred[i].imag(), bob[i].imag()});
    return r;
}

// ---------------------------------------------------------------- run

struct RunReport {
    ProtocolConfig config;
    channel::CalibrationRecord calib;
    std::vector<FrameResult> frames;
    bool has_estimate = false;
    postprocess::EstimationResult estimate;
    keyrate::KeyRateReport keyrate;
    std::uint64_t pa_output_bits = 0;
};

inline keyrate::EbModel base_model(const ProtocolConfig& cfg) {
    keyrate::EbModel m;
    m.v_a = cfg.v_a;
    m.v_b = cfg.v_b;
    m.eta = cfg.eta;
    m.trusted_eta = cfg.trusted_eta;
    return m;
}

/// Pools frames, bounds the estimates and computes key rates. Runs with a
/// single frame have no scatter and use the point estimates as bounds.
inline RunReport finalize(const ProtocolConfig& cfg, const channel::CalibrationRecord& calib, std::vector<FrameResult> frames) {
    RunReport rep;
    rep.config = cfg;
    rep.calib = calib;
    rep.frames = std::move(frames);
    if (rep.frames.empty()) return rep;
    std::vector<postprocess::EstimationResult> ests;
    for (const auto& f : rep.frames) ests.push_back(f.est);
    stage("estimate", [&] {
        const auto merged = postprocess::merge_frames(ests);
        rep.estimate = ests.size() >= 2 ? postprocess::worst_case_bounds(merged, cfg.epsilon_pe, ests.size())
                                        : postprocess::point_bounds(merged, cfg.epsilon_pe);
        return 0;
    });
    stage("keyrate", [&] {
        keyrate::FiniteSizeOptions o;
        o.n_block = rep.estimate.n_used;
        o.beta_ir = cfg.beta_ir;
        o.fer = cfg.fer;
        o.symbol_rate = cfg.symbol_rate;
        o.correction_c = cfg.finite_size_c;
        rep.keyrate = keyrate::rate_finite(base_model(cfg), rep.estimate, o);
        return 0;
    });
    rep.has_estimate = true;
    rep.pa_output_bits = static_cast<std::uint64_t>(std::floor(rep.keyrate.rate_finite * static_cast<double>(rep.estimate.n_used)));
    return rep;
}

/// Full pipeline, frame by frame. `on_frame` sees every received frame.
inline RunReport run_experiment(const ProtocolConfig& cfg, const std::function<void(const Frame&)>& on_frame = {}) {
    stage("config", [&] {
        cfg.validate();
        return 0;
    });
    const auto calib = stage("calibrate", [&] { return calibrate(cfg); });
    std::vector<FrameResult> results;
    for (std::size_t i = 0; i < cfg.n_frames(); ++i) {
        auto raw = stage("simulate", [&] { return simulate_frame(cfg, i); });
        const auto rx = stage("dsp", [&] { return receive_frame(cfg, std::move(raw), calib); });
        if (on_frame) on_frame(rx);
        results.push_back(stage("estimate", [&] { return process_frame(cfg, rx, calib); }));
    }
    return finalize(cfg, calib, std::move(results));
}

// ---------------------------------------------------------------- estimate / key-rate records

inline nlohmann::ordered_json estimate_to_json(const postprocess::EstimationResult& e) {
    return {{"tau_a_hat", e.tau_a_hat},
            {"tau_b_hat", e.tau_b_hat},
            {"xi_hat_relay", e.xi_hat_relay},
            {"xi_negative", e.xi_negative},
            {"tau_a_wc", e.tau_a_wc},
            {"tau_b_wc", e.tau_wc},
            {"xi_wc", e.xi_wc},
            {"epsilon_pe", e.epsilon_pe},
            {"bounds_set", e.bounds_set},
            {"n_used", e.n_used},
            {"electronic_noise_snu", e.electronic_noise_snu},
            {"frame_xi", e.frame_xi},
            {"frame_tau_a", e.frame_tau_a},
            {"frame_tau_b", e.frame_tau_b},
            {"frame_n", e.frame_n}};
}

inline postprocess::EstimationResult estimate_from_json(const nlohmann::json& j) {
    try {
        postprocess::EstimationResult e;
        e.tau_a_hat = j.at("tau_a_hat").get<double>();
        e.tau_b_hat = j.at("tau_b_hat").get<double>();
        e.xi_hat_relay = j.at("xi_hat_relay").get<double>();
        e.xi_negative = j.at("xi_negative").get<bool>();
        e.tau_a_wc = j.at("tau_a_wc").get<double>();
        e.tau_wc = j.at("tau_b_wc").get<double>();
        e.xi_wc = j.at("xi_wc").get<double>();
        e.epsilon_pe = j.at("epsilon_pe").get<double>();
        e.bounds_set = j.at("bounds_set").get<bool>();
        e.n_used = j.at("n_used").get<std::size_t>();
        e.electronic_noise_snu = j.at("electronic_noise_snu").get<double>();
        e.frame_xi = j.at("frame_xi").get<std::vector<double>>();
        e.frame_tau_a = j.at("frame_tau_a").get<std::vector<double>>();
        e.frame_tau_b = j.at("frame_tau_b").get<std::vector<double>>();
        e.frame_n = j.at("frame_n").get<std::vector<std::size_t>>();
        return e;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("estimate record: ") + e.what());
    }
}

inline nlohmann::ordered_json keyrate_to_json(const keyrate::KeyRateReport& k) {
    return {{"i_ab", k.i_ab},
            {"chi", k.chi},
            {"chi_worst", k.chi_worst},
            {"beta_ir", k.beta_ir},
            {"fer", k.fer},
            {"correction", k.correction},
            {"rate_asym_signed", k.rate_asym_signed},
            {"rate_asym", k.rate_asym},
            {"rate_finite_signed", k.rate_finite_signed},
            {"rate_finite", k.rate_finite},
            {"symbol_rate", k.symbol_rate},
            {"throughput", k.throughput}};
}

// ---------------------------------------------------------------- report files

namespace detail {

inline std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream f(p, std::ios::trunc);
    if (!f) throw IoError("cannot write '" + p.string() + "'");
    return f;
}

inline void finish(std::ofstream& f, const std::filesystem::path& p) {
    f.flush();
    if (!f) throw IoError("failed writing '" + p.string() + "'");
}

}  // namespace detail

inline void write_json(const std::filesystem::path& p, const nlohmann::ordered_json& j) {
    auto f = detail::open_out(p);
    f << j.dump(2) << '\n';
    detail::finish(f, p);
}

inline nlohmann::json read_json(const std::filesystem::path& p) {
    std::ifstream f(p);
    if (!f) throw IoError("cannot read '" + p.string() + "'");
    try {
        return nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("'" + p.string() + "': " + e.what());
    }
}

inline nlohmann::ordered_json summary_json(const RunReport& r) {
    const auto& c = r.config;
    nlohmann::ordered_json j;
    j["format"] = "cvmdi-report/1";
    j["mode"] = to_string(c.mode);
    j["seed"] = c.seed;
    char digest[20];
    std::snprintf(digest, sizeof digest, "%016llx", static_cast<unsigned long long>(c.digest()));
    j["config_digest"] = digest;
    j["parameters"] = {{"V_A", c.v_a},
                       {"V_B", c.v_b},
                       {"B", c.symbol_rate},
                       {"N", c.n_symbols},
                       {"xi", c.target_xi_relay()},
                       {"tau_A", c.tau_a},
                       {"tau_B", c.tau_b},
                       {"eta", c.eta},
                       {"beta", c.beta_ir},
                       {"epsilon_pe", c.epsilon_pe},
                       {"nu_el", c.effective_nu_el()}};
    j["frames"] = r.frames.size();
    j["zero_frames"] = r.frames.empty();
    j["calibration"] = calibration_to_json(r.calib);
    if (r.has_estimate) {
        j["estimate"] = estimate_to_json(r.estimate);
        j["keyrate"] = keyrate_to_json(r.keyrate);
        j["privacy_amplification"] = {{"input_symbols", r.estimate.n_used}, {"output_bits", r.pa_output_bits}};
    } else {
        j["estimate"] = nullptr;
        j["keyrate"] = nullptr;
        j["privacy_amplification"] = nullptr;
    }
    return j;
}

/// summary.json, frames.tsv, correlation.tsv, phase.tsv and keyrate.tsv.
inline void emit_report(const RunReport& r, const std::filesystem::path& dir) {
    using detail::num;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());

    write_json(dir / "summary.json", summary_json(r));

    {
        const auto p = dir / "frames.tsv";
        auto f = detail::open_out(p);
        f << "frame_id\tn_generated\tn_used\txi_hat\ttau_a_hat\ttau_b_hat\ttheta_a\ttheta_b\tdelay_a\tdelay_b\t"
             "phase_mean\tphase_std\tcorr_ux_xa\tcorr_gx_xa\tcorr_ux_xb\n";
        for (const auto& fr : r.frames) {
            f << fr.id << '\t' << fr.meta.n_generated << '\t' << fr.n_used << '\t' << num(fr.est.xi_hat_relay) << '\t'
              << num(fr.est.tau_a_hat) << '\t' << num(fr.est.tau_b_hat) << '\t' << num(fr.theta_a) << '\t' << num(fr.theta_b)
              << '\t' << num(fr.meta.delay_a) << '\t' << num(fr.meta.delay_b) << '\t'
              << (fr.meta.has_phase ? num(fr.meta.phase_mean) : "nan") << '\t'
              << (fr.meta.has_phase ? num(fr.meta.phase_std) : "nan") << '\t' << num(fr.corr_ux_xa) << '\t'
              << num(fr.corr_gx_xa) << '\t' << num(fr.corr_ux_xb) << '\n';
        }
        detail::finish(f, p);
    }
    {
        const auto p = dir / "correlation.tsv";
        auto f = detail::open_out(p);
        f << "frame_id\tindex\tx_a\tgamma_x\tu_x\tx_b\tp_a\tgamma_p\tu_p\tp_b\n";
        for (const auto& fr : r.frames)
            for (std::size_t i = 0; i < fr.scatter.size(); ++i) {
                f << fr.id << '\t' << i;
                for (double v : fr.scatter[i]) f << '\t' << num(v);
                f << '\n';
            }
        detail::finish(f, p);
    }
    {
        const auto p = dir / "phase.tsv";
        auto f = detail::open_out(p);
        f << "frame_id\tindex\ttime_s\tphase_rad\n";
        for (const auto& fr : r.frames)
            for (std::size_t i = 0; i < fr.phase_trace.size(); ++i)
                f << fr.id << '\t' << i << '\t'
                  << num(static_cast<double>(i * fr.meta.phase_step) / r.config.sample_rate) << '\t'
                  << num(fr.phase_trace[i]) << '\n';
        detail::finish(f, p);
    }
    {
        const auto p = dir / "keyrate.tsv";
        auto f = detail::open_out(p);
        f << "quantity\tvalue\n";
        if (r.has_estimate) {
            const auto rows = keyrate_to_json(r.keyrate);
            for (const auto& [k, v] : rows.items()) f << k << '\t' << num(v.get<double>()) << '\n';
        }
        detail::finish(f, p);
    }
}

}  // namespace cvmdi::harness
