// Command-line front end for the CV-MDI-QKD simulator.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cvmdi/cvmdi.hpp"

namespace fs = std::filesystem;
using namespace cvmdi;

namespace {

enum Exit : int { kOk = 0, kUnexpected = 1, kConfig = 2, kSync = 3, kNumerical = 4, kIo = 5 };

int exit_code(ErrorKind k) {
    switch (k) {
        case ErrorKind::Domain:
        case ErrorKind::Config: return kConfig;
        case ErrorKind::Sync: return kSync;
        case ErrorKind::Numerical: return kNumerical;
        case ErrorKind::Io: return kIo;
    }
    return kUnexpected;
}

struct Options {
    std::string config;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mode;
    std::optional<std::uint64_t> frames;
};

const fs::path kCalibration = "calibration.json";
const fs::path kRawFrames = "frames.cvm";
const fs::path kProcessed = "processed.cvm";
const fs::path kEstimate = "estimate.json";
const fs::path kKeyrate = "keyrate.json";

void log(const std::string& msg) { std::fprintf(stderr, "cvmdi: %s\n", msg.c_str()); }

/// The config file (or the defaults) with command-line overrides applied.
ProtocolConfig resolve(const Options& o, const std::optional<fs::path>& fallback = std::nullopt) {
    ProtocolConfig c;
    if (!o.config.empty())
        c = ProtocolConfig::load(o.config);
    else if (fallback && fs::exists(*fallback))
        c = ProtocolConfig::load(fallback->string());
    if (o.seed) c.seed = *o.seed;
    if (o.mode) c.mode = parse_mode(*o.mode);
    if (o.frames) {
        if (*o.frames == 0) throw ConfigError("--frames must be positive");
        c.n_symbols = *o.frames * c.symbols_per_frame();
    }
    c.validate();
    return c;
}

/// Config for a stage that reads a container: taken from the container's
/// sidecar unless given explicitly, and checked against the header digest.
ProtocolConfig config_for(const Options& o, const fs::path& container_path, const container::Header& h) {
    const auto c = resolve(o, fs::path(container_path.string() + ".cfg"));
    if (c.digest() != h.config_digest)
        throw ConfigError("configuration does not match the one recorded in '" + container_path.string() + "'");
    return c;
}

channel::CalibrationRecord load_calibration(const fs::path& dir) {
    const auto p = dir / kCalibration;
    if (!fs::exists(p)) throw ConfigError("shot-noise calibration missing: run 'calibrate' first (" + p.string() + ")");
    return harness::calibration_from_json(harness::read_json(p));
}

void ensure_dir(const fs::path& d) {
    std::error_code ec;
    fs::create_directories(d, ec);
    if (ec) throw IoError("cannot create '" + d.string() + "': " + ec.message());
}

// ---------------------------------------------------------------- subcommands

int cmd_calibrate(const Options& o) {
    const auto cfg = resolve(o);
    ensure_dir(o.out);
    const auto rec = harness::stage("calibrate", [&] { return harness::calibrate(cfg); });
    harness::write_json(fs::path(o.out) / kCalibration, harness::calibration_to_json(rec));
    log("wrote " + (fs::path(o.out) / kCalibration).string());
    return kOk;
}

int cmd_simulate(const Options& o) {
    const auto cfg = resolve(o);
    ensure_dir(o.out);
    const auto path = fs::path(o.out) / kRawFrames;
    const auto kind = cfg.mode == RunMode::Symbol ? container::ContainerKind::RawSymbols : container::ContainerKind::RawWaveform;
    container::Writer w(path.string(), cfg, kind, static_cast<std::uint32_t>(cfg.n_frames()));
    for (std::size_t i = 0; i < cfg.n_frames(); ++i) {
        w.write(harness::stage("simulate", [&] { return harness::simulate_frame(cfg, i); }));
        log("simulated frame " + std::to_string(i + 1) + "/" + std::to_string(cfg.n_frames()));
    }
    w.close();
    log("wrote " + path.string());
    return kOk;
}

int cmd_dsp(const Options& o) {
    const auto in_path = fs::path(o.out) / kRawFrames;
    container::Reader r(in_path.string());
    if (r.header().kind == container::ContainerKind::Processed) throw ConfigError("'" + in_path.string() + "' is already processed");
    auto cfg = config_for(o, in_path, r.header());
    const auto expected = r.header().kind == container::ContainerKind::RawSymbols ? RunMode::Symbol : RunMode::Waveform;
    if (cfg.mode != expected) throw ConfigError("mode does not match the recorded frames");
    const auto calib = load_calibration(o.out);
    const auto out_path = fs::path(o.out) / kProcessed;
    container::Writer w(out_path.string(), cfg, container::ContainerKind::Processed, r.header().n_frames);
    while (!r.done()) {
        auto raw = r.next();
        w.write(harness::stage("dsp", [&] { return harness::receive_frame(cfg, std::move(raw), calib); }));
    }
    w.close();
    log("wrote " + out_path.string());
    return kOk;
}

/// Processed frames through alignment, displacement and estimation.
harness::RunReport analyse(const Options& o) {
    const auto in_path = fs::path(o.out) / kProcessed;
    container::Reader r(in_path.string());
    if (r.header().kind != container::ContainerKind::Processed) throw ConfigError("'" + in_path.string() + "' is not processed");
    const auto cfg = config_for(o, in_path, r.header());
    const auto calib = load_calibration(o.out);
    std::vector<harness::FrameResult> results;
    while (!r.done()) {
        const auto f = r.next();
        results.push_back(harness::stage("estimate", [&] { return harness::process_frame(cfg, f, calib); }));
    }
    return harness::finalize(cfg, calib, std::move(results));
}

int cmd_estimate(const Options& o) {
    const auto rep = analyse(o);
    const auto p = fs::path(o.out) / kEstimate;
    harness::write_json(p, rep.has_estimate ? harness::estimate_to_json(rep.estimate) : nlohmann::ordered_json(nullptr));
    log("wrote " + p.string());
    return kOk;
}

int cmd_keyrate(const Options& o) {
    const auto cfg = resolve(o, fs::path(o.out) / (kProcessed.string() + ".cfg"));
    const auto j = harness::read_json(fs::path(o.out) / kEstimate);
    if (j.is_null()) throw ConfigError("estimate.json holds no estimate (zero frames)");
    const auto est = harness::estimate_from_json(j);
    keyrate::FiniteSizeOptions fo;
    fo.n_block = est.n_used;
    fo.beta_ir = cfg.beta_ir;
    fo.fer = cfg.fer;
    fo.symbol_rate = cfg.symbol_rate;
    fo.correction_c = cfg.finite_size_c;
    const auto k = harness::stage("keyrate", [&] { return keyrate::rate_finite(harness::base_model(cfg), est, fo); });
    const auto p = fs::path(o.out) / kKeyrate;
    harness::write_json(p, harness::keyrate_to_json(k));
    log("wrote " + p.string());
    return kOk;
}

void print_summary(const harness::RunReport& rep) {
    if (!rep.has_estimate) {
        std::printf("frames 0\n");
        return;
    }
    std::printf("frames %zu  symbols %zu\n", rep.frames.size(), rep.estimate.n_used);
    std::printf("xi_hat %.5f SNU  xi_wc %.5f SNU  tau_a %.4f  tau_b %.4f\n", rep.estimate.xi_hat_relay, rep.estimate.xi_wc,
                rep.estimate.tau_a_hat, rep.estimate.tau_b_hat);
    std::printf("rate_asym %.5f  rate_finite %.5f bit/use  throughput %.4g bit/s\n", rep.keyrate.rate_asym,
                rep.keyrate.rate_finite, rep.keyrate.throughput);
}

int cmd_report(const Options& o) {
    const auto rep = analyse(o);
    harness::emit_report(rep, fs::path(o.out));
    print_summary(rep);
    return kOk;
}

int cmd_run(const Options& o) {
    const auto cfg = resolve(o);
    ensure_dir(o.out);
    const auto calib = harness::stage("calibrate", [&] { return harness::calibrate(cfg); });
    harness::write_json(fs::path(o.out) / kCalibration, harness::calibration_to_json(calib));
    std::vector<harness::FrameResult> results;
    for (std::size_t i = 0; i < cfg.n_frames(); ++i) {
        auto raw = harness::stage("simulate", [&] { return harness::simulate_frame(cfg, i); });
        const auto rx = harness::stage("dsp", [&] { return harness::receive_frame(cfg, std::move(raw), calib); });
        results.push_back(harness::stage("estimate", [&] { return harness::process_frame(cfg, rx, calib); }));
        log("frame " + std::to_string(i + 1) + "/" + std::to_string(cfg.n_frames()));
    }
    const auto rep = harness::finalize(cfg, calib, std::move(results));
    harness::emit_report(rep, fs::path(o.out));
    print_summary(rep);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CV-MDI-QKD simulator: calibration, simulation, DSP, estimation and key rates"};
    app.require_subcommand(1);
    Options o;
    auto common = [&o](CLI::App* s) {
        s->add_option("-c,--config", o.config, "key = value configuration file");
        s->add_option("-o,--out", o.out, "output directory")->capture_default_str();
        s->add_option("--seed", o.seed, "override the master seed");
        s->add_option("--mode", o.mode, "symbol or waveform")->check(CLI::IsMember({"symbol", "waveform"}));
        s->add_option("--frames", o.frames, "number of frames (sets n_symbols)");
    };
    struct Sub {
        const char* name;
        const char* help;
        int (*fn)(const Options&);
    };
    const Sub subs[] = {
        {"calibrate", "measure shot noise and electronic noise, write calibration.json", cmd_calibrate},
        {"simulate", "generate raw frames into frames.cvm", cmd_simulate},
        {"dsp", "receiver processing of frames.cvm into processed.cvm", cmd_dsp},
        {"estimate", "parameter estimation on processed.cvm, write estimate.json", cmd_estimate},
        {"keyrate", "key rates from estimate.json, write keyrate.json", cmd_keyrate},
        {"report", "report files from processed.cvm", cmd_report},
        {"run", "end-to-end run with report", cmd_run},
    };
    int (*chosen)(const Options&) = nullptr;
    for (const auto& s : subs) {
        auto* sub = app.add_subcommand(s.name, s.help);
        common(sub);
        sub->callback([&chosen, fn = s.fn] { chosen = fn; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }
    try {
        return chosen(o);
    } catch (const Error& e) {
        std::fprintf(stderr, "cvmdi: error (%s): %s\n", to_string(e.kind()), e.what());
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "cvmdi: unexpected error: %s\n", e.what());
        return kUnexpected;
    }
}
