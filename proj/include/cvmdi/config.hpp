#pragma once

// Run configuration: a flat `key = value` text file. Blank lines and text
// after '#' are ignored; unknown or repeated keys are rejected.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include "cvmdi/channel.hpp"
#include "cvmdi/dsp.hpp"
#include "cvmdi/error.hpp"

namespace cvmdi {

enum class RunMode { Symbol, Waveform };

inline const char* to_string(RunMode m) { return m == RunMode::Symbol ? "symbol" : "waveform"; }

inline RunMode parse_mode(std::string_view s) {
    if (s == "symbol") return RunMode::Symbol;
    if (s == "waveform") return RunMode::Waveform;
    throw ConfigError("mode must be 'symbol' or 'waveform', got '" + std::string(s) + "'");
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

struct ProtocolConfig {
    // modulation and rates
    double v_a = 6.5;
    double v_b = 6.5;
    double symbol_rate = 20e6;
    double sample_rate = 1e9;
    std::uint64_t n_symbols = 4'000'000;
    // channels
    double tau_a = 1.0;
    double tau_b = 0.56;
    double xi_in_a = 0.0;
    double xi_in_b = 0.0;
    double phase_sigma_a = 0.0;
    double phase_sigma_b = 0.06;
    double phase_corr_len = 500.0;
    double phase_mean_a = 0.0;
    double phase_mean_b = -3.0;
    // relay; exactly one of nu_el and xi_relay is in effect
    double eta = 0.94;
    std::optional<double> nu_el;
    std::optional<double> xi_relay = 0.0395;
    double imbalance = 0.0;
    double detector_gain = 1.0;
    // DSP
    double pilot_freq = 15e6;
    double pilot_amplitude_ratio = 3.0;
    double pilot_bandwidth = 1e6;
    bool pilot_on_alice = false;
    bool pilot_on_bob = true;
    double rrc_roll_off = 0.2;
    std::uint64_t rrc_span = 20;
    double lowpass_cutoff = 13.5e6;
    std::uint64_t lowpass_taps = 1001;
    std::uint64_t delay_a = 137;
    std::uint64_t delay_b = 1237;
    std::uint64_t max_lag = 2000;
    // estimation and key rate
    double epsilon_pe = 1e-10;
    double beta_ir = 0.97;
    double fer = 0.0;
    double finite_size_c = 0.0;
    bool trusted_eta = true;
    // run
    std::uint64_t frame_samples = 10'000'000;
    std::uint64_t calibration_samples = 10'000'000;
    std::uint64_t seed = 1;
    RunMode mode = RunMode::Symbol;

    std::size_t samples_per_symbol() const { return static_cast<std::size_t>(std::llround(sample_rate / symbol_rate)); }
    std::size_t symbols_per_frame() const { return static_cast<std::size_t>(frame_samples) / samples_per_symbol(); }
    std::size_t n_frames() const {
        const std::size_t per = symbols_per_frame();
        return static_cast<std::size_t>((n_symbols + per - 1) / per);
    }
    std::size_t frame_symbols(std::size_t frame) const {
        const std::size_t per = symbols_per_frame();
        return std::min<std::size_t>(per, static_cast<std::size_t>(n_symbols) - frame * per);
    }

    /// Residual excess noise a phase std σ leaves on link k, relay referred.
    static double phase_excess(double tau, double v, double sigma) { return tau * v * (1.0 - std::exp(-sigma * sigma)); }

    /// Relay-referred excess noise from everything except the detector.
    double channel_excess() const {
        return phase_excess(tau_a, v_a, phase_sigma_a) + phase_excess(tau_b, v_b, phase_sigma_b) + tau_a * xi_in_a +
               tau_b * xi_in_b;
    }

    /// Detector noise in effect: explicit, or the remainder that brings the
    /// relay-referred total to xi_relay.
    double effective_nu_el() const {
        if (nu_el) return *nu_el;
        const double nu = 0.5 * eta * (*xi_relay - channel_excess());
        if (nu < -1e-15)
            throw ConfigError("xi_relay is smaller than the excess noise produced by the channel settings");
        return std::max(0.0, nu);
    }

    /// Relay-referred excess noise the configuration produces.
    double target_xi_relay() const { return channel_excess() + 2.0 * effective_nu_el() / eta; }

    channel::ChannelParams channel_a() const {
        return {tau_a, xi_in_a, phase_sigma_a, phase_corr_len, phase_mean_a};
    }
    channel::ChannelParams channel_b() const {
        return {tau_b, xi_in_b, phase_sigma_b, phase_corr_len, phase_mean_b};
    }
    channel::RelayParams relay() const { return {eta, effective_nu_el(), imbalance, detector_gain}; }
    dsp::RrcSpec rrc() const { return {rrc_roll_off, static_cast<std::size_t>(rrc_span), samples_per_symbol()}; }
    dsp::PilotSpec pilot() const { return {pilot_freq, pilot_amplitude_ratio}; }

    void validate() const {
        auto need = [](bool ok, const std::string& what) {
            if (!ok) throw ConfigError(what);
        };
        need(v_a >= 0.0 && v_b >= 0.0, "v_a and v_b must be >= 0");
        need(symbol_rate > 0.0 && sample_rate > 0.0, "rates must be positive");
        const double ratio = sample_rate / symbol_rate;
        need(std::abs(ratio - std::round(ratio)) < 1e-9 * ratio && ratio >= 2.0,
             "sample_rate / symbol_rate must be an integer >= 2");
        need(tau_a > 0.0 && tau_a <= 1.0 && tau_b > 0.0 && tau_b <= 1.0, "tau_a and tau_b must be in (0, 1]");
        need(xi_in_a >= 0.0 && xi_in_b >= 0.0, "xi_in_a and xi_in_b must be >= 0");
        need(phase_sigma_a >= 0.0 && phase_sigma_b >= 0.0, "phase sigmas must be >= 0");
        need(phase_corr_len > 0.0, "phase_corr_len must be > 0");
        need(std::isfinite(phase_mean_a) && std::isfinite(phase_mean_b), "phase means must be finite");
        need(eta > 0.0 && eta <= 1.0, "eta must be in (0, 1]");
        need(nu_el.has_value() != xi_relay.has_value(), "set exactly one of nu_el and xi_relay");
        if (nu_el) need(*nu_el >= 0.0, "nu_el must be >= 0");
        if (xi_relay) need(*xi_relay >= 0.0, "xi_relay must be >= 0");
        need(std::abs(imbalance) <= 0.05, "|imbalance| must be <= 0.05");
        need(detector_gain > 0.0, "detector_gain must be > 0");
        need(pilot_amplitude_ratio > 0.0, "pilot_amplitude_ratio must be > 0");
        need(pilot_bandwidth > 0.0, "pilot_bandwidth must be > 0");
        const double band_edge = (1.0 + rrc_roll_off) * symbol_rate / 2.0;
        need(pilot_freq > band_edge && pilot_freq < sample_rate / 2.0, "pilot_freq must lie between the band edge and Nyquist");
        need(pilot_freq - pilot_bandwidth > band_edge, "pilot tracking band overlaps the signal band");
        need(rrc_roll_off > 0.0 && rrc_roll_off < 1.0, "rrc_roll_off must be in (0, 1)");
        need(rrc_span > 0 && rrc_span % 2 == 0, "rrc_span must be even and positive");
        need(lowpass_cutoff > band_edge && lowpass_cutoff < pilot_freq, "lowpass_cutoff must lie between the band edge and the pilot");
        need(lowpass_taps >= 3 && lowpass_taps % 2 == 1, "lowpass_taps must be odd and >= 3");
        need(delay_a < max_lag && delay_b < max_lag, "delays must be below max_lag");
        need(epsilon_pe > 0.0 && epsilon_pe < 0.5, "epsilon_pe must be in (0, 0.5)");
        need(beta_ir > 0.0 && beta_ir <= 1.0, "beta_ir must be in (0, 1]");
        need(fer >= 0.0 && fer <= 1.0, "fer must be in [0, 1]");
        need(finite_size_c >= 0.0, "finite_size_c must be >= 0");
        need(symbols_per_frame() >= 1000, "frame_samples must hold at least 1e3 symbols");
        need(calibration_samples >= 100'000, "calibration_samples must be >= 1e5");
        (void)effective_nu_el();
    }

    // ------------------------------------------------------------ text form

    /// Canonical text: every key in fixed order, doubles at 17 significant digits.
    std::string to_text() const {
        std::ostringstream o;
        for (const auto& [key, field] : fields()) {
            const auto v = field.get(*this);
            if (v) o << key << " = " << *v << '\n';
        }
        return o.str();
    }

    std::uint64_t digest() const { return fnv1a(to_text()); }

    static ProtocolConfig parse(std::string_view text) {
        ProtocolConfig c;
        std::map<std::string, bool> seen;
        std::istringstream in{std::string(text)};
        std::string line;
        std::size_t lineno = 0;
        const auto table = fields();
        while (std::getline(in, line)) {
            ++lineno;
            if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            const auto trimmed = trim(line);
            if (trimmed.empty()) continue;
            const auto eq = trimmed.find('=');
            if (eq == std::string_view::npos)
                throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
            const std::string key(trim(trimmed.substr(0, eq)));
            const std::string value(trim(trimmed.substr(eq + 1)));
            const auto it = table.find(key);
            if (it == table.end()) throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
            if (seen[key]) throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
            seen[key] = true;
            try {
                it->second.set(c, value);
            } catch (const ConfigError& e) {
                throw ConfigError("line " + std::to_string(lineno) + ": " + key + ": " + e.what());
            }
        }
        // Setting one of the two relay-noise keys switches the other off.
        if (seen["nu_el"] && seen["xi_relay"]) throw ConfigError("nu_el and xi_relay are mutually exclusive");
        if (seen["nu_el"]) c.xi_relay.reset();
        if (seen["xi_relay"]) c.nu_el.reset();
        c.validate();
        return c;
    }

    static ProtocolConfig load(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw IoError("cannot read config file '" + path + "'");
        std::ostringstream s;
        s << f.rdbuf();
        return parse(s.str());
    }

private:
    static std::string_view trim(std::string_view s) {
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string_view::npos) return {};
        const auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }

    static std::string fmt(double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    }

    static double to_double(const std::string& s) {
        double v = 0.0;
        const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
        if (r.ec != std::errc{} || r.ptr != s.data() + s.size() || !std::isfinite(v))
            throw ConfigError("not a finite number: '" + s + "'");
        return v;
    }

    static std::uint64_t to_count(const std::string& s) {
        // Accepts integers and integral floating forms such as 4e6.
        std::uint64_t v = 0;
        const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
        if (r.ec == std::errc{} && r.ptr == s.data() + s.size()) return v;
        const double d = to_double(s);
        if (d < 0.0 || d != std::floor(d) || d > 9.0e18) throw ConfigError("not a non-negative integer: '" + s + "'");
        return static_cast<std::uint64_t>(d);
    }

    static bool to_bool(const std::string& s) {
        if (s == "true" || s == "1" || s == "yes") return true;
        if (s == "false" || s == "0" || s == "no") return false;
        throw ConfigError("not a boolean: '" + s + "'");
    }

    struct Field {
        std::function<std::optional<std::string>(const ProtocolConfig&)> get;
        std::function<void(ProtocolConfig&, const std::string&)> set;
    };

    using Table = std::map<std::string, Field>;

    static Field real(double ProtocolConfig::*m) {
        return {[m](const ProtocolConfig& c) { return std::optional(fmt(c.*m)); },
                [m](ProtocolConfig& c, const std::string& v) { c.*m = to_double(v); }};
    }
    static Field maybe_real(std::optional<double> ProtocolConfig::*m) {
        return {[m](const ProtocolConfig& c) { return (c.*m) ? std::optional(fmt(*(c.*m))) : std::nullopt; },
                [m](ProtocolConfig& c, const std::string& v) { c.*m = to_double(v); }};
    }
    static Field count(std::uint64_t ProtocolConfig::*m) {
        return {[m](const ProtocolConfig& c) { return std::optional(std::to_string(c.*m)); },
                [m](ProtocolConfig& c, const std::string& v) { c.*m = to_count(v); }};
    }
    static Field flag(bool ProtocolConfig::*m) {
        return {[m](const ProtocolConfig& c) { return std::optional(std::string(c.*m ? "true" : "false")); },
                [m](ProtocolConfig& c, const std::string& v) { c.*m = to_bool(v); }};
    }

    // std::map keeps the canonical text sorted by key.
    static Table fields() {
        using C = ProtocolConfig;
        return Table{
            {"v_a", real(&C::v_a)},
            {"v_b", real(&C::v_b)},
            {"symbol_rate", real(&C::symbol_rate)},
            {"sample_rate", real(&C::sample_rate)},
            {"n_symbols", count(&C::n_symbols)},
            {"tau_a", real(&C::tau_a)},
            {"tau_b", real(&C::tau_b)},
            {"xi_in_a", real(&C::xi_in_a)},
            {"xi_in_b", real(&C::xi_in_b)},
            {"phase_sigma_a", real(&C::phase_sigma_a)},
            {"phase_sigma_b", real(&C::phase_sigma_b)},
            {"phase_corr_len", real(&C::phase_corr_len)},
            {"phase_mean_a", real(&C::phase_mean_a)},
            {"phase_mean_b", real(&C::phase_mean_b)},
            {"eta", real(&C::eta)},
            {"nu_el", maybe_real(&C::nu_el)},
            {"xi_relay", maybe_real(&C::xi_relay)},
            {"imbalance", real(&C::imbalance)},
            {"detector_gain", real(&C::detector_gain)},
            {"pilot_freq", real(&C::pilot_freq)},
            {"pilot_amplitude_ratio", real(&C::pilot_amplitude_ratio)},
            {"pilot_bandwidth", real(&C::pilot_bandwidth)},
            {"pilot_on_alice", flag(&C::pilot_on_alice)},
            {"pilot_on_bob", flag(&C::pilot_on_bob)},
            {"rrc_roll_off", real(&C::rrc_roll_off)},
            {"rrc_span", count(&C::rrc_span)},
            {"lowpass_cutoff", real(&C::lowpass_cutoff)},
            {"lowpass_taps", count(&C::lowpass_taps)},
            {"delay_a", count(&C::delay_a)},
            {"delay_b", count(&C::delay_b)},
            {"max_lag", count(&C::max_lag)},
            {"epsilon_pe", real(&C::epsilon_pe)},
            {"beta_ir", real(&C::beta_ir)},
            {"fer", real(&C::fer)},
            {"finite_size_c", real(&C::finite_size_c)},
            {"trusted_eta", flag(&C::trusted_eta)},
            {"frame_samples", count(&C::frame_samples)},
            {"calibration_samples", count(&C::calibration_samples)},
            {"seed", count(&C::seed)},
            {"mode", Field{[](const C& c) { return std::optional(std::string(to_string(c.mode))); },
                           [](C& c, const std::string& v) { c.mode = parse_mode(v); }}},
        };
    }
};

}  // namespace cvmdi
