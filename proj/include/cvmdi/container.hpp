#pragma once

// CVM1 frame container. All integers and floats are little-endian.
//
//   "CVM1"            4 bytes
//   version           u16   (currently 1)
//   config digest     u64   FNV-1a of the canonical config text
//   kind              u8    see ContainerKind
//   frame count       u32
//   per frame:
//     frame id        u64
//     array count     u32
//     per array:      u64 length, then length × f64
//
// Frame arrays, in order: alice x, alice p, bob x, bob p, gamma x, gamma p,
// metadata, pilot phase trace (possibly empty). Metadata holds n_generated,
// delay_a, delay_b, phase_mean, phase_std, has_phase, phase_step (input
// samples per trace point). A plain-text copy of the config is written next to
// the container as `<file>.cfg`.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "cvmdi/channel.hpp"
#include "cvmdi/config.hpp"
#include "cvmdi/error.hpp"

namespace cvmdi::container {

static_assert(std::endian::native == std::endian::little, "CVM1 I/O assumes a little-endian host");

inline constexpr std::array<char, 4> kMagic{'C', 'V', 'M', '1'};
inline constexpr std::uint16_t kVersion = 1;

enum class ContainerKind : std::uint8_t {
    RawSymbols = 1,  // symbol-level records, γ in raw detector units
    RawWaveform = 2, // Alice and Bob symbols, γ as raw detector samples
    Processed = 3,   // paired symbols and SNU-calibrated γ after DSP
};

struct FrameMeta {
    std::size_t n_generated = 0;  // symbols generated for the frame
    double delay_a = 0.0;
    double delay_b = 0.0;
    double phase_mean = 0.0;
    double phase_std = 0.0;
    bool has_phase = false;
    std::size_t phase_step = 1;
};

struct Frame {
    std::uint64_t id = 0;
    channel::Symbols alice, bob, gamma;
    FrameMeta meta;
    std::vector<double> phase_trace;
};

struct Header {
    std::uint16_t version = kVersion;
    std::uint64_t config_digest = 0;
    ContainerKind kind = ContainerKind::RawSymbols;
    std::uint32_t n_frames = 0;
};

namespace detail {

template <class T>
void put(std::ostream& o, T v) {
    o.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw IoError("container: truncated file");
    return v;
}

inline void put_array(std::ostream& o, const std::vector<double>& a) {
    put<std::uint64_t>(o, a.size());
    o.write(reinterpret_cast<const char*>(a.data()), static_cast<std::streamsize>(a.size() * sizeof(double)));
}

inline std::vector<double> get_array(std::istream& in, std::uint64_t max_len) {
    const auto n = get<std::uint64_t>(in);
    if (n > max_len) throw IoError("container: array length out of range");
    std::vector<double> a(n);
    if (!in.read(reinterpret_cast<char*>(a.data()), static_cast<std::streamsize>(n * sizeof(double))))
        throw IoError("container: truncated array");
    return a;
}

inline std::vector<double> part(const channel::Symbols& s, bool imag) {
    std::vector<double> v(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) v[i] = imag ? s[i].imag() : s[i].real();
    return v;
}

inline channel::Symbols join(const std::vector<double>& x, const std::vector<double>& p) {
    if (x.size() != p.size()) throw IoError("container: quadrature arrays differ in length");
    channel::Symbols s(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) s[i] = {x[i], p[i]};
    return s;
}

}  // namespace detail

/// Streams frames to disk; the frame count is fixed up front.
class Writer {
public:
    Writer(const std::string& path, const ProtocolConfig& cfg, ContainerKind kind, std::uint32_t n_frames)
        : out_(path, std::ios::binary | std::ios::trunc), expected_(n_frames) {
        if (!out_) throw IoError("cannot write container '" + path + "'");
        out_.write(kMagic.data(), kMagic.size());
        detail::put(out_, kVersion);
        detail::put(out_, cfg.digest());
        detail::put(out_, static_cast<std::uint8_t>(kind));
        detail::put(out_, n_frames);
        std::ofstream side(path + ".cfg", std::ios::trunc);
        if (!side) throw IoError("cannot write config sidecar for '" + path + "'");
        side << cfg.to_text();
        if (!side) throw IoError("failed writing config sidecar for '" + path + "'");
    }

    void write(const Frame& f) {
        if (written_ == expected_) throw IoError("container: more frames than declared");
        detail::put(out_, f.id);
        detail::put<std::uint32_t>(out_, 8);
        for (const auto* s : {&f.alice, &f.bob, &f.gamma}) {
            detail::put_array(out_, detail::part(*s, false));
            detail::put_array(out_, detail::part(*s, true));
        }
        detail::put_array(out_, {static_cast<double>(f.meta.n_generated), f.meta.delay_a, f.meta.delay_b, f.meta.phase_mean,
                                 f.meta.phase_std, f.meta.has_phase ? 1.0 : 0.0, static_cast<double>(f.meta.phase_step)});
        detail::put_array(out_, f.phase_trace);
        ++written_;
        if (!out_) throw IoError("container: write failed");
    }

    void close() {
        if (written_ != expected_) throw IoError("container: fewer frames than declared");
        out_.flush();
        if (!out_) throw IoError("container: flush failed");
        out_.close();
    }

private:
    std::ofstream out_;
    std::uint32_t expected_;
    std::uint32_t written_ = 0;
};

class Reader {
public:
    explicit Reader(const std::string& path) : in_(path, std::ios::binary) {
        if (!in_) throw IoError("cannot read container '" + path + "'");
        std::array<char, 4> magic{};
        if (!in_.read(magic.data(), magic.size()) || magic != kMagic) throw IoError("'" + path + "' is not a CVM1 container");
        header_.version = detail::get<std::uint16_t>(in_);
        if (header_.version != kVersion) throw IoError("container: unsupported version " + std::to_string(header_.version));
        header_.config_digest = detail::get<std::uint64_t>(in_);
        const auto kind = detail::get<std::uint8_t>(in_);
        if (kind < 1 || kind > 3) throw IoError("container: unknown kind");
        header_.kind = static_cast<ContainerKind>(kind);
        header_.n_frames = detail::get<std::uint32_t>(in_);
    }

    const Header& header() const { return header_; }
    bool done() const { return read_ == header_.n_frames; }

    Frame next() {
        if (done()) throw IoError("container: no more frames");
        constexpr std::uint64_t max_len = std::uint64_t{1} << 32;
        Frame f;
        f.id = detail::get<std::uint64_t>(in_);
        if (detail::get<std::uint32_t>(in_) != 8) throw IoError("container: unexpected array count");
        std::array<std::vector<double>, 6> q;
        for (auto& a : q) a = detail::get_array(in_, max_len);
        f.alice = detail::join(q[0], q[1]);
        f.bob = detail::join(q[2], q[3]);
        f.gamma = detail::join(q[4], q[5]);
        const auto m = detail::get_array(in_, 64);
        if (m.size() != 7) throw IoError("container: bad metadata");
        f.meta = {static_cast<std::size_t>(m[0]), m[1], m[2], m[3], m[4], m[5] != 0.0, static_cast<std::size_t>(m[6])};
        f.phase_trace = detail::get_array(in_, max_len);
        ++read_;
        return f;
    }

private:
    std::ifstream in_;
    Header header_;
    std::uint32_t read_ = 0;
};

}  // namespace cvmdi::container
