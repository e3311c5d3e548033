#pragma once

// Deterministic random streams. Every (master seed, frame, role) triple maps to
// an independent engine so frames can be simulated in any order or in parallel
// and still reproduce bit-for-bit.

#include <cstdint>
#include <random>

namespace cvmdi {

enum class StreamRole : std::uint64_t {
    AliceSymbols = 1,
    BobSymbols,
    AliceChannel,
    BobChannel,
    RelayNoise,
    Calibration,
    PrivacySeed,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of the stream owned by `role` in frame `frame` of a run.
inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t frame, StreamRole role) {
    return splitmix64(splitmix64(splitmix64(master) ^ frame) ^ static_cast<std::uint64_t>(role));
}

/// Derive a child seed from a parent (used inside operations that need more
/// than one stream from a single caller-supplied seed).
inline std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t index) {
    return splitmix64(seed ^ splitmix64(index + 0x5851f42d4c957f2dULL));
}

using Engine = std::mt19937_64;

}  // namespace cvmdi
