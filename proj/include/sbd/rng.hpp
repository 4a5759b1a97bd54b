#pragma once

#include <cstdint>
#include <random>

namespace sbd {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer (Steele, Lea, Flood 2014).
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Seed of stream `index` derived from a master seed:
///   stream_seed(seed, i) = splitmix64(seed XOR splitmix64(i)).
/// Replica i and verification trial i both use this derivation, so results
/// do not depend on thread scheduling.
constexpr std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) noexcept {
    return splitmix64(seed ^ splitmix64(index));
}

inline Rng make_stream(std::uint64_t seed, std::uint64_t index) {
    return Rng(stream_seed(seed, index));
}

}  // namespace sbd
