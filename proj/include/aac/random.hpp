#pragma once

#include <cstdint>
#include <random>

namespace aac {

/// Uniform double in [0, 1) from the top 53 bits of one engine draw. Used
/// instead of std::uniform_real_distribution so that sampled streams do not
/// depend on the standard library implementation.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& rng, double low, double high) {
    return low + (high - low) * uniform01(rng);
}

/// Uniform integer in [0, n).
inline std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Seed of run (i, j) under a master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t i, std::uint64_t j) {
    return splitmix64(splitmix64(splitmix64(master) ^ i) ^ j);
}

}  // namespace aac
