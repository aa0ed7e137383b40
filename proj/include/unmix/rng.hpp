#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace unmix {

using Rng = std::mt19937_64;

// Stable seed derivation for independent substreams (per epoch, per batch, ...).
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    return splitmix64(splitmix64(seed ^ splitmix64(a)) ^ splitmix64(~b));
}

// Uniform in [0,1). Drawn from the top 53 bits so results do not depend on
// std::uniform_real_distribution implementation details.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

// Standard normal via Box-Muller (one value per call; deterministic across
// standard libraries, unlike std::normal_distribution).
inline double normal01(Rng& rng) {
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    // modulo bias is negligible for n << 2^64
    return rng() % n;
}

}  // namespace unmix
