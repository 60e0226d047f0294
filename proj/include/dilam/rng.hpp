#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "dilam/common.hpp"

namespace dilam {

/// Deterministic RNG. mt19937_64 supplies the bit stream; the distributions
/// are implemented here rather than via <random> adapters, whose output is
/// implementation-defined. Two runs with the same seed draw identical values.
class Rng {
  public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t next() { return eng_(); }

    /// Uniform in [0, 1) with 53-bit resolution.
    double u01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

    /// Standard normal via Box-Muller (one value per call; the sine branch
    /// is discarded to keep the stream stateless).
    double normal() {
        double u1 = u01();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        double u2 = u01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
    uint64_t uniform_int(uint64_t n) {
        if (n == 0) return 0;
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x = next();
        while (x >= limit) x = next();
        return x % n;
    }

    /// Fisher-Yates; std::shuffle's draw pattern is unspecified, this one is pinned.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    std::mt19937_64 eng_;
};

/// Fans a master seed out to per-stage streams; the tag keeps stages decoupled.
inline uint64_t derive_seed(uint64_t master, std::string_view tag) {
    uint64_t h = fnv1a64(&master, sizeof(master));
    h = fnv1a64(tag, h);
    // splitmix64 finalizer to spread low-entropy tags
    h += 0x9e3779b97f4a7c15ull;
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
    return h ^ (h >> 31);
}

}  // namespace dilam
