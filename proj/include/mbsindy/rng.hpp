// Self-contained deterministic random generator.
//
// Results must be reproducible bit-for-bit across platforms, standard
// libraries, and thread counts, so no std::* distribution is used anywhere:
// the stream is xoshiro256++ seeded through splitmix64, and the
// distributions are written out explicitly. Independent streams are derived
// from one root seed by a counter (fork), which lets every bootstrap
// replicate own its stream no matter which thread runs it.
#pragma once

#include <cmath>
#include <cstdint>

#include "common.hpp"

namespace mbsindy {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t v, int k) {
    return (v << k) | (v >> (64 - k));
}

}  // namespace detail

class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : s_) word = detail::splitmix64(sm);
    }

    // Stream `stream` of the family rooted at `root_seed`. Distinct counters
    // give statistically independent streams.
    static Rng fork(std::uint64_t root_seed, std::uint64_t stream) {
        std::uint64_t sm = root_seed;
        std::uint64_t mixed = detail::splitmix64(sm) ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
        return Rng(mixed);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = detail::rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = detail::rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n), unbiased via rejection.
    std::uint64_t uniform_below(std::uint64_t n) {
        if (n == 0) throw InvalidParameterError("uniform_below: n must be positive");
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    // Standard normal via Box-Muller; one fresh pair of uniforms per call.
    double normal() {
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.28318530717958647692 * u2);
    }

private:
    std::uint64_t s_[4];
};

}  // namespace mbsindy
