#pragma once

// Deterministic random streams.
//
// Generator: xoshiro256** (Blackman & Vigna). A stream is identified by a
// (seed, stream) pair; its 256-bit state is filled with four consecutive
// SplitMix64 outputs starting from
//     x0 = seed ^ splitmix64_mix(stream + 0x632BE59BD9B4E019)
// Derived draws:
//   uniform()        (next() >> 11) * 2^-53, in [0, 1)
//   uniform_int(n)   rejection of next() below (2^64 - n) mod n, then mod n
//   normal()         Box-Muller cosine branch, u1 = 1 - uniform(), one
//                    normal per two raw draws (no cached spare)
// Everything here is plain integer arithmetic except normal(), which relies
// on libm log/cos/sqrt.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace xaudit {

inline constexpr std::uint64_t splitmix64_mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

class SplitMix64 {
public:
    explicit constexpr SplitMix64(std::uint64_t state) noexcept : state_(state) {}
    constexpr std::uint64_t next() noexcept {
        state_ += 0x9E3779B97F4A7C15ULL;
        return splitmix64_mix(state_);
    }

private:
    std::uint64_t state_;
};

class Rng {
public:
    Rng(std::uint64_t seed, std::uint64_t stream) noexcept {
        SplitMix64 sm(seed ^ splitmix64_mix(stream + 0x632BE59BD9B4E019ULL));
        for (auto& word : s_) word = sm.next();
    }

    std::uint64_t next() noexcept {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, n). n must be > 0.
    std::uint64_t uniform_int(std::uint64_t n) noexcept {
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t r = next();
            if (r >= threshold) return r % n;
        }
    }

    // Integer in [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) noexcept {
        return lo + static_cast<std::int64_t>(uniform_int(static_cast<std::uint64_t>(hi - lo) + 1));
    }

    double normal() noexcept {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    bool bernoulli(double p) noexcept { return uniform() < p; }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

    std::uint64_t s_[4];
};

// Stream identifiers used across the project. Each consumer owns a disjoint
// range so that adding a consumer never perturbs another's draws.
namespace streams {
inline constexpr std::uint64_t kWeightInit = 0x1000;
inline constexpr std::uint64_t kShuffle = 0x2000'0000ULL;     // + epoch
inline constexpr std::uint64_t kCleanImage = 0x4000'0000ULL;  // + image index
inline constexpr std::uint64_t kIssue = 0x8000'0000ULL;       // + kind * 2^24 + image index
}  // namespace streams

}  // namespace xaudit
