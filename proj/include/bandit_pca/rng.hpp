#pragma once

// Counter-based random streams: every (seed, stream, trial) triple yields an
// independent generator, so a trial's draws never depend on how many numbers
// earlier trials consumed.

#include <cstdint>
#include <limits>
#include <random>

namespace bandit_pca {

enum class StreamId : std::uint64_t {
    Learner = 1,
    Environment = 2,
};

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// SplitMix64 engine keyed by (seed, stream, counter). Satisfies
/// UniformRandomBitGenerator so it plugs into <random> distributions.
class CounterRng {
public:
    using result_type = std::uint64_t;

    CounterRng(std::uint64_t seed, StreamId stream, std::uint64_t counter) noexcept
        : state_(splitmix64(splitmix64(seed) ^ splitmix64(static_cast<std::uint64_t>(stream) << 56 ^ counter))) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    double normal() { return std::normal_distribution<double>{}(*this); }

private:
    std::uint64_t state_;
};

}  // namespace bandit_pca
