#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

namespace tmtcg {

/// Seeded random source with platform-independent draws.
///
/// The standard distributions are implementation-defined, so bounded draws
/// are mapped from raw engine output here to keep generated suites identical
/// across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Independent stream for sub-task `index`, derived from `seed`.
    static Rng split(std::uint64_t seed, std::uint64_t index);

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, bound). bound must be > 0.
    std::uint64_t uniform(std::uint64_t bound);

    /// Uniform in [lo, hi].
    std::uint64_t between(std::uint64_t lo, std::uint64_t hi) { return lo + uniform(hi - lo + 1); }

    /// Uniform double in [0, 1).
    double unit();

    bool chance(double p) { return unit() < p; }

    /// Index drawn proportionally to `weights`; weights must have a positive sum.
    std::size_t weighted(std::span<const double> weights);

private:
    std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace tmtcg
