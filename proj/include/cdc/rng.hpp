#pragma once

#include <cstdint>
#include <random>

namespace cdc {

/// Seeded random stream with deterministic splitting.
///
/// Children derived via split() depend only on (base seed, label), never on
/// how much the parent has been consumed, so per-trajectory streams stay
/// reproducible regardless of evaluation order. uniform() uses the top 53
/// bits of the engine output, which keeps draws bit-identical across
/// standard library implementations.
class SplitRng {
public:
    explicit SplitRng(std::uint64_t seed) : base_seed_(seed), engine_(mix(seed)) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
    }

    /// Independent child stream identified by a label.
    SplitRng split(std::uint64_t label) const { return SplitRng(mix(base_seed_ ^ mix(label + 0x9e3779b97f4a7c15ULL))); }

    std::uint64_t base_seed() const { return base_seed_; }

private:
    // splitmix64 finalizer
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t base_seed_;
    std::mt19937_64 engine_;
};

}  // namespace cdc
