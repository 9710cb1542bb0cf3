#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace dncnn {

/// Reproducible random stream.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. Distributions are implemented here rather than taken from
/// <random> because the standard leaves their algorithms unspecified:
///   - uniform01: top 53 bits of one engine output, scaled by 2^-53.
///   - normal: Box-Muller on two uniforms, both values of a pair are used.
///   - uniform_int: modulo of a 64-bit output with rejection of the biased zone.
/// Streams are derived by folding (seed, ids...) through SplitMix64, so
/// derive(a).derive(b) depends only on the seed and the id path.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed = 0) : seed_(seed), engine_(mix(seed)) {}

    std::uint64_t seed() const noexcept { return seed_; }

    /// Independent stream identified by `stream`.
    SeededRng derive(std::uint64_t stream) const { return SeededRng(combine(seed_, stream)); }

    SeededRng derive(std::initializer_list<std::uint64_t> path) const {
        std::uint64_t s = seed_;
        for (std::uint64_t id : path) s = combine(s, id);
        return SeededRng(s);
    }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform01() { return double(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    /// Standard normal sample.
    double normal();

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    static std::uint64_t mix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    static std::uint64_t combine(std::uint64_t seed, std::uint64_t stream) {
        return mix(mix(seed) ^ (stream * 0xd1b54a32d192ed03ULL + 0x8bb84b93962eacc9ULL));
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace dncnn
