#pragma once

#include <cstdint>
#include <random>

namespace cdfagg {

// Deterministic random source. Variates are derived from raw mt19937_64
// words through fixed arithmetic, so streams are identical across
// platforms and standard-library implementations for a given seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on the open interval (0, 1).
    double uniform01() {
        return (static_cast<double>(engine_() >> 12) + 0.5) * 0x1.0p-52;
    }

    // Uniform integer in [lo, hi] by rejection, unbiased.
    std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi) {
        const std::uint64_t span = hi - lo + 1;
        if (span == 0) return engine_(); // full range
        const std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % span;
        std::uint64_t draw;
        do {
            draw = engine_();
        } while (draw >= limit);
        return lo + draw % span;
    }

    // Standard normal via inverse-CDF transform of uniform01().
    double normal();

private:
    std::mt19937_64 engine_;
};

// splitmix64 step; used to derive independent sub-stream seeds from a
// master seed and a sequence of identifiers.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + salt * 0x9e3779b97f4a7c15ULL + 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace cdfagg
