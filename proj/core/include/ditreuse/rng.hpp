#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace ditreuse {

// splitmix64 finalizer; used to derive independent stream seeds from a base
// seed plus a stream tag, so distinct consumers never share a sequence.
inline std::uint64_t seed_mix(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t seed_mix(std::uint64_t seed, std::uint64_t stream, std::uint64_t sub) {
    return seed_mix(seed_mix(seed, stream), sub);
}

// Deterministic float generation on top of mt19937_64. std::*_distribution is
// implementation-defined, so floats are derived from raw engine output to keep
// byte-identical artifacts across compilers.
class Rng {
 public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // Uniform in [0, 1) with 24-bit granularity.
    float uniform01() {
        return static_cast<float>(gen_() >> 40) * 0x1.0p-24f;
    }

    // Uniform in [-1, 1).
    float uniform_pm1() { return 2.0f * uniform01() - 1.0f; }

    // Standard normal via Box-Muller.
    float gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        float u1 = uniform01();
        float u2 = uniform01();
        // Avoid log(0).
        if (u1 < 0x1.0p-24f) u1 = 0x1.0p-24f;
        float r = std::sqrt(-2.0f * std::log(u1));
        float theta = 6.28318530717958647692f * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

 private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    float spare_ = 0.0f;
};

}  // namespace ditreuse
