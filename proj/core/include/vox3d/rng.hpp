#pragma once

#include <cstdint>
#include <random>

namespace vox3d {

// splitmix64 finalizer; used to derive independent child seeds.
inline uint64_t mix_seed(uint64_t seed, uint64_t salt) {
    uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t mix_seed(uint64_t seed, uint64_t a, uint64_t b) {
    return mix_seed(mix_seed(seed, a), b);
}

class Rng {
public:
    explicit Rng(uint64_t seed = 0) : engine_(seed) {}

    void reseed(uint64_t seed) { engine_.seed(seed); }

    uint64_t next_u64() { return engine_(); }

    // uniform in [0, 1)
    double uniform() {
        return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
    }

    float normal(float mean = 0.0f, float stddev = 1.0f) {
        return std::normal_distribution<float>(mean, stddev)(engine_);
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace vox3d
