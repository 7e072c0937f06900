#pragma once

#include <algorithm>
#include <cstdint>
#include <random>

namespace duskforge {

// All randomness is derived, never carried: a (seed, stream, counter) triple
// deterministically names an independent generator. Training code re-derives
// per-step generators from the step index, which is what makes
// checkpoint-resume replay the exact same draws.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t seed, uint64_t stream, uint64_t counter = 0) {
    return splitmix64(splitmix64(seed ^ (stream * 0x9e3779b97f4a7c15ULL)) ^ counter);
}

// Stream ids, one per independent consumer of randomness.
namespace streams {
constexpr uint64_t init = 1;       // parameter initialization
constexpr uint64_t data_order = 2; // epoch shuffles / batch sampling
constexpr uint64_t exposure = 3;   // exposure map sampling
constexpr uint64_t scene = 4;      // procedural scene geometry
constexpr uint64_t night = 5;      // night-transform noise
} // namespace streams

class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(gen_);
    }
    double normal(double mean, double stddev) {
        return std::normal_distribution<double>(mean, stddev)(gen_);
    }
    // Inclusive bounds.
    int uniform_int(int lo, int hi) {
        return std::uniform_int_distribution<int>(lo, hi)(gen_);
    }
    uint64_t next_u64() { return gen_(); }

    template <typename It>
    void shuffle(It begin, It end) {
        std::shuffle(begin, end, gen_);
    }

    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
};

} // namespace duskforge
