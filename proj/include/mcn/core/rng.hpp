#pragma once

#include <cstdint>
#include <random>

namespace mcn {

/// Deterministic RNG passed explicitly wherever randomness is needed.
/// No global state; derive() gives independent per-item streams so
/// work can be farmed out to workers without changing results.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(splitmix(seed)) {}

    std::mt19937_64& engine() { return engine_; }

    double uniform(double lo = 0.0, double hi = 1.0) {
        return std::uniform_real_distribution<double>(lo, hi)(engine_);
    }

    double normal(double mean = 0.0, double stddev = 1.0) {
        return std::normal_distribution<double>(mean, stddev)(engine_);
    }

    int uniform_int(int lo, int hi) {  // inclusive bounds
        return std::uniform_int_distribution<int>(lo, hi)(engine_);
    }

    bool bernoulli(double p) { return std::bernoulli_distribution(p)(engine_); }

    /// Independent child stream for item `index` of a seeded job.
    static Rng derive(uint64_t seed, uint64_t index) {
        return Rng(splitmix(seed ^ (0x9e3779b97f4a7c15ULL + index * 0xbf58476d1ce4e5b9ULL)));
    }

private:
    static uint64_t splitmix(uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    std::mt19937_64 engine_;
};

}  // namespace mcn
