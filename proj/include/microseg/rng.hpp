// Deterministic random number generation.
//
// All stochastic code in the library draws from this generator rather than
// <random> distributions, whose output is implementation-defined. A fixed
// seed therefore reproduces every sample bit-for-bit, which the experiment
// harness relies on for byte-identical training logs.
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace microseg {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// xoshiro256** seeded via splitmix64.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
        has_spare_ = false;
    }

    std::uint64_t next_u64() {
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

    // Uniform in [0, 1).
    double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n).
    std::uint64_t uniform_int(std::uint64_t n) {
        // Rejection sampling to avoid modulo bias.
        const std::uint64_t limit = ~0ull - (~0ull % n);
        std::uint64_t x;
        do { x = next_u64(); } while (x >= limit);
        return x % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Standard normal via Box-Muller (second value cached).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do { u1 = uniform(); } while (u1 <= 0.0);
        u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Exponential with unit rate. Also the law of |h0|^2 for h0 ~ CN(0,1).
    double exponential() {
        double u;
        do { u = uniform(); } while (u <= 0.0);
        return -std::log(u);
    }

    // Sample an index from a finite categorical distribution (weights >= 0).
    int categorical(const double* w, int n) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) total += w[i];
        double x = uniform() * total;
        for (int i = 0; i < n; ++i) {
            x -= w[i];
            if (x < 0.0) return i;
        }
        return n - 1;
    }

    // Independent child stream: the same (seed, key...) always yields the
    // same stream, regardless of what was drawn from the parent.
    static Rng stream(std::uint64_t seed, std::uint64_t k1, std::uint64_t k2 = 0,
                      std::uint64_t k3 = 0) {
        std::uint64_t sm = seed;
        std::uint64_t h = splitmix64(sm);
        sm ^= k1 * 0x9e3779b97f4a7c15ull;
        h ^= splitmix64(sm);
        sm ^= k2 * 0xc2b2ae3d27d4eb4full;
        h ^= splitmix64(sm);
        sm ^= k3 * 0x165667b19e3779f9ull;
        h ^= splitmix64(sm);
        return Rng(h);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t s_[4];
    double spare_ = 0.0;
    bool has_spare_;
};

} // namespace microseg
