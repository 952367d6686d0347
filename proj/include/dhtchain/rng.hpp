#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace dhtchain {

/* Deterministic RNG with library-independent sampling, so runs reproduce
   byte-for-byte across standard library implementations. Named substreams
   keep one subsystem's draws from perturbing another's. */
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    static Rng substream(uint64_t seed, std::string_view name) {
        uint64_t h = 1469598103934665603ull;
        for (char c : name) {
            h ^= uint8_t(c);
            h *= 1099511628211ull;
        }
        return Rng(seed ^ h);
    }

    uint64_t next() { return engine_(); }

    /* Uniform in [0, n) without modulo bias. */
    uint64_t uniform(uint64_t n) {
        if (n == 0) return 0;
        uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v;
        do {
            v = engine_();
        } while (v >= limit);
        return v % n;
    }

    uint64_t range(uint64_t lo, uint64_t hi) {  // inclusive bounds
        return lo + uniform(hi - lo + 1);
    }

    double unit() { return double(engine_() >> 11) * (1.0 / 9007199254740992.0); }

    bool chance(double p) { return unit() < p; }

    /* Knuth's product method; fine for the small means used here. */
    uint64_t poisson(double mean) {
        if (mean <= 0) return 0;
        double limit = std::exp(-mean);
        uint64_t k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= unit();
        } while (p > limit);
        return k - 1;
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace dhtchain
