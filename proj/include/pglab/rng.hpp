#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace pglab {

// Seeded random stream. All draws go through hand-rolled converters so the
// numeric sequence depends only on the mt19937_64 engine, not on the standard
// library's distribution implementations.
class RngStream {
public:
    RngStream() : engine_(0) {}
    explicit RngStream(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 bits of precision.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; no cached second value.
    double normal() {
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    // Uniform integer in [0, n).
    uint64_t below(uint64_t n) {
        return engine_() % n;
    }

    // Derive an independent stream; mixes the seed so nearby inputs diverge.
    RngStream split(uint64_t salt) {
        uint64_t s = engine_() ^ (salt * 0x9e3779b97f4a7c15ull);
        s ^= s >> 30;
        s *= 0xbf58476d1ce4e5b9ull;
        s ^= s >> 27;
        return RngStream(s);
    }

    std::mt19937_64& engine() { return engine_; }
    const std::mt19937_64& engine() const { return engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace pglab
