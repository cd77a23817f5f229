#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace xdrec {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic seed derivation for per-user / per-step substreams.
inline uint64_t mix_seed(uint64_t a, uint64_t b) {
    return splitmix64(a ^ splitmix64(b + 0x51ed2701a9b4d5e9ULL));
}

// mt19937_64 with hand-rolled transforms so draws are identical across
// standard libraries (std::*_distribution is implementation-defined).
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // uniform in [0, 1)
    double next_unit() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    // uniform integer in [lo, hi], inclusive; rejection keeps it exact
    int64_t next_int(int64_t lo, int64_t hi) {
        uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        uint64_t v;
        do {
            v = gen_();
        } while (v >= limit);
        return lo + static_cast<int64_t>(v % span);
    }

    // standard normal via Box-Muller (no cached spare, keeps state minimal)
    double next_normal() {
        double u1 = next_unit();
        while (u1 <= 0.0) u1 = next_unit();
        double u2 = next_unit();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    // N(0, std), redrawn until within 2 std
    double next_trunc_normal(double std) {
        for (;;) {
            double v = next_normal();
            if (std::fabs(v) <= 2.0) return v * std;
        }
    }

    double next_exponential() {
        double u = next_unit();
        while (u <= 0.0) u = next_unit();
        return -std::log(u);
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace xdrec
