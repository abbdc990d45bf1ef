#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace c2fseg {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// mt19937_64 stream with hand-rolled variate helpers. The standard
/// distributions are implementation-defined, so golden files and
/// determinism contracts would break across stdlib versions; these
/// helpers are fully specified.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : engine_(seed) {}

    /// Derive an independent child stream.
    Rng fork(uint64_t stream_id) { return Rng(splitmix64(engine_() ^ splitmix64(stream_id))); }

    uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 bits of precision.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). Lemire-style multiply-shift.
    int64_t uniform_int(int64_t n) {
        return static_cast<int64_t>((static_cast<unsigned __int128>(engine_()) *
                                     static_cast<unsigned __int128>(n)) >> 64);
    }

    int64_t uniform_int(int64_t lo, int64_t hi_inclusive) {
        return lo + uniform_int(hi_inclusive - lo + 1);
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal via Box-Muller, caching the second variate.
    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        cached_ = r * std::sin(theta);
        have_cached_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

private:
    std::mt19937_64 engine_;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

}  // namespace c2fseg
