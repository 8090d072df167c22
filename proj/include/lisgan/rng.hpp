#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace lisgan {

// splitmix64, used only to derive well-separated seeds for named streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Independent RNG streams per concern. Keeping the draws for noise, data,
// schedule decisions and init on separate generators means changing the
// consumption pattern of one concern cannot shift any other stream, which is
// what makes run replay and the N_R=0 equivalence checks exact.
enum class Stream : std::uint64_t {
    init = 1,
    noise = 2,
    data = 3,
    schedule = 4,
};

// Deterministic generator. All distribution transforms are implemented here
// (not via std:: distributions, whose output is implementation-defined) so a
// (seed, stream) pair yields the same values on any conforming platform.
class Rng {
public:
    Rng() : Rng(0, Stream::init) {}

    Rng(std::uint64_t seed, Stream stream) {
        std::uint64_t s = seed ^ (0xA076'1D64'78BD'642FULL * static_cast<std::uint64_t>(stream));
        engine_.seed(splitmix64(s));
        have_spare_ = false;
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1): 53 random bits scaled, never returns 1.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Standard normal via Box-Muller (polar-free, two uniforms per pair).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        // Guard u1 == 0; log(0) would produce -inf.
        while (u1 <= 0.0) u1 = uniform01();
        double mag = std::sqrt(-2.0 * std::log(u1));
        double ang = 6.283185307179586476925286766559 * u2;
        spare_ = mag * std::sin(ang);
        have_spare_ = true;
        return mag * std::cos(ang);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Uniform integer in [0, n). Uses rejection to avoid modulo bias.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) return 0;
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    bool bernoulli(double p) { return uniform01() < p; }

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace lisgan
