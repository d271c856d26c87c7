#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace mvst {

/// Counter-based generator: the n-th draw is splitmix64(key + n * golden).
/// Identical streams on every platform; `split` derives independent children.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0, std::uint64_t counter = 0) noexcept
        : key_(mix(seed ^ 0x6a09e667f3bcc908ULL)), counter_(counter) {}

    static Rng from_state(std::uint64_t key, std::uint64_t counter) noexcept {
        Rng r;
        r.key_ = key;
        r.counter_ = counter;
        return r;
    }

    std::uint64_t next_u64() noexcept { return mix(key_ + (counter_++) * kGolden); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). Uses rejection to stay unbiased.
    std::uint64_t below(std::uint64_t n) noexcept {
        if (n <= 1) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    /// Box-Muller; consumes two draws per sample.
    double normal() noexcept {
        double u1 = uniform();
        const double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Normal resampled until |z| <= 2, then scaled.
    double truncated_normal(double stddev) noexcept {
        double z;
        do {
            z = normal();
        } while (std::abs(z) > 2.0);
        return z * stddev;
    }

    Rng split(std::uint64_t stream) const noexcept {
        return from_state(mix(key_ ^ mix(stream + 0x9e3779b97f4a7c15ULL)), 0);
    }

    std::uint64_t key() const noexcept { return key_; }
    std::uint64_t counter() const noexcept { return counter_; }

private:
    static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

    static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
        z += kGolden;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

}  // namespace mvst
