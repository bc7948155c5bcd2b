#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace brt {

// Standard normal CDF via the error-function route.
double norm_cdf(double x);

// Inverse standard normal CDF. Rational approximation polished with one
// Halley step against norm_cdf; relative error near machine precision.
// p must lie in (0, 1).
double norm_ppf(double p);

// Deterministic stream splitting for derived seeds (splitmix64 step).
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream);

// Seeded generator with platform-independent output. Draws are produced
// from raw mt19937_64 bits (uniform) and the inverse CDF (normal), never
// from std::*_distribution, whose output is implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform on the open interval (0, 1).
    double uniform01() {
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    double normal() { return norm_ppf(uniform01()); }

    std::uint64_t next_u64() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

// Quantile of a sorted sample, linear interpolation between order
// statistics (R type 7). p in [0, 1]; sample must be non-empty.
double quantile_sorted(std::span<const double> sorted, double p);

}  // namespace brt
