#include <doctest.h>

#include <cmath>
#include <vector>

#include "brt/stats.hpp"

using namespace brt;

TEST_CASE("norm_ppf matches tabulated quantiles") {
    CHECK(norm_ppf(0.5) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(norm_ppf(0.99) == doctest::Approx(2.3263478740408408).epsilon(1e-12));
    CHECK(norm_ppf(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
    CHECK(norm_ppf(0.9) == doctest::Approx(1.2815515655446004).epsilon(1e-12));
    CHECK(norm_ppf(0.1) == doctest::Approx(-1.2815515655446004).epsilon(1e-12));
    CHECK(norm_ppf(1e-10) == doctest::Approx(-6.361340902404056).epsilon(1e-9));
}

TEST_CASE("norm_ppf inverts norm_cdf") {
    for (double x = -6.0; x <= 6.0; x += 0.37) {
        CHECK(norm_ppf(norm_cdf(x)) == doctest::Approx(x).epsilon(1e-11));
    }
}

TEST_CASE("norm_ppf rejects out-of-range p") {
    CHECK_THROWS_AS(norm_ppf(0.0), std::invalid_argument);
    CHECK_THROWS_AS(norm_ppf(1.0), std::invalid_argument);
    CHECK_THROWS_AS(norm_ppf(-0.5), std::invalid_argument);
}

TEST_CASE("Rng is deterministic and well-scaled") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) {
        CHECK(a.uniform01() == b.uniform01());
    }
    Rng c(42);
    double mean = 0.0, var = 0.0;
    const int n = 50000;
    std::vector<double> draws(n);
    for (int i = 0; i < n; ++i) {
        draws[i] = c.normal();
        mean += draws[i];
    }
    mean /= n;
    for (double d : draws) var += (d - mean) * (d - mean);
    var /= n - 1;
    CHECK(std::abs(mean) < 3.0 / std::sqrt(static_cast<double>(n)));
    CHECK(var == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("derive_seed separates streams") {
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    CHECK(derive_seed(1, 0) != derive_seed(2, 0));
    CHECK(derive_seed(7, 3) == derive_seed(7, 3));
}

TEST_CASE("quantile_sorted interpolates order statistics") {
    std::vector<double> v{1.0, 2.0, 3.0, 4.0};
    CHECK(quantile_sorted(v, 0.0) == 1.0);
    CHECK(quantile_sorted(v, 1.0) == 4.0);
    CHECK(quantile_sorted(v, 0.5) == doctest::Approx(2.5));
    CHECK(quantile_sorted(v, 1.0 / 3.0) == doctest::Approx(2.0));
}
