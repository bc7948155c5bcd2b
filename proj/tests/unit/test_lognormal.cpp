#include <doctest.h>

#include <cmath>

#include "brt/lognormal.hpp"
#include "brt/quadrature.hpp"

using namespace brt;

TEST_CASE("pdf integrates to one") {
    LognormalParams d(0.17, 0.44);
    auto r = integrate_adaptive([&](double x) { return d.pdf(x); }, 0.0, 60.0, 1e-9);
    CHECK(r.value == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("cdf and quantile are inverse") {
    LognormalParams d(0.17, 0.44);
    for (double p : {0.001, 0.01, 0.1, 0.5, 0.9, 0.99, 0.999}) {
        CHECK(d.cdf(d.quantile(p)) == doctest::Approx(p).epsilon(1e-12));
    }
}

TEST_CASE("moments and support") {
    LognormalParams d(0.17, 0.44);
    CHECK(d.median() == doctest::Approx(std::exp(0.17)));
    CHECK(d.mean() == doctest::Approx(std::exp(0.17 + 0.5 * 0.44 * 0.44)));
    CHECK(d.cdf(0.0) == 0.0);
    CHECK(d.cdf(-1.0) == 0.0);
    CHECK(d.pdf(-1.0) == 0.0);

    // Numeric mean agrees with the closed form.
    auto r = integrate_adaptive([&](double x) { return x * d.pdf(x); }, 0.0, 100.0, 1e-9);
    CHECK(r.value == doctest::Approx(d.mean()).epsilon(1e-6));
}

TEST_CASE("sigma must be positive") {
    CHECK_THROWS_AS(LognormalParams(0.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(LognormalParams(0.0, -1.0), std::invalid_argument);
}
