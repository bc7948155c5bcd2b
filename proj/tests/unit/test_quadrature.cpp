#include <doctest.h>

#include <cmath>

#include "brt/quadrature.hpp"

using namespace brt;

TEST_CASE("polynomials integrate exactly") {
    auto cubic = [](double x) { return x * x * x - 2.0 * x + 1.0; };
    auto r = integrate_adaptive(cubic, 0.0, 2.0, 1e-12);
    CHECK(r.value == doctest::Approx(2.0).epsilon(1e-13));  // x^4/4 - x^2 + x over [0,2]
}

TEST_CASE("smooth transcendental integrand meets the tolerance") {
    auto f = [](double x) { return std::exp(-x) * std::sin(3.0 * x); };
    // Antiderivative: -e^-x (sin 3x + 3 cos 3x) / 10
    auto anti = [](double x) {
        return -std::exp(-x) * (std::sin(3.0 * x) + 3.0 * std::cos(3.0 * x)) / 10.0;
    };
    auto r = integrate_adaptive(f, 0.0, 5.0, 1e-10);
    CHECK(std::abs(r.value - (anti(5.0) - anti(0.0))) < 1e-10);
    CHECK(r.error_estimate <= 1e-10);
}

TEST_CASE("sharp peak forces subdivision") {
    auto f = [](double x) { return 1.0 / (1e-4 + (x - 0.7) * (x - 0.7)); };
    auto r = integrate_adaptive(f, 0.0, 1.0, 1e-9);
    double exact = (std::atan((1.0 - 0.7) / 1e-2) + std::atan(0.7 / 1e-2)) / 1e-2;
    CHECK(r.value == doctest::Approx(exact).epsilon(1e-9));
    CHECK(r.intervals > 8);
}

TEST_CASE("orientation and degenerate interval") {
    auto f = [](double x) { return x; };
    CHECK(integrate_adaptive(f, 1.0, 0.0, 1e-10).value == doctest::Approx(-0.5));
    CHECK(integrate_adaptive(f, 2.0, 2.0, 1e-10).value == 0.0);
    CHECK_THROWS_AS(integrate_adaptive(f, 0.0, 1.0, 0.0), std::invalid_argument);
}
