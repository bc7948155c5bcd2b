#pragma once

#include <functional>

namespace brt {

struct QuadratureResult {
    double value = 0.0;
    double error_estimate = 0.0;  // sum of accepted per-interval |K15 - G7|
    int intervals = 0;
};

// Adaptive Gauss-Kronrod (G7, K15) integration of f over [a, b] by interval
// bisection until the per-interval error estimate meets its share of abs_tol.
QuadratureResult integrate_adaptive(const std::function<double(double)>& f, double a,
                                    double b, double abs_tol = 1e-8, int max_depth = 40);

}  // namespace brt
