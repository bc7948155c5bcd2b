#include "brt/quadrature.hpp"

#include <cmath>
#include <stdexcept>

namespace brt {

namespace {

// 15-point Kronrod abscissae (positive half) and weights; nodes at odd
// indices are the embedded 7-point Gauss nodes.
constexpr double kNodes[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769, 0.741531185599394,
    0.586087235467691, 0.405845151377397, 0.207784955007898, 0.000000000000000};
constexpr double kWeights[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
    0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728};
constexpr double kGaussWeights[4] = {0.129484966168870, 0.279705391489277,
                                     0.381830050505119, 0.417959183673469};

struct Panel {
    double k15;
    double err;
};

Panel gauss_kronrod(const std::function<double(double)>& f, double a, double b) {
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);

    double fk[8];
    double k15 = 0.0;
    for (int i = 0; i < 7; ++i) {
        double x = half * kNodes[i];
        fk[i] = f(mid - x) + f(mid + x);
        k15 += kWeights[i] * fk[i];
    }
    fk[7] = f(mid);
    k15 += kWeights[7] * fk[7];

    double g7 = kGaussWeights[3] * fk[7];
    for (int i = 0; i < 3; ++i) {
        g7 += kGaussWeights[i] * fk[2 * i + 1];
    }

    return {half * k15, std::abs(half * (k15 - g7))};
}

void adapt(const std::function<double(double)>& f, double a, double b, double tol,
           int depth, int max_depth, QuadratureResult& out) {
    Panel p = gauss_kronrod(f, a, b);
    if (p.err <= tol || depth >= max_depth) {
        out.value += p.k15;
        out.error_estimate += p.err;
        out.intervals += 1;
        return;
    }
    double mid = 0.5 * (a + b);
    adapt(f, a, mid, 0.5 * tol, depth + 1, max_depth, out);
    adapt(f, mid, b, 0.5 * tol, depth + 1, max_depth, out);
}

}  // namespace

QuadratureResult integrate_adaptive(const std::function<double(double)>& f, double a,
                                    double b, double abs_tol, int max_depth) {
    if (!(abs_tol > 0.0)) throw std::invalid_argument("integrate_adaptive: abs_tol must be > 0");
    QuadratureResult out;
    if (a == b) return out;
    double sign = 1.0;
    if (a > b) {
        std::swap(a, b);
        sign = -1.0;
    }
    adapt(f, a, b, abs_tol, 0, max_depth, out);
    out.value *= sign;
    return out;
}

}  // namespace brt
