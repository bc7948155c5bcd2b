#include "brt/lognormal.hpp"

#include <cmath>
#include <stdexcept>

#include "brt/stats.hpp"

namespace brt {

namespace {
constexpr double kSqrt2Pi = 2.5066282746310002;
}

LognormalParams::LognormalParams(double mu_, double sigma_) : mu(mu_), sigma(sigma_) {
    if (!(sigma > 0.0)) throw std::invalid_argument("LognormalParams: sigma must be > 0");
}

double LognormalParams::pdf(double x) const {
    if (x <= 0.0) return 0.0;
    double z = (std::log(x) - mu) / sigma;
    return std::exp(-0.5 * z * z) / (x * sigma * kSqrt2Pi);
}

double LognormalParams::cdf(double x) const {
    if (x <= 0.0) return 0.0;
    return norm_cdf((std::log(x) - mu) / sigma);
}

double LognormalParams::quantile(double p) const {
    return std::exp(mu + sigma * norm_ppf(p));
}

double LognormalParams::mean() const {
    return std::exp(mu + 0.5 * sigma * sigma);
}

double LognormalParams::median() const {
    return std::exp(mu);
}

}  // namespace brt
