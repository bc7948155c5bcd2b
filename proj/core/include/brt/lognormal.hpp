#pragma once

namespace brt {

// Lognormal distribution on the response-time scale: ln X ~ N(mu, sigma^2).
struct LognormalParams {
    LognormalParams(double mu_, double sigma_);

    double mu;     // log-seconds
    double sigma;  // log-seconds, > 0

    double pdf(double x) const;
    double cdf(double x) const;
    double quantile(double p) const;  // exp(mu + sigma * z_p), p in (0, 1)
    double mean() const;              // exp(mu + sigma^2 / 2)
    double median() const;            // exp(mu)
};

}  // namespace brt
