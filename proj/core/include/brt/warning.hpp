#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "brt/lognormal.hpp"

namespace brt {

// Warning threshold T_t: available reaction times below T_t trigger a
// warning, and P(X > T_t) equals the target probability of accident, so
// T_t = exp(mu + sigma * ppf(1 - poa)). poa must lie in (0, 1).
double threshold(const LognormalParams& dist, double poa);

// False alarm rate of the population strategy: available time t is uniform
// on (0, T_t], a warned driver is a false alarm when X < t, so the rate is
// the mean of the CDF over the warned range,
//   (1/T_t) * integral_0^T_t F(t) dt,
// evaluated by adaptive quadrature with absolute tolerance 1e-8.
double far_population(const LognormalParams& dist, double poa);

// Population hierarchy: driver log-means mu_d ~ N(marginal.mu, tau^2) with
// within-driver log-sd sigma_ind, sigma_ind^2 + tau^2 = marginal.sigma^2,
// so the marginal over drivers reproduces the marginal lognormal.
struct PopulationModel {
    LognormalParams marginal{0.17, 0.44};
    double tau = 0.31112698372208087;  // default split: tau^2 = sigma^2 / 2

    double sigma_ind() const;
    void validate() const;  // 0 <= tau < marginal.sigma
};

// Additive Gaussian error on the estimated driver log-mean.
struct ErrorModel {
    double kappa = 0.0;  // log-seconds, >= 0
};

struct FarResult {
    double far = 0.0;           // per-encounter false alarm probability
    double per_driver_p10 = 0.0;  // quantiles of per-warning false alarm rates
    double per_driver_p90 = 0.0;
    double realized_poa = 0.0;  // fraction of drivers with X above their threshold
};

// Individualized-strategy false alarm rate by Monte Carlo over drivers.
//
// Encounters give the driver an available time t uniform on (0, T_pop],
// where T_pop is the population threshold at the same poa; both strategies
// face the same encounter distribution. The system observes a noisy
// estimate muhat_d = mu_d + e, e ~ N(0, kappa^2), and thresholds at the
// (1 - poa) quantile of the conditional distribution of X given muhat_d
// (mean shrunk toward the population by w = tau^2/(tau^2 + kappa^2),
// variance widened by the residual estimation uncertainty). At kappa = 0
// this is the driver's own threshold; as kappa grows it degrades to the
// population threshold, and the false alarm rate rises to the population
// rate. Per-driver rates are per-warning false alarm probabilities; the
// realized accident probability is P(X > T_d), the rate of responses
// slower than the issued threshold, which stays at poa for every kappa
// when the hierarchy is correctly specified.
//
// Deterministic for a fixed seed: per-driver draws derive from (seed, i)
// and shards merge in fixed order, independent of thread count.
FarResult far_individual(const PopulationModel& pop, const ErrorModel& err, double poa,
                         std::int64_t n_mc, std::uint64_t seed);

struct FarCurveRow {
    double poa = 0.0;
    double far_pop = 0.0;
    double far_ind = 0.0;
    double far_ind_p10 = 0.0;
    double far_ind_p90 = 0.0;
    double realized_poa = 0.0;
};

// Plot-ready FAR vs POA table; grid point i uses the derived seed (seed, i).
std::vector<FarCurveRow> far_poa_curve(const PopulationModel& pop, const ErrorModel& err,
                                       std::span<const double> poa_grid, std::int64_t n_mc,
                                       std::uint64_t seed);

}  // namespace brt
