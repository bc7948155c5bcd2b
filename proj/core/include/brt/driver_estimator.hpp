#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "brt/mixed_model.hpp"
#include "brt/observation.hpp"

namespace brt {

// Per-driver online state: the estimated BLUP offset gamma_hat and the
// covariance of the prediction error (beta_hat + gamma_hat) - (beta + gamma).
// Estimates are always recomputed from the full observation history.
struct DriverEstimate {
    std::string driver_id;
    std::vector<BrtObservation> observations;
    std::array<int, kNumStimuli> n_per_stimulus{};
    Vector9 gamma_hat = Vector9::Zero();
    Matrix9 cov_pred = Matrix9::Zero();

    int n() const { return static_cast<int>(observations.size()); }
};

// Zero-observation state: gamma_hat = 0, cov_pred = Cov(beta_hat) + Sigma_gamma.
DriverEstimate make_empty_estimate(const std::string& driver_id,
                                   const MixedModelParams& params);

// Recomputes the BLUP from the given history:
//   V = X Sigma_gamma X' + sigma2 I
//   gamma_hat = Sigma_gamma X' V^-1 (y - X beta_hat)
//   Cov(gamma_hat) = Sigma_gamma X'(V^-1 - V^-1 X Cov(beta_hat) X' V^-1) X Sigma_gamma
//   Cov(gamma_hat - gamma) = Sigma_gamma - Cov(gamma_hat)
//   Cov(beta_hat, gamma')  = Cov(beta_hat) X' V^-1 X Sigma_gamma
//   cov_pred = Cov(beta_hat) + Cov(gamma_hat - gamma)
//              - Cov(beta_hat, gamma') - Cov(beta_hat, gamma')'
DriverEstimate estimate_from_history(const std::string& driver_id,
                                     std::span<const BrtObservation> history,
                                     const MixedModelParams& params);

// Appends one observation and recomputes from the full history (O(n^3)).
DriverEstimate update(const DriverEstimate& estimate, const MixedModelParams& params,
                      const BrtObservation& new_obs);

// Lognormal PBRT distribution at reference headway t_star, on the log scale.
struct PbrtDistribution {
    double mu = 0.0;   // log-seconds
    double var = 0.0;  // log-seconds^2, > 0
    double t_star = 1.5;
    StimulusType stimulus = StimulusType::steady_state_lead_brake;

    double quantile(double p) const;  // exp(mu + z_p sqrt(var))
    double mean() const;              // exp(mu + var / 2)
};

// mu = x'(beta_hat + gamma_hat), var = x' cov_pred x + sigma2, with x the
// stimulus-block basis at t_star. The cov_pred term is the conservative
// variance: it accounts for uncertainty in the estimated mean.
PbrtDistribution pbrt_distribution(const DriverEstimate& estimate,
                                   const MixedModelParams& params, StimulusType stimulus,
                                   double t_star = 1.5);

// Median wall time of a full estimator update at history size n, built on a
// synthetic driver. Used to verify the cubic-bounded online cost.
double estimator_update_seconds(int n, const MixedModelParams& params,
                                std::uint64_t seed = 0x5eed, int repeats = 7);

}  // namespace brt
