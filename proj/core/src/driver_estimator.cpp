#include "brt/driver_estimator.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <chrono>
#include <cmath>

#include "brt/errors.hpp"
#include "brt/stats.hpp"

namespace brt {

DriverEstimate make_empty_estimate(const std::string& driver_id,
                                   const MixedModelParams& params) {
    DriverEstimate est;
    est.driver_id = driver_id;
    est.gamma_hat = Vector9::Zero();
    est.cov_pred = params.cov_beta + params.sigma_gamma;
    return est;
}

DriverEstimate estimate_from_history(const std::string& driver_id,
                                     std::span<const BrtObservation> history,
                                     const MixedModelParams& params) {
    if (history.empty()) return make_empty_estimate(driver_id, params);
    if (!(params.sigma2 > 0.0)) {
        throw NumericError("estimate_from_history: sigma2 must be > 0");
    }

    const int n = static_cast<int>(history.size());
    DriverEstimate est;
    est.driver_id = driver_id;
    est.observations.assign(history.begin(), history.end());

    Eigen::MatrixXd x(n, kNumCoeffs);
    Eigen::VectorXd y(n);
    for (int k = 0; k < n; ++k) {
        const auto& o = history[k];
        if (!(o.brt > 0.0)) {
            throw ValidationError("driver " + driver_id + ": brt must be > 0");
        }
        x.row(k) = design_basis(o.stimulus, o.time_headway).transpose();
        y[k] = std::log(o.brt);
        est.n_per_stimulus[static_cast<int>(o.stimulus)] += 1;
    }

    Eigen::MatrixXd v = x * params.sigma_gamma * x.transpose();
    v.diagonal().array() += params.sigma2;
    Eigen::LLT<Eigen::MatrixXd> llt(v);
    if (llt.info() != Eigen::Success) {
        throw NumericError("driver " + driver_id + ": V not positive definite");
    }

    Eigen::MatrixXd w = llt.solve(x);              // V^-1 X, n x 9
    Matrix9 m = x.transpose() * w;                 // X' V^-1 X
    Eigen::VectorXd resid = y - x * params.beta;
    est.gamma_hat = params.sigma_gamma * (x.transpose() * llt.solve(resid));

    const Matrix9& sg = params.sigma_gamma;
    const Matrix9& cb = params.cov_beta;
    Matrix9 cov_gamma_hat = sg * (m - m * cb * m) * sg;
    Matrix9 cov_shrink = sg - cov_gamma_hat;     // Cov(gamma_hat - gamma)
    Matrix9 cov_beta_gamma = cb * m * sg;        // Cov(beta_hat, gamma')
    est.cov_pred = cb + cov_shrink - cov_beta_gamma - cov_beta_gamma.transpose();
    est.cov_pred = 0.5 * (est.cov_pred + est.cov_pred.transpose()).eval();
    return est;
}

DriverEstimate update(const DriverEstimate& estimate, const MixedModelParams& params,
                      const BrtObservation& new_obs) {
    std::vector<BrtObservation> history = estimate.observations;
    history.push_back(new_obs);
    std::string driver_id = estimate.driver_id.empty() ? new_obs.driver_id : estimate.driver_id;
    return estimate_from_history(driver_id, history, params);
}

double PbrtDistribution::quantile(double p) const {
    return std::exp(mu + norm_ppf(p) * std::sqrt(var));
}

double PbrtDistribution::mean() const {
    return std::exp(mu + 0.5 * var);
}

PbrtDistribution pbrt_distribution(const DriverEstimate& estimate,
                                   const MixedModelParams& params, StimulusType stimulus,
                                   double t_star) {
    if (!(t_star > 0.0)) throw std::invalid_argument("pbrt_distribution: t_star must be > 0");
    Vector9 x = design_basis(stimulus, t_star);
    PbrtDistribution dist;
    dist.t_star = t_star;
    dist.stimulus = stimulus;
    dist.mu = x.dot(params.beta + estimate.gamma_hat);
    dist.var = x.dot(estimate.cov_pred * x) + params.sigma2;
    return dist;
}

double estimator_update_seconds(int n, const MixedModelParams& params, std::uint64_t seed,
                                int repeats) {
    if (n < 1) throw std::invalid_argument("estimator_update_seconds: n must be >= 1");

    Rng rng(seed);
    std::vector<BrtObservation> history;
    history.reserve(n);
    for (int k = 0; k < n; ++k) {
        BrtObservation o;
        o.driver_id = "probe";
        o.stimulus = static_cast<StimulusType>(k % kNumStimuli);
        o.t_stimulus = static_cast<double>(k);
        o.time_headway = rng.uniform(0.5, 6.0);
        o.brt = std::exp(design_basis(o.stimulus, o.time_headway).dot(params.beta) +
                         std::sqrt(params.sigma2) * rng.normal());
        history.push_back(std::move(o));
    }
    DriverEstimate base;
    base.driver_id = "probe";
    base.observations.assign(history.begin(), history.end() - 1);
    BrtObservation last = history.back();

    std::vector<double> times;
    times.reserve(repeats);
    volatile double sink = 0.0;
    for (int r = 0; r < repeats; ++r) {
        auto t0 = std::chrono::steady_clock::now();
        DriverEstimate est = update(base, params, last);
        auto t1 = std::chrono::steady_clock::now();
        sink = sink + est.gamma_hat[0];
        times.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    std::sort(times.begin(), times.end());
    return times[times.size() / 2];
}

}  // namespace brt
