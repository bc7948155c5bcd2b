#pragma once

#include <optional>
#include <stdexcept>
#include <string>

#include "brt/design.hpp"

namespace brt {

struct FitMeta {
    int n_observations = 0;
    int n_drivers = 0;
    double log_likelihood = 0.0;
    int iterations = 0;
    double gradient_norm = 0.0;
    bool converged = false;
    // Final optimizer iterate: 45 row-major lower-triangle entries of the
    // Cholesky factor of Sigma_gamma, then ln sigma2. Diagnostic only.
    Eigen::VectorXd theta;
};

// Fitted population quantities: covariance structure of log-BRT.
struct MixedModelParams {
    Vector9 beta = Vector9::Zero();        // log-seconds scale
    double sigma2 = 0.0;                   // residual variance of log-BRT
    Matrix9 sigma_gamma = Matrix9::Zero();  // Cov(gamma_d), PSD
    Matrix9 cov_beta = Matrix9::Zero();     // Cov(beta_hat)
    FitMeta meta;
};

struct FitOptions {
    bool reml = false;                  // restricted ML extension
    bool diagonal_sigma_gamma = false;  // restrict Sigma_gamma to a diagonal
    int max_iterations = 500;
    double gradient_tolerance = 1e-5;  // L2 norm of the 46-parameter gradient
    int min_drivers = 2;
    int min_observations = 20;
    std::optional<MixedModelParams> init;
};

class FitError : public std::runtime_error {
public:
    FitError(const std::string& msg, MixedModelParams last, double grad_norm)
        : std::runtime_error(msg), last_iterate(std::move(last)), gradient_norm(grad_norm) {}

    MixedModelParams last_iterate;
    double gradient_norm;
};

// Maximum (marginal) likelihood fit of (beta, sigma2, Sigma_gamma).
// Sigma_gamma is parameterized by its lower-triangular Cholesky factor and
// sigma2 by its log; beta is profiled out by GLS at each iterate. The
// optimizer is damped Fisher scoring (quasi-Newton with the expected
// information as the metric), monotone in the log-likelihood.
MixedModelParams fit(const TrainingSet& train, const FitOptions& options = {});

// Marginal Gaussian log-likelihood at explicit parameter values, with
// per-driver covariance V_d = X_d Sigma_gamma X_d' + sigma2 I.
double log_likelihood(const TrainingSet& train, const Vector9& beta,
                      const Matrix9& sigma_gamma, double sigma2);

inline constexpr int kNumCholParams = kNumCoeffs * (kNumCoeffs + 1) / 2;  // 45
inline constexpr int kNumThetaParams = kNumCholParams + 1;                // + ln sigma2

Eigen::VectorXd pack_theta(const Matrix9& chol_lower, double sigma2);
void unpack_theta(const Eigen::VectorXd& theta, Matrix9& chol_lower, double& sigma2);

struct ProfiledLikelihood {
    double value = 0.0;
    Eigen::VectorXd gradient;  // d value / d theta, 46 entries
    Vector9 beta_hat = Vector9::Zero();
    Matrix9 cov_beta = Matrix9::Zero();
};

// Profiled log-likelihood (beta at its GLS value) and its analytic gradient
// with respect to theta. ML by default; REML adds -1/2 logdet(X'V^-1 X).
ProfiledLikelihood profiled_log_likelihood(const TrainingSet& train,
                                           const Eigen::VectorXd& theta, bool reml = false);

// Raises each stimulus block's intercept so the lognormal population mean
// BRT at headway_ref (exp(x'beta_s + sigma2/2)) grows by exactly
// delta_seconds. Compensates simulator-trained response times being faster
// than on-road ones. The mean (not the median) is the corrected functional.
MixedModelParams adjust_intercepts(const MixedModelParams& params, double delta_seconds = 0.3,
                                   double headway_ref = 2.0);

// Moore-Penrose pseudoinverse of a symmetric PSD matrix; eigenvalues below
// 1e-10 times the largest are treated as zero.
Matrix9 pinv_psd(const Matrix9& m);

}  // namespace brt
