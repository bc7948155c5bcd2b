#include "brt/warning.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "brt/quadrature.hpp"
#include "brt/stats.hpp"

namespace brt {

namespace {

constexpr double kFarQuadTol = 1e-8;

void check_poa(double poa) {
    if (!(poa > 0.0 && poa < 1.0)) {
        throw std::invalid_argument("poa must lie in (0, 1)");
    }
}

// integral_0^T F(t) dt for a lognormal CDF F.
double integral_of_cdf(const LognormalParams& dist, double upper) {
    auto f = [&dist](double t) { return dist.cdf(t); };
    return integrate_adaptive(f, 0.0, upper, kFarQuadTol).value;
}

}  // namespace

double threshold(const LognormalParams& dist, double poa) {
    check_poa(poa);
    return std::exp(dist.mu + dist.sigma * norm_ppf(1.0 - poa));
}

double far_population(const LognormalParams& dist, double poa) {
    double t_t = threshold(dist, poa);
    return integral_of_cdf(dist, t_t) / t_t;
}

double PopulationModel::sigma_ind() const {
    return std::sqrt(marginal.sigma * marginal.sigma - tau * tau);
}

void PopulationModel::validate() const {
    if (!(tau >= 0.0) || !(tau < marginal.sigma)) {
        throw std::invalid_argument("PopulationModel: need 0 <= tau < marginal.sigma");
    }
}

FarResult far_individual(const PopulationModel& pop, const ErrorModel& err, double poa,
                         std::int64_t n_mc, std::uint64_t seed) {
    check_poa(poa);
    pop.validate();
    if (!(err.kappa >= 0.0)) throw std::invalid_argument("ErrorModel: kappa must be >= 0");
    if (n_mc < 1) throw std::invalid_argument("far_individual: n_mc must be >= 1");

    const double mu0 = pop.marginal.mu;
    const double tau = pop.tau;
    const double s_ind = pop.sigma_ind();
    const double z_poa = norm_ppf(1.0 - poa);
    const double t_pop = threshold(pop.marginal, poa);

    // Conditional distribution of X given the noisy estimate muhat_d.
    const double tau2 = tau * tau;
    const double kappa2 = err.kappa * err.kappa;
    const double w = tau2 > 0.0 ? tau2 / (tau2 + kappa2) : 0.0;
    const double s_pred =
        std::sqrt(s_ind * s_ind + (tau2 > 0.0 ? tau2 * kappa2 / (tau2 + kappa2) : 0.0));

    std::vector<double> per_driver(static_cast<std::size_t>(n_mc));
    constexpr int kShards = 64;
    struct ShardSums {
        double far = 0.0;
        std::int64_t accidents = 0;
    };
    std::vector<ShardSums> shard_sums(kShards);

    auto run_shard = [&](int shard) {
        std::int64_t lo = n_mc * shard / kShards;
        std::int64_t hi = n_mc * (shard + 1) / kShards;
        ShardSums sums;
        for (std::int64_t i = lo; i < hi; ++i) {
            Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
            double z_mu = rng.normal();
            double z_err = rng.normal();
            double z_x = rng.normal();

            double mu_d = mu0 + tau * z_mu;
            double muhat = mu_d + err.kappa * z_err;
            double m = mu0 + w * (muhat - mu0);
            double t_d = std::exp(m + s_pred * z_poa);
            double t_eff = std::min(t_d, t_pop);

            LognormalParams truth(mu_d, s_ind);
            double integral = integral_of_cdf(truth, t_eff);
            sums.far += integral / t_pop;
            per_driver[static_cast<std::size_t>(i)] = integral / t_eff;

            double x = std::exp(mu_d + s_ind * z_x);
            if (x > t_d) sums.accidents += 1;
        }
        shard_sums[shard] = sums;
    };

    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    int n_threads = static_cast<int>(std::min<unsigned>(hw, kShards));
    if (n_threads <= 1 || n_mc < 4096) {
        for (int s = 0; s < kShards; ++s) run_shard(s);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (int t = 0; t < n_threads; ++t) {
            pool.emplace_back([&, t] {
                for (int s = t; s < kShards; s += n_threads) run_shard(s);
            });
        }
        for (auto& th : pool) th.join();
    }

    double far_sum = 0.0;
    std::int64_t accidents = 0;
    for (const auto& s : shard_sums) {  // fixed-order reduction
        far_sum += s.far;
        accidents += s.accidents;
    }

    std::sort(per_driver.begin(), per_driver.end());
    FarResult out;
    out.far = far_sum / static_cast<double>(n_mc);
    out.per_driver_p10 = quantile_sorted(per_driver, 0.10);
    out.per_driver_p90 = quantile_sorted(per_driver, 0.90);
    out.realized_poa = static_cast<double>(accidents) / static_cast<double>(n_mc);
    return out;
}

std::vector<FarCurveRow> far_poa_curve(const PopulationModel& pop, const ErrorModel& err,
                                       std::span<const double> poa_grid, std::int64_t n_mc,
                                       std::uint64_t seed) {
    std::vector<FarCurveRow> rows;
    rows.reserve(poa_grid.size());
    for (std::size_t i = 0; i < poa_grid.size(); ++i) {
        double poa = poa_grid[i];
        FarCurveRow row;
        row.poa = poa;
        row.far_pop = far_population(pop.marginal, poa);
        FarResult fr = far_individual(pop, err, poa, n_mc, derive_seed(seed, i));
        row.far_ind = fr.far;
        row.far_ind_p10 = fr.per_driver_p10;
        row.far_ind_p90 = fr.per_driver_p90;
        row.realized_poa = fr.realized_poa;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace brt
