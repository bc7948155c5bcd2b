#include "brt/mixed_model.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <thread>

#include "brt/errors.hpp"
#include "brt/util.hpp"

namespace brt {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

// Row-major lower-triangle index pairs (i, j), j <= i.
struct TrilIndex {
    int i[kNumCholParams];
    int j[kNumCholParams];
    constexpr TrilIndex() : i{}, j{} {
        int k = 0;
        for (int a = 0; a < kNumCoeffs; ++a) {
            for (int b = 0; b <= a; ++b) {
                i[k] = a;
                j[k] = b;
                ++k;
            }
        }
    }
};
constexpr TrilIndex kTril;

}  // namespace

Eigen::VectorXd pack_theta(const Matrix9& chol_lower, double sigma2) {
    Eigen::VectorXd theta(kNumThetaParams);
    for (int k = 0; k < kNumCholParams; ++k) theta[k] = chol_lower(kTril.i[k], kTril.j[k]);
    theta[kNumCholParams] = std::log(sigma2);
    return theta;
}

void unpack_theta(const Eigen::VectorXd& theta, Matrix9& chol_lower, double& sigma2) {
    if (theta.size() != kNumThetaParams) {
        throw std::invalid_argument("theta must have " + std::to_string(kNumThetaParams) +
                                    " entries");
    }
    chol_lower.setZero();
    for (int k = 0; k < kNumCholParams; ++k) chol_lower(kTril.i[k], kTril.j[k]) = theta[k];
    sigma2 = std::exp(theta[kNumCholParams]);
}

Matrix9 pinv_psd(const Matrix9& m) {
    Eigen::SelfAdjointEigenSolver<Matrix9> es(m);
    if (es.info() != Eigen::Success) throw NumericError("pinv_psd: eigendecomposition failed");
    const auto& vals = es.eigenvalues();
    double cutoff = 1e-10 * std::max(vals.cwiseAbs().maxCoeff(), 0.0);
    Vector9 inv = Vector9::Zero();
    for (int k = 0; k < kNumCoeffs; ++k) {
        if (vals[k] > cutoff) inv[k] = 1.0 / vals[k];
    }
    return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

double log_likelihood(const TrainingSet& train, const Vector9& beta,
                      const Matrix9& sigma_gamma, double sigma2) {
    if (!(sigma2 > 0.0)) throw NumericError("log_likelihood: sigma2 must be > 0");
    double ll = 0.0;
    int n_total = 0;
    for (const auto& d : train.drivers) {
        const int n = d.n();
        Eigen::MatrixXd v = d.X * sigma_gamma * d.X.transpose();
        v.diagonal().array() += sigma2;
        Eigen::LLT<Eigen::MatrixXd> llt(v);
        if (llt.info() != Eigen::Success) {
            throw NumericError("log_likelihood: V not positive definite for driver " +
                               d.driver_id);
        }
        double logdet = 0.0;
        for (int k = 0; k < n; ++k) logdet += 2.0 * std::log(llt.matrixL()(k, k));
        Eigen::VectorXd r = d.y - d.X * beta;
        ll += -0.5 * logdet - 0.5 * r.dot(llt.solve(r));
        n_total += n;
    }
    return ll - 0.5 * n_total * kLog2Pi;
}

namespace {

// Evaluates the profiled log-likelihood and gradient with preallocated
// per-driver workspaces. Drivers are processed in fixed contiguous chunks
// whose partial sums combine in chunk order, so results are bit-identical
// for any thread count.
class LikelihoodEngine {
public:
    LikelihoodEngine(const TrainingSet& train, bool reml, bool parallel = true)
        : train_(train), reml_(reml), parallel_(parallel) {
        buffers_.resize(train.drivers.size());
        for (std::size_t d = 0; d < train.drivers.size(); ++d) {
            const int n = train.drivers[d].n();
            Buffer& b = buffers_[d];
            b.v.resize(n, n);
            b.xs.resize(n, kNumCoeffs);
            b.w.resize(n, kNumCoeffs);
            b.linv.resize(n, n);
            b.r.resize(n);
            b.vir.resize(n);
        }
        // Chunk boundaries depend only on the training set, never on the
        // hardware, so sums are bit-identical for any thread count.
        const std::size_t n_drivers = train.drivers.size();
        constexpr std::size_t kChunk = 64;
        for (std::size_t lo = 0; lo < n_drivers; lo += kChunk) {
            chunks_.push_back({lo, std::min(lo + kChunk, n_drivers)});
        }
        if (chunks_.empty()) chunks_.push_back({0, 0});
    }

    ProfiledLikelihood evaluate(const Eigen::VectorXd& theta) {
        Matrix9 chol;
        double sigma2 = 0.0;
        unpack_theta(theta, chol, sigma2);
        const Matrix9 sigma_gamma = chol * chol.transpose();

        struct Pass1Sums {
            Matrix9 m = Matrix9::Zero();
            Vector9 xty = Vector9::Zero();
            bool failed = false;
            std::size_t failed_driver = 0;
        };
        std::vector<Pass1Sums> p1(chunks_.size());

        run_chunks([&](std::size_t c) {
            Pass1Sums& sums = p1[c];
            for (std::size_t d = chunks_[c].first; d < chunks_[c].second; ++d) {
                if (!pass1_driver(d, sigma_gamma, sigma2)) {
                    sums.failed = true;
                    sums.failed_driver = d;
                    return;
                }
                sums.m += buffers_[d].m;
                sums.xty += buffers_[d].xt_vi_y;
            }
        });

        Matrix9 sum_m = Matrix9::Zero();
        Vector9 sum_xty = Vector9::Zero();
        for (const auto& sums : p1) {
            if (sums.failed) {
                throw NumericError("profiled_log_likelihood: V not positive definite for driver " +
                                   train_.drivers[sums.failed_driver].driver_id);
            }
            sum_m += sums.m;
            sum_xty += sums.xty;
        }

        ProfiledLikelihood out;
        out.cov_beta = pinv_psd(sum_m);
        out.beta_hat = out.cov_beta * sum_xty;

        // Pass 2 at the profiled beta; the envelope theorem makes the
        // partial derivative there the full profile gradient.
        struct Pass2Sums {
            double value = 0.0;
            Matrix9 uut = Matrix9::Zero();
            double g_ls2 = 0.0;
            Matrix9 reml_m_sm_m = Matrix9::Zero();
            double reml_tr = 0.0;
        };
        std::vector<Pass2Sums> p2(chunks_.size());
        Matrix9 sm_inv = Matrix9::Zero();
        if (reml_) sm_inv = pinv_psd(sum_m);

        run_chunks([&](std::size_t c) {
            Pass2Sums& sums = p2[c];
            for (std::size_t d = chunks_[c].first; d < chunks_[c].second; ++d) {
                const DriverData& data = train_.drivers[d];
                Buffer& b = buffers_[d];
                b.r.noalias() = data.y - data.X * out.beta_hat;
                b.vir = b.llt.solve(b.r);
                sums.value += -0.5 * b.logdet_v - 0.5 * b.r.dot(b.vir);
                Vector9 u = data.X.transpose() * b.vir;
                sums.uut += u * u.transpose();
                sums.g_ls2 += 0.5 * sigma2 * (b.vir.squaredNorm() - b.trace_vinv);
                if (reml_) {
                    sums.reml_m_sm_m += b.m * sm_inv * b.m;
                    sums.reml_tr += (sm_inv * (b.w.transpose() * b.w)).trace();
                }
            }
        });

        int n_total = train_.total_observations();
        out.value = -0.5 * n_total * kLog2Pi;
        Matrix9 sum_uut = Matrix9::Zero();
        double g_lsigma2 = 0.0;
        Matrix9 reml_l = Matrix9::Zero();
        double reml_tr = 0.0;
        for (const auto& sums : p2) {
            out.value += sums.value;
            sum_uut += sums.uut;
            g_lsigma2 += sums.g_ls2;
            reml_l += sums.reml_m_sm_m;
            reml_tr += sums.reml_tr;
        }

        // d ll / d L_ij = ((sum_u u u' - sum_m M) L)_ij on the lower triangle.
        Matrix9 grad_l = (sum_uut - sum_m) * chol;

        if (reml_) {
            Eigen::SelfAdjointEigenSolver<Matrix9> es(sum_m);
            if (es.info() != Eigen::Success) {
                throw NumericError("reml: eigendecomposition failed");
            }
            double cutoff = 1e-10 * es.eigenvalues().cwiseAbs().maxCoeff();
            double logdet_sm = 0.0;
            for (int k = 0; k < kNumCoeffs; ++k) {
                if (es.eigenvalues()[k] > cutoff) logdet_sm += std::log(es.eigenvalues()[k]);
            }
            out.value -= 0.5 * logdet_sm;
            grad_l += reml_l * chol;
            g_lsigma2 += 0.5 * sigma2 * reml_tr;
        }

        out.gradient.resize(kNumThetaParams);
        for (int k = 0; k < kNumCholParams; ++k) {
            out.gradient[k] = grad_l(kTril.i[k], kTril.j[k]);
        }
        out.gradient[kNumCholParams] = g_lsigma2;
        return out;
    }

    // Expected information of theta (ML form) from per-driver blocks:
    //   I_ab      = sum_d [ P_ia,jb P_ib,ja + A_ja,jb M_ia,ib ],  P = M L, A = L'M L
    //   I_a,ls2   = sigma2 * sum_d (N L)_ia,ja,                   N = X'V^-2 X
    //   I_ls2,ls2 = sigma2^2 / 2 * sum_d tr(V^-2)
    // Valid right after evaluate() at the same theta (reuses factorizations).
    Eigen::MatrixXd expected_information(const Eigen::VectorXd& theta) {
        Matrix9 chol;
        double sigma2 = 0.0;
        unpack_theta(theta, chol, sigma2);

        Eigen::MatrixXd info = Eigen::MatrixXd::Zero(kNumThetaParams, kNumThetaParams);
        for (std::size_t d = 0; d < train_.drivers.size(); ++d) {
            Buffer& b = buffers_[d];
            Matrix9 nn = b.w.transpose() * b.w;  // X'V^-2 X
            Matrix9 p = b.m * chol;
            Matrix9 a = chol.transpose() * p;
            Matrix9 nl = nn * chol;
            // tr(V^-2) = |V^-1|_F^2 with V^-1 = Linv' Linv
            double tr_v2 = (b.linv.transpose() * b.linv).squaredNorm();

            for (int ka = 0; ka < kNumCholParams; ++ka) {
                int ia = kTril.i[ka], ja = kTril.j[ka];
                for (int kb = ka; kb < kNumCholParams; ++kb) {
                    int ib = kTril.i[kb], jb = kTril.j[kb];
                    info(ka, kb) += p(ia, jb) * p(ib, ja) + a(ja, jb) * b.m(ia, ib);
                }
                info(ka, kNumCholParams) += sigma2 * nl(ia, ja);
            }
            info(kNumCholParams, kNumCholParams) += 0.5 * sigma2 * sigma2 * tr_v2;
        }
        info.triangularView<Eigen::StrictlyLower>() =
            info.triangularView<Eigen::StrictlyUpper>().transpose();
        return info;
    }

private:
    struct Buffer {
        Eigen::MatrixXd v, xs, w, linv;
        Eigen::VectorXd r, vir;
        Eigen::LLT<Eigen::MatrixXd> llt;
        Matrix9 m = Matrix9::Zero();
        Vector9 xt_vi_y = Vector9::Zero();
        double logdet_v = 0.0;
        double trace_vinv = 0.0;
    };

    bool pass1_driver(std::size_t d, const Matrix9& sigma_gamma, double sigma2) {
        const DriverData& data = train_.drivers[d];
        Buffer& b = buffers_[d];
        const int n = data.n();

        b.xs.noalias() = data.X * sigma_gamma;
        b.v.noalias() = b.xs * data.X.transpose();
        b.v.diagonal().array() += sigma2;
        b.llt.compute(b.v);
        if (b.llt.info() != Eigen::Success) return false;

        b.logdet_v = 0.0;
        for (int k = 0; k < n; ++k) b.logdet_v += 2.0 * std::log(b.llt.matrixL()(k, k));

        b.w = b.llt.solve(data.X);
        b.m.noalias() = data.X.transpose() * b.w;
        b.vir = b.llt.solve(data.y);
        b.xt_vi_y.noalias() = data.X.transpose() * b.vir;

        b.linv.setIdentity(n, n);
        b.llt.matrixL().solveInPlace(b.linv);
        b.trace_vinv = b.linv.squaredNorm();
        return true;
    }

    template <typename Fn>
    void run_chunks(Fn&& fn) {
        unsigned hw = std::max(1u, std::thread::hardware_concurrency());
        if (!parallel_ || chunks_.size() <= 1 || hw < 2) {
            for (std::size_t c = 0; c < chunks_.size(); ++c) fn(c);
            return;
        }
        std::size_t n_threads = std::min<std::size_t>(hw, chunks_.size());
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (std::size_t t = 0; t < n_threads; ++t) {
            pool.emplace_back([&fn, t, n_threads, n_chunks = chunks_.size()] {
                for (std::size_t c = t; c < n_chunks; c += n_threads) fn(c);
            });
        }
        for (auto& th : pool) th.join();
    }

    const TrainingSet& train_;
    bool reml_;
    bool parallel_;
    std::vector<Buffer> buffers_;
    std::vector<std::pair<std::size_t, std::size_t>> chunks_;
};

MixedModelParams assemble_params(const TrainingSet& train, const Eigen::VectorXd& theta,
                                 const ProfiledLikelihood& eval, int iterations,
                                 bool converged) {
    Matrix9 chol;
    double sigma2 = 0.0;
    unpack_theta(theta, chol, sigma2);
    MixedModelParams params;
    params.beta = eval.beta_hat;
    params.sigma2 = sigma2;
    params.sigma_gamma = chol * chol.transpose();
    params.sigma_gamma = 0.5 * (params.sigma_gamma + params.sigma_gamma.transpose()).eval();
    params.cov_beta = eval.cov_beta;
    params.meta.n_observations = train.total_observations();
    params.meta.n_drivers = static_cast<int>(train.drivers.size());
    params.meta.log_likelihood = eval.value;
    params.meta.iterations = iterations;
    params.meta.gradient_norm = eval.gradient.norm();
    params.meta.converged = converged;
    params.meta.theta = theta;
    return params;
}

Eigen::VectorXd initial_theta(const TrainingSet& train, bool diagonal) {
    // Pooled OLS for beta, per-driver ridge offsets for an empirical
    // Sigma_gamma start, half the pooled residual variance for sigma2.
    const int n_total = train.total_observations();
    Matrix9 xtx = Matrix9::Zero();
    Vector9 xty = Vector9::Zero();
    for (const auto& d : train.drivers) {
        xtx += d.X.transpose() * d.X;
        xty += d.X.transpose() * d.y;
    }
    Vector9 beta0 = pinv_psd(xtx) * xty;

    double rss = 0.0;
    Matrix9 cov = Matrix9::Zero();
    Vector9 mean = Vector9::Zero();
    for (const auto& d : train.drivers) {
        Eigen::VectorXd r = d.y - d.X * beta0;
        rss += r.squaredNorm();
        Matrix9 g_lhs = d.X.transpose() * d.X + Matrix9::Identity();
        Vector9 g = g_lhs.ldlt().solve(d.X.transpose() * r);
        mean += g;
        cov += g * g.transpose();
    }
    const double n_drivers = static_cast<double>(train.drivers.size());
    mean /= n_drivers;
    cov = cov / n_drivers - mean * mean.transpose();
    if (diagonal) cov = cov.diagonal().asDiagonal();

    // Project to PD with a small floor so the Cholesky start is well-defined.
    Eigen::SelfAdjointEigenSolver<Matrix9> es(cov);
    Vector9 vals = es.eigenvalues().cwiseMax(1e-6);
    Matrix9 cov_pd = es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().transpose();
    Eigen::LLT<Matrix9> llt(cov_pd);
    Matrix9 l0 = llt.matrixL();
    if (diagonal) {
        Matrix9 d0 = Matrix9::Zero();
        d0.diagonal() = l0.diagonal();
        l0 = d0;
    }

    double sigma2_0 = std::max(0.5 * rss / n_total, 1e-6);
    return pack_theta(l0, sigma2_0);
}

void apply_diagonal_mask(Eigen::VectorXd& v) {
    for (int k = 0; k < kNumCholParams; ++k) {
        if (kTril.i[k] != kTril.j[k]) v[k] = 0.0;
    }
}

}  // namespace

ProfiledLikelihood profiled_log_likelihood(const TrainingSet& train,
                                           const Eigen::VectorXd& theta, bool reml) {
    LikelihoodEngine engine(train, reml);
    return engine.evaluate(theta);
}

MixedModelParams fit(const TrainingSet& train, const FitOptions& options) {
    const int n_drivers = static_cast<int>(train.drivers.size());
    const int n_total = train.total_observations();
    if (n_drivers < options.min_drivers) {
        throw ValidationError("fit: need at least " + std::to_string(options.min_drivers) +
                              " drivers, got " + std::to_string(n_drivers));
    }
    if (n_total < options.min_observations) {
        throw ValidationError("fit: need at least " + std::to_string(options.min_observations) +
                              " observations, got " + std::to_string(n_total));
    }
    for (const auto& d : train.drivers) {
        if (!d.y.allFinite() || !d.X.allFinite()) {
            throw ValidationError("fit: non-finite training values for driver " + d.driver_id);
        }
    }

    Eigen::VectorXd theta;
    if (options.init) {
        Matrix9 sg = options.init->sigma_gamma;
        Eigen::SelfAdjointEigenSolver<Matrix9> es(sg);
        Vector9 vals = es.eigenvalues().cwiseMax(1e-10);
        Matrix9 sg_pd = es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().transpose();
        Eigen::LLT<Matrix9> llt(sg_pd);
        if (llt.info() != Eigen::Success || !(options.init->sigma2 > 0.0)) {
            throw ValidationError("fit: invalid initial parameters");
        }
        theta = pack_theta(Matrix9(llt.matrixL()), options.init->sigma2);
    } else {
        theta = initial_theta(train, options.diagonal_sigma_gamma);
    }
    if (options.diagonal_sigma_gamma) apply_diagonal_mask(theta);

    LikelihoodEngine engine(train, options.reml);
    auto evaluate = [&](const Eigen::VectorXd& point) {
        ProfiledLikelihood e = engine.evaluate(point);
        if (options.diagonal_sigma_gamma) apply_diagonal_mask(e.gradient);
        return e;
    };

    ProfiledLikelihood eval = evaluate(theta);

    const bool trace = std::getenv("BRT_FIT_TRACE") != nullptr;
    int iter = 0;

    // Monotone step acceptance shared by both phases: improvements, or
    // equal-value moves that shrink the gradient (polishing at the roundoff
    // floor of the objective).
    auto try_step = [&](const Eigen::VectorXd& direction) {
        Eigen::VectorXd step = direction;
        if (options.diagonal_sigma_gamma) apply_diagonal_mask(step);
        for (int halving = 0; halving < 12; ++halving, step *= 0.5) {
            Eigen::VectorXd proposal = theta + step;
            if (!proposal.allFinite() || std::abs(proposal[kNumCholParams]) > 46.0) continue;
            ProfiledLikelihood trial;
            try {
                trial = evaluate(proposal);
            } catch (const NumericError&) {
                continue;
            }
            if (!std::isfinite(trial.value)) continue;
            if (trial.value > eval.value ||
                (trial.value >= eval.value - 1e-11 * std::abs(eval.value) &&
                 trial.gradient.norm() < eval.gradient.norm())) {
                theta = proposal;
                eval = std::move(trial);
                return true;
            }
        }
        return false;
    };

    // Phase 1: damped Fisher scoring. An order of magnitude cheaper per
    // iteration than phase 2, so it runs as long as it makes progress; the
    // expected information degrades near the PSD boundary, and genuine
    // stalls hand over to phase 2.
    const int phase1_cap = 3 * options.max_iterations / 4;
    double lambda = 1e-3;
    int stalled = 0;
    for (; iter < phase1_cap; ++iter) {
        if (trace) {
            std::fprintf(stderr, "scoring %d ll=%.9f gnorm=%.3e lambda=%.1e\n", iter,
                         eval.value, eval.gradient.norm(), lambda);
        }
        if (eval.gradient.norm() <= options.gradient_tolerance) {
            return assemble_params(train, theta, eval, iter, true);
        }
        Eigen::MatrixXd info = engine.expected_information(theta);

        double before = eval.value;
        bool stepped = false;
        for (int attempt = 0; attempt < 12 && !stepped; ++attempt) {
            Eigen::MatrixXd damped = info;
            damped.diagonal().array() += lambda * std::max(info.diagonal().maxCoeff(), 1e-12);
            Eigen::VectorXd dir = Eigen::LDLT<Eigen::MatrixXd>(damped).solve(eval.gradient);
            stepped = try_step(dir);
            if (stepped) {
                lambda = std::max(lambda * 0.3, 1e-10);
            } else {
                lambda = std::min(lambda * 10.0, 1e10);
            }
        }
        if (!stepped) break;
        if (eval.value - before < 1e-9 * (1.0 + std::abs(eval.value))) {
            if (++stalled >= 5) {
                ++iter;
                break;
            }
        } else {
            stalled = 0;
        }
    }

    // Phase 2: trust-region Newton on the observed Hessian (central
    // differences of the analytic gradient), recomputed each iteration.
    // Columns split across two single-threaded worker engines; identical
    // chunking keeps every path bit-identical.
    LikelihoodEngine hessian_engine_a(train, options.reml, /*parallel=*/false);
    LikelihoodEngine hessian_engine_b(train, options.reml, /*parallel=*/false);
    auto fd_hessian = [&](const Eigen::VectorXd& point, const Eigen::VectorXd&) {
        Eigen::MatrixXd h(kNumThetaParams, kNumThetaParams);
        auto column_worker = [&](LikelihoodEngine& eng, int first) {
            for (int k = first; k < kNumThetaParams; k += 2) {
                double step = 1e-5 * (1.0 + std::abs(point[k]));
                Eigen::VectorXd hi = point, lo = point;
                hi[k] += step;
                lo[k] -= step;
                Eigen::VectorXd ghi = eng.evaluate(hi).gradient;
                Eigen::VectorXd glo = eng.evaluate(lo).gradient;
                if (options.diagonal_sigma_gamma) {
                    apply_diagonal_mask(ghi);
                    apply_diagonal_mask(glo);
                }
                h.col(k) = (ghi - glo) / (2.0 * step);
            }
        };
        if (std::thread::hardware_concurrency() >= 2) {
            std::thread worker([&] { column_worker(hessian_engine_a, 0); });
            column_worker(hessian_engine_b, 1);
            worker.join();
        } else {
            column_worker(hessian_engine_a, 0);
            column_worker(hessian_engine_a, 1);
        }
        return Eigen::MatrixXd(0.5 * (h + h.transpose()));
    };

    double radius = 0.1;
    Eigen::MatrixXd neg_h;
    bool hessian_fresh = false;
    for (; iter < options.max_iterations; ++iter) {
        if (trace) {
            std::fprintf(stderr, "newton %d ll=%.9f gnorm=%.3e radius=%.1e\n", iter, eval.value,
                         eval.gradient.norm(), radius);
        }
        if (eval.gradient.norm() <= options.gradient_tolerance) {
            return assemble_params(train, theta, eval, iter, true);
        }
        if (!hessian_fresh) {
            neg_h = -fd_hessian(theta, eval.gradient);
            hessian_fresh = true;
        }
        double scale = std::max(neg_h.diagonal().cwiseAbs().maxCoeff(), 1e-12);

        // Levenberg path: smallest tried damping whose step is PD-solvable
        // and fits inside the trust region.
        Eigen::VectorXd step;
        double mu = 0.0;
        for (int k = 0; k < 64; ++k) {
            Eigen::MatrixXd damped = neg_h;
            damped.diagonal().array() += mu * scale;
            Eigen::LDLT<Eigen::MatrixXd> ldlt(damped);
            if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
                Eigen::VectorXd cand = ldlt.solve(eval.gradient);
                if (options.diagonal_sigma_gamma) apply_diagonal_mask(cand);
                if (cand.norm() <= radius) {
                    step = std::move(cand);
                    break;
                }
            }
            mu = mu == 0.0 ? 1e-10 : mu * 4.0;
        }
        if (step.size() == 0) {
            step = eval.gradient * (radius / std::max(eval.gradient.norm(), 1e-300));
            if (options.diagonal_sigma_gamma) apply_diagonal_mask(step);
        }

        double predicted =
            eval.gradient.dot(step) - 0.5 * step.dot(neg_h.selfadjointView<Eigen::Lower>() * step);
        Eigen::VectorXd proposal = theta + step;
        bool ok = proposal.allFinite() && std::abs(proposal[kNumCholParams]) < 46.0;
        ProfiledLikelihood trial;
        if (ok) {
            try {
                trial = evaluate(proposal);
                ok = std::isfinite(trial.value);
            } catch (const NumericError&) {
                ok = false;
            }
        }

        double actual = ok ? trial.value - eval.value : -1.0;
        bool floor_polish = ok && std::abs(predicted) < 1e-10 * (1.0 + std::abs(eval.value)) &&
                            trial.value >= eval.value - 1e-11 * std::abs(eval.value) &&
                            trial.gradient.norm() < eval.gradient.norm();
        if (ok && (actual > 0.0 || floor_polish)) {
            double rho = predicted > 0.0 ? actual / predicted : 1.0;
            double step_norm = step.norm();
            theta = proposal;
            eval = std::move(trial);
            hessian_fresh = false;
            if (rho > 0.25) {
                radius = std::min(std::max(radius, 2.0 * step_norm), 10.0);
            } else if (rho < 0.05) {
                radius = std::max(radius * 0.5, 1e-12);
            }
        } else {
            radius *= 0.25;
            if (radius < 1e-13) {
                if (eval.gradient.norm() <= options.gradient_tolerance) {
                    return assemble_params(train, theta, eval, iter, true);
                }
                MixedModelParams last = assemble_params(train, theta, eval, iter, false);
                throw FitError("fit: optimizer stalled at gradient norm " +
                                   format_double(eval.gradient.norm()),
                               last, eval.gradient.norm());
            }
        }
    }

    if (eval.gradient.norm() <= options.gradient_tolerance) {
        return assemble_params(train, theta, eval, iter, true);
    }
    MixedModelParams last = assemble_params(train, theta, eval, iter, false);
    throw FitError("fit: no convergence after " + std::to_string(options.max_iterations) +
                       " iterations (gradient norm " + format_double(eval.gradient.norm()) + ")",
                   last, eval.gradient.norm());
}

MixedModelParams adjust_intercepts(const MixedModelParams& params, double delta_seconds,
                                   double headway_ref) {
    MixedModelParams out = params;
    for (int s = 0; s < kNumStimuli; ++s) {
        int b = 3 * s;
        double eta = params.beta[b] + params.beta[b + 1] * headway_ref +
                     params.beta[b + 2] * headway_ref * headway_ref;
        double mean_brt = std::exp(eta + 0.5 * params.sigma2);
        out.beta[b] += std::log((mean_brt + delta_seconds) / mean_brt);
    }
    return out;
}

}  // namespace brt
