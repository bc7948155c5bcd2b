#include "brt/simulate.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdio>

#include "brt/driver_estimator.hpp"
#include "brt/errors.hpp"
#include "brt/stats.hpp"

namespace brt {

namespace {

constexpr double kEps = 1e-12;

std::string zero_pad(const char* prefix, int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%04d", prefix, index);
    return std::string(buf);
}

// Matrix square root usable for PSD matrices (zero eigenvalues allowed).
Matrix9 psd_sqrt(const Matrix9& m) {
    Eigen::SelfAdjointEigenSolver<Matrix9> es(m);
    if (es.info() != Eigen::Success) throw NumericError("psd_sqrt: eigendecomposition failed");
    Vector9 vals = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().transpose();
}

struct Phase {
    double duration;
    double accel;
};

// Samples a piecewise-constant-acceleration profile on the dt grid. Phase
// boundaries need not align with the grid. A vehicle that reaches speed 0
// stays stopped (zero speed and acceleration) from that point on.
VehicleTrack make_profile_track(std::string vehicle, std::string driver, std::string lane,
                                double p0, double v0, std::span<const Phase> phases,
                                double dt) {
    double total = 0.0;
    for (const auto& ph : phases) total += ph.duration;
    int n_samples = static_cast<int>(std::floor(total / dt + kEps)) + 1;

    VehicleTrack track;
    track.vehicle_id = std::move(vehicle);
    track.driver_id = std::move(driver);
    track.lane_id = std::move(lane);
    track.dt = dt;
    track.samples.reserve(n_samples);

    double t_cur = 0.0, p = p0, v = v0;
    std::size_t phase_idx = 0;
    double into_phase = 0.0;
    bool stopped = (v <= 0.0);

    auto advance_to = [&](double target) {
        while (t_cur < target - kEps) {
            while (phase_idx < phases.size() &&
                   into_phase >= phases[phase_idx].duration - kEps) {
                into_phase = 0.0;
                ++phase_idx;
            }
            double a = phase_idx < phases.size() ? phases[phase_idx].accel : 0.0;
            double remaining = phase_idx < phases.size()
                                   ? phases[phase_idx].duration - into_phase
                                   : target - t_cur;
            double step = std::min(remaining, target - t_cur);
            if (stopped) {
                // hold position
            } else if (a < 0.0 && v + a * step < 0.0) {
                double t_stop = v / (-a);
                p += v * t_stop + 0.5 * a * t_stop * t_stop;
                v = 0.0;
                stopped = true;
            } else {
                p += v * step + 0.5 * a * step * step;
                v += a * step;
            }
            t_cur += step;
            into_phase += step;
        }
        t_cur = target;
    };

    for (int k = 0; k < n_samples; ++k) {
        double t = k * dt;
        advance_to(t);
        std::size_t idx = phase_idx;
        double into = into_phase;
        while (idx < phases.size() && into >= phases[idx].duration - kEps) {
            into = 0.0;
            ++idx;
        }
        double a = (!stopped && idx < phases.size()) ? phases[idx].accel : 0.0;
        track.samples.push_back({t, p, std::max(v, 0.0), a});
    }
    return track;
}

void check_pair_separation(const VehicleTrack& leader, const VehicleTrack& follower,
                           int event_index) {
    std::size_t n = std::min(leader.samples.size(), follower.samples.size());
    for (std::size_t k = 0; k < n; ++k) {
        if (leader.samples[k].position - follower.samples[k].position <= 0.5) {
            throw ValidationError("planted event " + std::to_string(event_index) +
                                  " is infeasible: vehicles collide");
        }
    }
}

}  // namespace

Vector9 SimConfig::default_true_beta() {
    Vector9 beta;
    beta << -0.62, 0.55, -0.049,   // steady lead brake
            -0.55, 0.50, -0.040,   // non-steady lead brake
            -0.70, 0.60, -0.055;   // signal green->yellow
    return beta;
}

Matrix9 SimConfig::default_true_sigma_gamma() {
    Vector9 sds;
    sds << 0.25, 0.08, 0.010, 0.25, 0.08, 0.010, 0.25, 0.08, 0.010;
    Matrix9 corr = Matrix9::Identity();
    for (int a : {0, 3, 6}) {
        for (int b : {0, 3, 6}) {
            if (a != b) corr(a, b) = 0.5;  // cross-stimulus intercept correlation
        }
        corr(a, a + 1) = corr(a + 1, a) = 0.2;  // intercept-slope within a block
    }
    return sds.asDiagonal() * corr * sds.asDiagonal();
}

SimulatedObservations simulate_observations(const SimConfig& cfg) {
    SimulatedObservations out;
    Matrix9 root = psd_sqrt(cfg.true_sigma_gamma);
    double noise_sd = std::sqrt(std::max(cfg.true_sigma2, 0.0));

    for (int d = 0; d < cfg.n_drivers; ++d) {
        Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(d)));
        Vector9 z;
        for (int k = 0; k < kNumCoeffs; ++k) z[k] = rng.normal();
        Vector9 gamma = root * z;
        std::string driver_id = zero_pad("sim", d);

        int obs_index = 0;
        for (int s = 0; s < kNumStimuli; ++s) {
            for (int k = 0; k < cfg.obs_per_stimulus[s]; ++k) {
                BrtObservation o;
                o.driver_id = driver_id;
                o.stimulus = static_cast<StimulusType>(s);
                o.t_stimulus = static_cast<double>(obs_index++);
                o.time_headway = rng.uniform(cfg.headway_min, cfg.headway_max);
                double y = design_basis(o.stimulus, o.time_headway)
                               .dot(cfg.true_beta + gamma) +
                           noise_sd * rng.normal();
                o.brt = std::exp(y);
                out.observations.push_back(std::move(o));
            }
        }
        out.driver_ids.push_back(std::move(driver_id));
        out.gamma.push_back(gamma);
    }
    return out;
}

KinematicScene simulate_kinematics(const SimConfig& cfg, std::span<const PlantedEvent> planted) {
    const KinematicsConfig& kin = cfg.kin;
    KinematicScene scene;

    for (std::size_t e = 0; e < planted.size(); ++e) {
        const PlantedEvent& ev = planted[e];
        int idx = static_cast<int>(e);
        if (!(ev.brt > 0.0)) {
            throw ValidationError("planted event " + std::to_string(idx) +
                                  ": brt must be > 0");
        }
        if (!(ev.time_headway > 0.0)) {
            throw ValidationError("planted event " + std::to_string(idx) +
                                  ": time_headway must be > 0");
        }
        Rng rng(derive_seed(cfg.seed, 1000 + e));
        double jitter = rng.uniform(0.05, 0.95) * kin.dt;  // off-grid stimulus times
        std::string lane = zero_pad("lane", idx);

        RealizedEvent realized;
        realized.planted = ev;
        realized.lane_id = lane;

        if (ev.stimulus == StimulusType::steady_state_lead_brake) {
            if (kin.lead_in < 4.0) {
                throw ValidationError("planted event " + std::to_string(idx) +
                                      ": steady-state episode needs >= 4 s of lead-in");
            }
            double v = kin.cruise_speed;
            double t_stim = kin.lead_in + jitter;
            double duration = t_stim + ev.brt + kin.margin;
            double separation = ev.time_headway * v;

            std::vector<Phase> leader_ph = {{t_stim, 0.0}, {duration - t_stim, kin.leader_decel}};
            std::vector<Phase> follower_ph = {{t_stim + ev.brt, 0.0},
                                              {duration - t_stim - ev.brt, kin.follower_decel}};
            auto leader = make_profile_track(zero_pad("veh", idx) + "L",
                                             zero_pad("drv", idx) + "L", lane, separation, v,
                                             leader_ph, kin.dt);
            auto follower = make_profile_track(zero_pad("veh", idx) + "F",
                                               zero_pad("drv", idx) + "F", lane, 0.0, v,
                                               follower_ph, kin.dt);
            check_pair_separation(leader, follower, idx);
            realized.follower_vehicle = follower.vehicle_id;
            realized.t_stimulus = t_stim;
            realized.expect_detection = true;
            scene.tracks.push_back(std::move(leader));
            scene.tracks.push_back(std::move(follower));
        } else if (ev.stimulus == StimulusType::non_steady_lead_brake) {
            double v_f = kin.cruise_speed + kin.closing_speed;
            double v_l = kin.cruise_speed;
            double t_stim = kin.lead_in + jitter;
            double duration = t_stim + ev.brt + kin.margin;
            // Separation chosen so the headway at the stimulus is as planted.
            double sep0 = ev.time_headway * v_f + kin.closing_speed * t_stim;

            std::vector<Phase> leader_ph = {{t_stim, 0.0}, {duration - t_stim, kin.leader_decel}};
            std::vector<Phase> follower_ph = {{t_stim + ev.brt, 0.0},
                                              {duration - t_stim - ev.brt, kin.follower_decel}};
            auto leader = make_profile_track(zero_pad("veh", idx) + "L",
                                             zero_pad("drv", idx) + "L", lane, sep0, v_l,
                                             leader_ph, kin.dt);
            auto follower = make_profile_track(zero_pad("veh", idx) + "F",
                                               zero_pad("drv", idx) + "F", lane, 0.0, v_f,
                                               follower_ph, kin.dt);
            check_pair_separation(leader, follower, idx);
            realized.follower_vehicle = follower.vehicle_id;
            realized.t_stimulus = t_stim;
            realized.expect_detection = ev.time_headway < 10.0;
            scene.tracks.push_back(std::move(leader));
            scene.tracks.push_back(std::move(follower));
        } else {
            double v = kin.cruise_speed;
            double t_stim = kin.lead_in + jitter;
            double duration = t_stim + ev.brt + kin.margin;
            double driver_pos_at_stim = v * t_stim;
            double signal_pos = driver_pos_at_stim + ev.time_headway * v;

            std::vector<Phase> driver_ph = {{t_stim + ev.brt, 0.0},
                                            {duration - t_stim - ev.brt, kin.follower_decel}};
            auto driver = make_profile_track(zero_pad("veh", idx) + "F",
                                             zero_pad("drv", idx) + "F", lane, 0.0, v, driver_ph,
                                             kin.dt);
            driver.turns_at_intersection = ev.turns_at_intersection;
            realized.follower_vehicle = driver.vehicle_id;
            realized.t_stimulus = t_stim;
            realized.expect_detection = ev.time_headway <= 10.0 && !ev.with_intervening_car &&
                                        !ev.turns_at_intersection;

            if (ev.with_intervening_car) {
                // Between driver and signal at the change, braking first.
                double mid_gap = 0.4 * ev.time_headway * v;
                double t_mid_brake = t_stim + 0.4 * ev.brt;
                std::vector<Phase> mid_ph = {{t_mid_brake, 0.0},
                                             {duration - t_mid_brake, kin.leader_decel}};
                auto mid = make_profile_track(zero_pad("veh", idx) + "M",
                                              zero_pad("drv", idx) + "M", lane, mid_gap, v,
                                              mid_ph, kin.dt);
                scene.tracks.push_back(std::move(mid));
            }

            SignalPhaseEvent sig;
            sig.signal_id = zero_pad("sig", idx);
            sig.lane_id = lane;
            sig.position = signal_pos;
            sig.t_change = t_stim;
            sig.from_phase = SignalPhase::green;
            sig.to_phase = SignalPhase::yellow;
            scene.signals.push_back(std::move(sig));
            scene.tracks.push_back(std::move(driver));
        }
        scene.events.push_back(std::move(realized));
    }
    return scene;
}

KinematicScene simulate_stimulus_free(const SimConfig& cfg, int n_pairs) {
    const KinematicsConfig& kin = cfg.kin;
    KinematicScene scene;
    const double duration = 30.0;
    int n_samples = static_cast<int>(std::floor(duration / kin.dt + kEps)) + 1;

    for (int i = 0; i < n_pairs; ++i) {
        Rng rng(derive_seed(cfg.seed, 7000 + static_cast<std::uint64_t>(i)));
        double amp = rng.uniform(0.02, 0.08);  // well below the 0.1524 threshold
        double period = rng.uniform(4.0, 9.0);
        double phase = rng.uniform(0.0, 6.283185307179586);
        double omega = 6.283185307179586 / period;
        double v0 = kin.cruise_speed;
        double sep = 35.0;
        std::string lane = zero_pad("qlane", i);

        // Identical speed wiggle on both vehicles keeps separation constant.
        auto make = [&](const char* suffix, double p0) {
            VehicleTrack t;
            t.vehicle_id = zero_pad("qveh", i) + suffix;
            t.driver_id = zero_pad("qdrv", i) + suffix;
            t.lane_id = lane;
            t.dt = kin.dt;
            t.samples.reserve(n_samples);
            for (int k = 0; k < n_samples; ++k) {
                double tt = k * kin.dt;
                double a = amp * std::sin(omega * tt + phase);
                double v = v0 + (amp / omega) * (std::cos(phase) - std::cos(omega * tt + phase));
                double p = p0 + v0 * tt + (amp / omega) * std::cos(phase) * tt -
                           (amp / (omega * omega)) *
                               (std::sin(omega * tt + phase) - std::sin(phase));
                t.samples.push_back({tt, p, v, a});
            }
            return t;
        };
        scene.tracks.push_back(make("L", sep));
        scene.tracks.push_back(make("F", 0.0));
    }
    return scene;
}

DetectorCounts evaluate_planted(const KinematicScene& scene, const DetectorConfig& det,
                                double tolerance) {
    DetectorCounts counts;
    for (const auto& ev : scene.events) {
        const VehicleTrack* follower = nullptr;
        const VehicleTrack* leader = nullptr;
        for (const auto& t : scene.tracks) {
            if (t.lane_id != ev.lane_id) continue;
            if (t.vehicle_id == ev.follower_vehicle) {
                follower = &t;
            } else if (t.vehicle_id.back() == 'L') {
                leader = &t;
            }
        }
        if (follower == nullptr) continue;

        std::vector<BrtObservation> obs;
        switch (ev.planted.stimulus) {
            case StimulusType::steady_state_lead_brake:
                if (leader != nullptr) obs = detect_steady_state(*leader, *follower, det);
                break;
            case StimulusType::non_steady_lead_brake:
                if (leader != nullptr) obs = detect_nonsteady(*leader, *follower, det);
                break;
            case StimulusType::signal_green_to_yellow:
                obs = detect_signal(*follower, scene.tracks, scene.signals, det);
                break;
        }

        if (ev.expect_detection) {
            counts.planted += 1;
            bool hit = false;
            for (const auto& o : obs) {
                if (!hit && std::abs(o.brt - ev.planted.brt) <= tolerance) {
                    hit = true;
                } else {
                    counts.false_positives += 1;
                }
            }
            if (hit) {
                counts.hits += 1;
            } else {
                counts.misses += 1;
            }
        } else {
            if (obs.empty()) {
                counts.suppressed_ok += 1;
            } else {
                counts.false_positives += static_cast<int>(obs.size());
            }
        }
    }
    return counts;
}

SimReport convergence_study(const SimConfig& cfg, std::span<const int> sample_sizes,
                            int replications, StimulusType target) {
    if (sample_sizes.empty()) {
        throw std::invalid_argument("convergence_study: sample size grid is empty");
    }
    if (replications < 1) {
        throw std::invalid_argument("convergence_study: need at least one replication");
    }

    MixedModelParams truth;
    truth.beta = cfg.true_beta;
    truth.sigma2 = cfg.true_sigma2;
    truth.sigma_gamma = cfg.true_sigma_gamma;
    truth.cov_beta = Matrix9::Zero();

    const int max_n = *std::max_element(sample_sizes.begin(), sample_sizes.end());
    const Matrix9 root = psd_sqrt(cfg.true_sigma_gamma);
    const double noise_sd = std::sqrt(std::max(cfg.true_sigma2, 0.0));
    const StimulusType cross = static_cast<StimulusType>((static_cast<int>(target) + 1) % 3);

    SimReport report;
    report.replications = replications;
    report.comparison_size = max_n;
    report.by_sample_size.reserve(sample_sizes.size());
    for (int n : sample_sizes) report.by_sample_size.push_back({n, 0.0, 0.0});

    auto draw_obs = [&](Rng& rng, const Vector9& gamma, StimulusType stim, int index) {
        BrtObservation o;
        o.driver_id = "study";
        o.stimulus = stim;
        o.t_stimulus = static_cast<double>(index);
        o.time_headway = rng.uniform(cfg.headway_min, cfg.headway_max);
        double y = design_basis(o.stimulus, o.time_headway).dot(cfg.true_beta + gamma) +
                   noise_sd * rng.normal();
        o.brt = std::exp(y);
        return o;
    };

    double same_err = 0.0, cross_err = 0.0;
    for (int r = 0; r < replications; ++r) {
        Rng rng(derive_seed(cfg.seed, 5000 + static_cast<std::uint64_t>(r)));
        Vector9 z;
        for (int k = 0; k < kNumCoeffs; ++k) z[k] = rng.normal();
        Vector9 gamma = root * z;

        Vector9 x = design_basis(target, cfg.t_star);
        double mu_true = x.dot(cfg.true_beta + gamma);
        double sd_true = noise_sd;
        double q10_true = std::exp(mu_true + norm_ppf(0.10) * sd_true);
        double q90_true = std::exp(mu_true + norm_ppf(0.90) * sd_true);

        // Nested observation sets: size n uses the first n draws.
        std::vector<BrtObservation> mixed, same, other;
        for (int k = 0; k < max_n; ++k) {
            mixed.push_back(draw_obs(rng, gamma, static_cast<StimulusType>(k % 3), k));
            same.push_back(draw_obs(rng, gamma, target, k));
            other.push_back(draw_obs(rng, gamma, cross, k));
        }

        auto percentile_errors = [&](std::span<const BrtObservation> obs) {
            DriverEstimate est = estimate_from_history("study", obs, truth);
            PbrtDistribution dist = pbrt_distribution(est, truth, target, cfg.t_star);
            return std::pair<double, double>{std::abs(dist.quantile(0.10) - q10_true),
                                             std::abs(dist.quantile(0.90) - q90_true)};
        };

        for (std::size_t c = 0; c < sample_sizes.size(); ++c) {
            int n = sample_sizes[c];
            auto [e10, e90] =
                percentile_errors(std::span<const BrtObservation>(mixed.data(), n));
            report.by_sample_size[c].mean_abs_p10_error += e10;
            report.by_sample_size[c].mean_abs_p90_error += e90;
        }
        if (max_n > 0) {
            auto [s10, s90] = percentile_errors(same);
            auto [c10, c90] = percentile_errors(other);
            same_err += 0.5 * (s10 + s90);
            cross_err += 0.5 * (c10 + c90);
        }
    }

    for (auto& cell : report.by_sample_size) {
        cell.mean_abs_p10_error /= replications;
        cell.mean_abs_p90_error /= replications;
    }
    report.same_stimulus_error = same_err / replications;
    report.cross_stimulus_error = cross_err / replications;
    return report;
}

}  // namespace brt
