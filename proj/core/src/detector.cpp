#include "brt/detector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace brt {

namespace {

constexpr double kTimeEps = 1e-9;

// Follower sample times inside the joint span of both tracks.
struct PairGrid {
    const VehicleTrack* leader;
    const VehicleTrack* follower;
    std::size_t begin = 0;  // follower sample index range [begin, end)
    std::size_t end = 0;

    double time(std::size_t i) const { return follower->samples[i].t; }
    double follower_speed(std::size_t i) const { return follower->samples[i].speed; }
    double follower_accel(std::size_t i) const { return follower->samples[i].acceleration; }
    double separation(std::size_t i) const {
        return leader->at(time(i)).position - follower->samples[i].position;
    }
    double speed_diff(std::size_t i) const {
        return follower->samples[i].speed - leader->at(time(i)).speed;
    }
};

std::optional<PairGrid> make_grid(const VehicleTrack& leader, const VehicleTrack& follower) {
    double t0 = std::max(leader.start_time(), follower.start_time());
    double t1 = std::min(leader.end_time(), follower.end_time());
    if (t1 - t0 <= 0.0) return std::nullopt;
    PairGrid g{&leader, &follower};
    const auto& s = follower.samples;
    g.begin = static_cast<std::size_t>(
        std::lower_bound(s.begin(), s.end(), t0 - kTimeEps,
                         [](const TrajectorySample& a, double v) { return a.t < v; }) -
        s.begin());
    g.end = static_cast<std::size_t>(
        std::upper_bound(s.begin(), s.end(), t1 + kTimeEps,
                         [](double v, const TrajectorySample& a) { return v < a.t; }) -
        s.begin());
    if (g.end <= g.begin) return std::nullopt;
    return g;
}

// OLS slope of separation on time over [grid.time(i), grid.time(i)+window].
// Returns nullopt when fewer than two samples fit in the window.
std::optional<double> separation_slope(const PairGrid& g, std::size_t i, double window) {
    double t0 = g.time(i);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (std::size_t k = i; k < g.end; ++k) {
        double dt = g.time(k) - t0;
        if (dt > window + kTimeEps) break;
        double y = g.separation(k);
        sx += dt;
        sy += y;
        sxx += dt * dt;
        sxy += dt * y;
        ++n;
    }
    if (n < 2) return std::nullopt;
    double denom = n * sxx - sx * sx;
    if (denom <= 0.0) return std::nullopt;
    return (n * sxy - sx * sy) / denom;
}

std::optional<BrtObservation> make_observation(const PairGrid& g, StimulusType stimulus,
                                               std::size_t stim_idx, double t_response,
                                               const DetectorConfig& cfg) {
    double v = g.follower_speed(stim_idx);
    if (v < cfg.min_speed || v <= 0.0) return std::nullopt;
    double sep = g.separation(stim_idx);
    if (sep <= 0.0) return std::nullopt;
    BrtObservation o;
    o.driver_id = g.follower->driver_id;
    o.stimulus = stimulus;
    o.t_stimulus = g.time(stim_idx);
    o.time_headway = sep / v;
    o.brt = t_response - o.t_stimulus;
    if (!(o.brt > 0.0) || !(o.time_headway > 0.0)) return std::nullopt;
    return o;
}

}  // namespace

std::vector<BrtObservation> detect_steady_state(const VehicleTrack& leader,
                                                const VehicleTrack& follower,
                                                const DetectorConfig& cfg) {
    std::vector<BrtObservation> out;
    auto grid_opt = make_grid(leader, follower);
    if (!grid_opt) return out;
    const PairGrid& g = *grid_opt;

    auto steady = [&](std::size_t i) {
        double sep = g.separation(i);
        return sep > 0.0 && sep <= cfg.steady_max_separation &&
               std::abs(g.speed_diff(i)) <= cfg.steady_speed_band &&
               std::abs(g.follower_accel(i)) <= cfg.accel_threshold;
    };

    std::size_t i = g.begin;
    while (i < g.end) {
        if (!steady(i)) {
            ++i;
            continue;
        }
        // Extend the steady run.
        std::size_t run_start = i;
        std::size_t run_end = i;  // last steady index
        while (run_end + 1 < g.end && steady(run_end + 1)) ++run_end;

        if (g.time(run_end) - g.time(run_start) + kTimeEps < cfg.steady_duration) {
            i = run_end + 1;
            continue;
        }

        // Time A: first sustained separation decrease after the pair has been
        // steady for steady_duration, while the follower is not yet reacting.
        double t_earliest = g.time(run_start) + cfg.steady_duration;
        double t_latest = g.time(run_end) + std::max(cfg.sustain_window, 2.0 * g.follower->dt);
        std::optional<std::size_t> a_idx;
        for (std::size_t k = run_start; k < g.end && g.time(k) <= t_latest + kTimeEps; ++k) {
            if (g.time(k) + kTimeEps < t_earliest) continue;
            if (std::abs(g.follower_accel(k)) > cfg.accel_threshold) continue;
            auto slope = separation_slope(g, k, cfg.sustain_window);
            if (!slope) break;
            if (*slope < cfg.separation_slope_min) {
                a_idx = k;
                break;
            }
        }
        if (!a_idx) {
            i = run_end + 1;
            continue;
        }

        // Time B: first follower deceleration beyond the threshold after A.
        double t_limit = g.time(*a_idx) + cfg.response_search_limit;
        std::optional<std::size_t> b_idx;
        for (std::size_t k = *a_idx + 1; k < g.end && g.time(k) <= t_limit + kTimeEps; ++k) {
            if (g.follower_accel(k) < -cfg.accel_threshold) {
                b_idx = k;
                break;
            }
        }
        if (b_idx) {
            if (auto obs = make_observation(g, StimulusType::steady_state_lead_brake, *a_idx,
                                            g.time(*b_idx), cfg)) {
                out.push_back(std::move(*obs));
            }
            i = *b_idx + 1;  // a new steady run is required before the next episode
        } else {
            i = run_end + 1;
        }
    }
    return out;
}

std::vector<BrtObservation> detect_nonsteady(const VehicleTrack& leader,
                                             const VehicleTrack& follower,
                                             const DetectorConfig& cfg) {
    std::vector<BrtObservation> out;
    auto grid_opt = make_grid(leader, follower);
    if (!grid_opt) return out;
    const PairGrid& g = *grid_opt;

    // Mean follower acceleration over [t - baseline_window, t), own samples.
    auto baseline = [&](std::size_t i) -> std::optional<double> {
        double t0 = g.time(i) - cfg.baseline_window;
        double sum = 0.0;
        int n = 0;
        for (std::size_t k = i; k-- > 0;) {
            const auto& s = g.follower->samples[k];
            if (s.t + kTimeEps < t0) break;
            sum += s.acceleration;
            ++n;
        }
        if (n < 2) return std::nullopt;
        return sum / n;
    };

    double resume_time = -std::numeric_limits<double>::infinity();
    for (std::size_t i = g.begin; i < g.end; ++i) {
        if (g.time(i) < resume_time) continue;
        double lead_a = g.leader->at(g.time(i)).acceleration;
        if (lead_a > -cfg.accel_threshold) continue;  // leader not braking
        if (g.speed_diff(i) <= 0.0) continue;         // follower not faster
        double v = g.follower_speed(i);
        double sep = g.separation(i);
        if (v <= 0.0 || sep <= 0.0) continue;
        double headway = sep / v;
        if (headway >= cfg.headway_cutoff) continue;

        auto base = baseline(i);
        if (!base) continue;

        double t_limit = g.time(i) + cfg.response_search_limit;
        std::optional<std::size_t> r_idx;
        for (std::size_t k = i + 1; k < g.end && g.time(k) <= t_limit + kTimeEps; ++k) {
            if (g.follower_accel(k) < *base - cfg.response_cutoff) {
                r_idx = k;
                break;
            }
        }
        double episode_end = r_idx ? g.time(*r_idx) : t_limit;
        if (r_idx) {
            if (auto obs = make_observation(g, StimulusType::non_steady_lead_brake, i,
                                            g.time(*r_idx), cfg)) {
                out.push_back(std::move(*obs));
            }
        }
        resume_time = episode_end + cfg.requalify_gap;
    }
    return out;
}

std::vector<BrtObservation> detect_signal(const VehicleTrack& track,
                                          std::span<const VehicleTrack> all_tracks,
                                          std::span<const SignalPhaseEvent> signals,
                                          const DetectorConfig& cfg) {
    std::vector<BrtObservation> out;

    std::vector<const SignalPhaseEvent*> events;
    for (const auto& e : signals) {
        if (e.lane_id == track.lane_id && e.from_phase == SignalPhase::green &&
            e.to_phase == SignalPhase::yellow) {
            events.push_back(&e);
        }
    }
    std::sort(events.begin(), events.end(),
              [](const SignalPhaseEvent* a, const SignalPhaseEvent* b) {
                  return a->t_change < b->t_change;
              });

    double last_episode_end = -std::numeric_limits<double>::infinity();
    for (const SignalPhaseEvent* e : events) {
        if (!track.covers(e->t_change)) continue;
        TrajectorySample st = track.at(e->t_change);
        if (st.position >= e->position) continue;  // signal not in front

        // Only the next signal in front of the driver counts: skip if another
        // known signal on the lane sits strictly between driver and this one.
        bool intervening_signal = false;
        for (const auto& other : signals) {
            if (other.lane_id != track.lane_id || other.signal_id == e->signal_id) continue;
            if (other.position > st.position && other.position < e->position) {
                intervening_signal = true;
                break;
            }
        }
        if (intervening_signal) continue;

        if (st.speed < cfg.min_speed || st.speed <= 0.0) continue;
        double headway = (e->position - st.position) / st.speed;
        if (headway > cfg.headway_cutoff) continue;

        if (e->t_change < last_episode_end + cfg.requalify_gap) continue;

        // Driver's own deceleration onset.
        double t_limit = e->t_change + cfg.response_search_limit;
        std::optional<double> t_resp;
        for (const auto& s : track.samples) {
            if (s.t <= e->t_change + kTimeEps) continue;
            if (s.t > t_limit + kTimeEps) break;
            if (s.acceleration < -cfg.accel_threshold) {
                t_resp = s.t;
                break;
            }
        }
        last_episode_end = t_resp ? *t_resp : t_limit;
        if (!t_resp) continue;

        // Intervening leading car before the light that decelerates first.
        bool suppressed = false;
        for (const auto& other : all_tracks) {
            if (&other == &track || other.vehicle_id == track.vehicle_id) continue;
            if (other.lane_id != track.lane_id || !other.covers(e->t_change)) continue;
            double p = other.at(e->t_change).position;
            if (p <= st.position || p >= e->position) continue;
            for (const auto& s : other.samples) {
                if (s.t <= e->t_change + kTimeEps) continue;
                if (s.t > *t_resp + kTimeEps) break;
                if (s.acceleration < -cfg.accel_threshold) {
                    suppressed = true;
                    break;
                }
            }
            if (suppressed) break;
        }
        if (suppressed) continue;

        // Retroactive discard when the driver turns at the intersection.
        if (track.turns_at_intersection) continue;

        BrtObservation o;
        o.driver_id = track.driver_id;
        o.stimulus = StimulusType::signal_green_to_yellow;
        o.t_stimulus = e->t_change;
        o.time_headway = headway;
        o.brt = *t_resp - e->t_change;
        if (o.brt > 0.0) out.push_back(std::move(o));
    }
    return out;
}

double calibrate_cutoff(std::span<const LabeledEpisode> labeled,
                        std::span<const double> candidates, const DetectorConfig& cfg,
                        std::optional<double> miss_penalty) {
    if (candidates.empty()) {
        throw std::invalid_argument("calibrate_cutoff: candidate list is empty");
    }
    if (labeled.empty()) {
        throw std::invalid_argument("calibrate_cutoff: need at least one labeled episode");
    }

    std::vector<double> sorted(candidates.begin(), candidates.end());
    std::sort(sorted.begin(), sorted.end());

    double best_c = sorted.front();
    double best_loss = std::numeric_limits<double>::infinity();
    for (double c : sorted) {
        DetectorConfig trial = cfg;
        trial.response_cutoff = c;
        double loss = 0.0;
        for (const auto& ep : labeled) {
            auto obs = detect_nonsteady(ep.leader, ep.follower, trial);
            if (obs.empty()) {
                if (miss_penalty) {
                    loss += *miss_penalty;
                } else {
                    double span = std::min(ep.leader.end_time(), ep.follower.end_time()) -
                                  std::max(ep.leader.start_time(), ep.follower.start_time());
                    loss += span * span;
                }
            } else {
                double err = obs.front().brt - ep.manual_response_time;
                loss += err * err;
            }
        }
        if (loss < best_loss) {
            best_loss = loss;
            best_c = c;
        }
    }
    return best_c;
}

std::vector<BrtObservation> detect_all(std::span<const VehicleTrack> tracks,
                                       std::span<const SignalPhaseEvent> signals,
                                       const DetectorConfig& cfg) {
    std::vector<BrtObservation> out;

    // Nearest-ahead, non-crossing same-lane pairs.
    for (const auto& follower : tracks) {
        for (const auto& leader : tracks) {
            if (&leader == &follower || leader.lane_id != follower.lane_id) continue;
            double t0 = std::max(leader.start_time(), follower.start_time());
            double t1 = std::min(leader.end_time(), follower.end_time());
            if (t1 - t0 < 2.0 * follower.dt) continue;
            double gap0 = leader.at(t0).position - follower.at(t0).position;
            double gap1 = leader.at(t1).position - follower.at(t1).position;
            if (gap0 <= 0.0 || gap1 <= 0.0) continue;  // not ahead throughout

            bool has_between = false;
            for (const auto& other : tracks) {
                if (&other == &leader || &other == &follower) continue;
                if (other.lane_id != follower.lane_id || !other.covers(t0)) continue;
                double p = other.at(t0).position;
                if (p > follower.at(t0).position && p < leader.at(t0).position) {
                    has_between = true;
                    break;
                }
            }
            if (has_between) continue;

            auto steady = detect_steady_state(leader, follower, cfg);
            out.insert(out.end(), steady.begin(), steady.end());
            auto nonsteady = detect_nonsteady(leader, follower, cfg);
            out.insert(out.end(), nonsteady.begin(), nonsteady.end());
        }
    }

    for (const auto& track : tracks) {
        auto sig = detect_signal(track, tracks, signals, cfg);
        out.insert(out.end(), sig.begin(), sig.end());
    }

    std::sort(out.begin(), out.end(), [](const BrtObservation& a, const BrtObservation& b) {
        if (a.driver_id != b.driver_id) return a.driver_id < b.driver_id;
        if (a.t_stimulus != b.t_stimulus) return a.t_stimulus < b.t_stimulus;
        return static_cast<int>(a.stimulus) < static_cast<int>(b.stimulus);
    });
    return out;
}

}  // namespace brt
