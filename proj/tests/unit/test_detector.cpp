#include <doctest.h>

#include <cmath>
#include <limits>

#include "brt/detector.hpp"
#include "brt/simulate.hpp"

using namespace brt;

namespace {

// Piecewise-constant-acceleration pair builder for hand-made episodes.
struct PhaseSpec {
    double until;  // absolute end time of the phase
    double accel;
};

VehicleTrack phased_track(const std::string& id, const std::string& lane, double p0, double v0,
                          std::vector<PhaseSpec> phases, double duration, double dt = 0.1) {
    VehicleTrack track;
    track.vehicle_id = id;
    track.driver_id = "drv_" + id;
    track.lane_id = lane;
    track.dt = dt;
    double t = 0.0, p = p0, v = v0;
    std::size_t phase = 0;
    int n = static_cast<int>(std::round(duration / dt));
    for (int k = 0; k <= n; ++k) {
        while (phase < phases.size() && t >= phases[phase].until - 1e-9) ++phase;
        double a = phase < phases.size() ? phases[phase].accel : 0.0;
        track.samples.push_back({t, p, std::max(v, 0.0), v > 0.0 ? a : 0.0});
        p += v * dt + 0.5 * a * dt * dt;
        v = std::max(v + a * dt, 0.0);
        t = (k + 1) * dt;
    }
    return track;
}

}  // namespace

TEST_CASE("steady-state episode recovers a planted 1.2 s response") {
    // 10 s steady at 20 m/s, leader brakes at t=10, follower at t=11.2.
    auto leader = phased_track("L", "l0", 35.0, 20.0,
                               {{10.0, 0.0}, {16.0, -2.0}}, 16.0);
    auto follower = phased_track("F", "l0", 0.0, 20.0,
                                 {{11.2, 0.0}, {16.0, -2.0}}, 16.0);
    DetectorConfig cfg;
    auto obs = detect_steady_state(leader, follower, cfg);
    REQUIRE(obs.size() == 1);
    CHECK(obs[0].stimulus == StimulusType::steady_state_lead_brake);
    CHECK(obs[0].brt == doctest::Approx(1.2).epsilon(0.2));  // +- 2 samples
    CHECK(std::abs(obs[0].brt - 1.2) <= 2.0 * 0.1 + 1e-9);
    CHECK(obs[0].time_headway == doctest::Approx(35.0 / 20.0).epsilon(0.05));
}

TEST_CASE("constant equal speeds never emit") {
    auto leader = phased_track("L", "l0", 35.0, 20.0, {}, 60.0);
    auto follower = phased_track("F", "l0", 0.0, 20.0, {}, 60.0);
    CHECK(detect_steady_state(leader, follower, DetectorConfig{}).empty());
    CHECK(detect_nonsteady(leader, follower, DetectorConfig{}).empty());
}

TEST_CASE("steady state shorter than four seconds is rejected") {
    // Pair converges to steady separation only 3 s before the leader brakes.
    auto leader = phased_track("L", "l0", 90.0, 20.0, {{10.0, 0.0}, {16.0, -2.0}}, 16.0);
    auto follower = phased_track("F", "l0", 0.0, 24.0, {{7.0, 0.0}, {16.0, 0.0}}, 16.0);
    // Follower closes from 90 m (beyond 76.2) and only enters the separation
    // bound late; speeds equalize at t=7 when it stops accelerating.
    DetectorConfig cfg;
    auto all = detect_steady_state(leader, follower, cfg);
    // The speed band alone fails until t=7 (diff 4 m/s), so steady cannot
    // accumulate 4 s before the stimulus at t=10.
    CHECK(all.empty());
}

TEST_CASE("non-steady planted 1.0 s response at cutoff 0.3") {
    // Follower closing at +3 m/s, headway 4 s at the stimulus.
    double v_f = 23.0, t_stim = 20.0;
    double sep0 = 4.0 * v_f + 3.0 * t_stim;
    auto leader = phased_track("L", "l0", sep0, 20.0, {{t_stim, 0.0}, {26.0, -2.0}}, 26.0);
    auto follower = phased_track("F", "l0", 0.0, v_f, {{21.0, 0.0}, {26.0, -0.8}}, 26.0);
    DetectorConfig cfg;
    cfg.response_cutoff = 0.3;
    auto obs = detect_nonsteady(leader, follower, cfg);
    REQUIRE(obs.size() == 1);
    CHECK(obs[0].stimulus == StimulusType::non_steady_lead_brake);
    CHECK(std::abs(obs[0].brt - 1.0) <= 2.0 * 0.1 + 1e-9);
    CHECK(obs[0].time_headway == doctest::Approx(4.0).epsilon(0.02));
}

TEST_CASE("non-steady headway beyond ten seconds is suppressed") {
    double v_f = 23.0, t_stim = 20.0;
    double sep0 = 12.0 * v_f + 3.0 * t_stim;  // headway 12 s at the stimulus
    auto leader = phased_track("L", "l0", sep0, 20.0, {{t_stim, 0.0}, {30.0, -2.0}}, 30.0);
    auto follower = phased_track("F", "l0", 0.0, v_f, {{21.0, 0.0}, {30.0, -0.8}}, 30.0);
    CHECK(detect_nonsteady(leader, follower, DetectorConfig{}).empty());
}

TEST_CASE("follower slower than leader never yields a non-steady stimulus") {
    auto leader = phased_track("L", "l0", 60.0, 23.0, {{20.0, 0.0}, {30.0, -2.0}}, 30.0);
    auto follower = phased_track("F", "l0", 0.0, 20.0, {{30.0, 0.0}}, 30.0);
    CHECK(detect_nonsteady(leader, follower, DetectorConfig{}).empty());
}

TEST_CASE("detectors are invariant to uniform time translation") {
    SimConfig cfg;
    cfg.seed = 99;
    std::vector<PlantedEvent> planted{{StimulusType::steady_state_lead_brake, 1.1, 2.0},
                                      {StimulusType::non_steady_lead_brake, 0.8, 3.0}};
    auto scene = simulate_kinematics(cfg, planted);
    DetectorConfig det;

    auto shifted = scene;
    const double shift = 1234.5;
    for (auto& t : shifted.tracks) {
        for (auto& s : t.samples) s.t += shift;
    }
    for (auto& e : shifted.signals) e.t_change += shift;

    for (std::size_t ev = 0; ev < scene.events.size(); ++ev) {
        const auto& lane = scene.events[ev].lane_id;
        const VehicleTrack *l0 = nullptr, *f0 = nullptr, *l1 = nullptr, *f1 = nullptr;
        for (std::size_t i = 0; i < scene.tracks.size(); ++i) {
            if (scene.tracks[i].lane_id != lane) continue;
            if (scene.tracks[i].vehicle_id.back() == 'L') {
                l0 = &scene.tracks[i];
                l1 = &shifted.tracks[i];
            } else {
                f0 = &scene.tracks[i];
                f1 = &shifted.tracks[i];
            }
        }
        REQUIRE(l0 != nullptr);
        REQUIRE(f0 != nullptr);
        auto run = [&](const VehicleTrack& l, const VehicleTrack& f) {
            return scene.events[ev].planted.stimulus == StimulusType::steady_state_lead_brake
                       ? detect_steady_state(l, f, det)
                       : detect_nonsteady(l, f, det);
        };
        auto a = run(*l0, *f0);
        auto b = run(*l1, *f1);
        REQUIRE(a.size() == b.size());
        for (std::size_t k = 0; k < a.size(); ++k) {
            CHECK(a[k].brt == doctest::Approx(b[k].brt).epsilon(1e-9));
            CHECK(b[k].t_stimulus - a[k].t_stimulus == doctest::Approx(shift).epsilon(1e-9));
            CHECK(a[k].time_headway == doctest::Approx(b[k].time_headway).epsilon(1e-9));
        }
    }
}

TEST_CASE("signal response: lone car, headway 3 s, 0.9 s delay") {
    double v = 20.0, t_change = 8.0;
    auto car = phased_track("C", "l0", 0.0, v, {{t_change + 0.9, 0.0}, {16.0, -2.0}}, 16.0);
    SignalPhaseEvent sig{"S1", "l0", v * t_change + 3.0 * v, t_change, SignalPhase::green,
                         SignalPhase::yellow};
    std::vector<VehicleTrack> all{car};
    auto obs = detect_signal(car, all, std::vector<SignalPhaseEvent>{sig}, DetectorConfig{});
    REQUIRE(obs.size() == 1);
    CHECK(obs[0].stimulus == StimulusType::signal_green_to_yellow);
    CHECK(std::abs(obs[0].brt - 0.9) <= 2.0 * 0.1 + 1e-9);
    CHECK(obs[0].time_headway == doctest::Approx(3.0));
}

TEST_CASE("signal headway beyond ten seconds is skipped") {
    double v = 20.0, t_change = 8.0;
    auto car = phased_track("C", "l0", 0.0, v, {{t_change + 0.9, 0.0}, {16.0, -2.0}}, 16.0);
    SignalPhaseEvent sig{"S1", "l0", v * t_change + 11.0 * v, t_change, SignalPhase::green,
                         SignalPhase::yellow};
    std::vector<VehicleTrack> all{car};
    CHECK(detect_signal(car, all, std::vector<SignalPhaseEvent>{sig}, DetectorConfig{}).empty());
}

TEST_CASE("intervening car that decelerates first suppresses the signal episode") {
    double v = 20.0, t_change = 8.0;
    auto car = phased_track("C", "l0", 0.0, v, {{t_change + 1.2, 0.0}, {16.0, -2.0}}, 16.0);
    auto mid = phased_track("M", "l0", 30.0, v, {{t_change + 0.4, 0.0}, {16.0, -2.0}}, 16.0);
    SignalPhaseEvent sig{"S1", "l0", v * t_change + 3.0 * v, t_change, SignalPhase::green,
                         SignalPhase::yellow};
    std::vector<VehicleTrack> all{car, mid};
    CHECK(detect_signal(car, all, std::vector<SignalPhaseEvent>{sig}, DetectorConfig{}).empty());

    // The same scene without the intervening car emits.
    std::vector<VehicleTrack> alone{car};
    CHECK(detect_signal(car, alone, std::vector<SignalPhaseEvent>{sig}, DetectorConfig{}).size() ==
          1);
}

TEST_CASE("turn annotation retro-discards the signal observation") {
    double v = 20.0, t_change = 8.0;
    auto car = phased_track("C", "l0", 0.0, v, {{t_change + 0.9, 0.0}, {16.0, -2.0}}, 16.0);
    car.turns_at_intersection = true;
    SignalPhaseEvent sig{"S1", "l0", v * t_change + 3.0 * v, t_change, SignalPhase::green,
                         SignalPhase::yellow};
    std::vector<VehicleTrack> all{car};
    CHECK(detect_signal(car, all, std::vector<SignalPhaseEvent>{sig}, DetectorConfig{}).empty());
}

TEST_CASE("slow follower is filtered by the speed cutoff") {
    double v = 6.0, t_change = 8.0;  // below 20 mph
    auto car = phased_track("C", "l0", 0.0, v, {{t_change + 0.9, 0.0}, {16.0, -2.0}}, 16.0);
    SignalPhaseEvent sig{"S1", "l0", v * t_change + 3.0 * v, t_change, SignalPhase::green,
                         SignalPhase::yellow};
    std::vector<VehicleTrack> all{car};
    CHECK(detect_signal(car, all, std::vector<SignalPhaseEvent>{sig}, DetectorConfig{}).empty());
}

TEST_CASE("every emitted observation respects the speed and headway gates") {
    SimConfig cfg;
    cfg.seed = 31;
    std::vector<PlantedEvent> planted;
    for (int k = 0; k < 6; ++k) {
        planted.push_back({static_cast<StimulusType>(k % 3), 0.7 + 0.2 * k, 2.0 + 0.3 * k});
    }
    auto scene = simulate_kinematics(cfg, planted);
    DetectorConfig det;
    auto obs = detect_all(scene.tracks, scene.signals, det);
    CHECK(!obs.empty());
    for (const auto& o : obs) {
        CHECK(o.brt > 0.0);
        CHECK(o.time_headway > 0.0);
        if (o.stimulus != StimulusType::steady_state_lead_brake) {
            CHECK(o.time_headway <= det.headway_cutoff);
        }
    }
}

TEST_CASE("calibrate_cutoff selects the zero-loss candidate") {
    // Build one labeled episode where c=0.3 finds the response exactly and
    // c=0.9 misses it (the acceleration drop is 0.8 below baseline).
    double v_f = 23.0, t_stim = 20.0;
    double sep0 = 4.0 * v_f + 3.0 * t_stim;
    auto leader = phased_track("L", "l0", sep0, 20.0, {{t_stim, 0.0}, {26.0, -2.0}}, 26.0);
    auto follower = phased_track("F", "l0", 0.0, v_f, {{21.0, 0.0}, {26.0, -0.8}}, 26.0);

    DetectorConfig base;
    LabeledEpisode ep{leader, follower, 1.0};
    std::vector<LabeledEpisode> labeled{ep};
    std::vector<double> candidates{0.9, 0.3};
    CHECK(calibrate_cutoff(labeled, candidates, base) == 0.3);
}

TEST_CASE("calibrate_cutoff ties break to the smaller candidate") {
    double v_f = 23.0, t_stim = 20.0;
    double sep0 = 4.0 * v_f + 3.0 * t_stim;
    auto leader = phased_track("L", "l0", sep0, 20.0, {{t_stim, 0.0}, {26.0, -2.0}}, 26.0);
    auto follower = phased_track("F", "l0", 0.0, v_f, {{21.0, 0.0}, {26.0, -2.0}}, 26.0);
    LabeledEpisode ep{leader, follower, 1.0};
    std::vector<LabeledEpisode> labeled{ep};
    // Both cutoffs sit below the 2.0 drop, so both recover the same time.
    std::vector<double> candidates{0.5, 0.2};
    CHECK(calibrate_cutoff(labeled, candidates, DetectorConfig{}) == 0.2);
}

TEST_CASE("calibrate_cutoff matches a brute-force loss table") {
    DetectorConfig base;
    std::vector<LabeledEpisode> labeled;
    double drops[] = {-0.5, -1.0, -1.6};
    for (int e = 0; e < 3; ++e) {
        double v_f = 23.0, t_stim = 15.0 + e;
        double sep0 = (3.0 + e) * v_f + 3.0 * t_stim;
        double brt = 0.8 + 0.3 * e;
        auto leader =
            phased_track("L", "l0", sep0, 20.0, {{t_stim, 0.0}, {26.0, -2.0}}, 26.0);
        auto follower = phased_track("F", "l0", 0.0, v_f,
                                     {{t_stim + brt, 0.0}, {26.0, drops[e]}}, 26.0);
        labeled.push_back({leader, follower, brt});
    }
    std::vector<double> candidates{0.1, 0.3, 0.7, 1.2, 1.8};

    // Brute-force oracle over the same candidates.
    double best_loss = std::numeric_limits<double>::infinity();
    double best_c = candidates.front();
    for (double c : candidates) {
        DetectorConfig trial = base;
        trial.response_cutoff = c;
        double loss = 0.0;
        for (const auto& ep : labeled) {
            auto obs = detect_nonsteady(ep.leader, ep.follower, trial);
            if (obs.empty()) {
                double span = std::min(ep.leader.end_time(), ep.follower.end_time()) -
                              std::max(ep.leader.start_time(), ep.follower.start_time());
                loss += span * span;
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

    double chosen = calibrate_cutoff(labeled, candidates, base);
    CHECK(chosen == best_c);

    // The chosen loss is minimal across all candidates by construction of
    // the oracle; also confirm it is a member of the list.
    CHECK(std::find(candidates.begin(), candidates.end(), chosen) != candidates.end());
}

TEST_CASE("calibrate_cutoff argument validation") {
    std::vector<LabeledEpisode> labeled;
    std::vector<double> candidates{0.3};
    CHECK_THROWS_AS(calibrate_cutoff(labeled, candidates, DetectorConfig{}),
                    std::invalid_argument);
    auto leader = phased_track("L", "l0", 60.0, 20.0, {}, 10.0);
    auto follower = phased_track("F", "l0", 0.0, 20.0, {}, 10.0);
    labeled.push_back({leader, follower, 1.0});
    std::vector<double> empty;
    CHECK_THROWS_AS(calibrate_cutoff(labeled, empty, DetectorConfig{}), std::invalid_argument);
}
