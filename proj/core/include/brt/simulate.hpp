#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "brt/detector.hpp"
#include "brt/mixed_model.hpp"
#include "brt/trajectory.hpp"

namespace brt {

// Kinematic scenario shape used when realizing planted events.
struct KinematicsConfig {
    double dt = 0.1;              // s
    double cruise_speed = 20.0;   // m/s
    double closing_speed = 3.0;   // m/s, follower excess in non-steady scenes
    double leader_decel = -2.0;   // m/s^2
    double follower_decel = -2.0; // m/s^2
    double lead_in = 8.0;         // s of quiet approach before the stimulus
    double margin = 3.0;          // s of track beyond the response
};

struct SimConfig {
    std::uint64_t seed = 1;
    int n_drivers = 200;
    std::array<int, kNumStimuli> obs_per_stimulus{10, 10, 10};
    Vector9 true_beta = default_true_beta();
    double true_sigma2 = 0.04;
    Matrix9 true_sigma_gamma = default_true_sigma_gamma();
    double headway_min = 0.5;  // s
    double headway_max = 6.0;  // s
    double t_star = 1.5;       // s
    KinematicsConfig kin;

    // Frozen defaults calibrated once so population mean BRT rises from
    // about 0.7 s to about 2.5 s over headways 0.5-6 s.
    static Vector9 default_true_beta();
    static Matrix9 default_true_sigma_gamma();
};

struct SimulatedObservations {
    std::vector<BrtObservation> observations;
    std::vector<std::string> driver_ids;  // parallel to gamma
    std::vector<Vector9> gamma;           // true per-driver offsets
};

// Draws gamma_d ~ N(0, Sigma_gamma), headways uniform on the configured
// range, y = x'(beta + gamma_d) + N(0, sigma2); brt = exp(y).
SimulatedObservations simulate_observations(const SimConfig& cfg);

// One event to realize kinematically.
struct PlantedEvent {
    StimulusType stimulus = StimulusType::steady_state_lead_brake;
    double brt = 1.0;           // seconds, > 0
    double time_headway = 3.0;  // headway at the stimulus, seconds

    // Signal-scene variants for the suppression rules.
    bool with_intervening_car = false;
    bool turns_at_intersection = false;
};

struct RealizedEvent {
    PlantedEvent planted;
    std::string lane_id;
    std::string follower_vehicle;  // the responding vehicle
    double t_stimulus = 0.0;       // ground-truth stimulus time
    bool expect_detection = true;  // false for suppression variants
};

struct KinematicScene {
    std::vector<VehicleTrack> tracks;
    std::vector<SignalPhaseEvent> signals;
    std::vector<RealizedEvent> events;
};

// Realizes each planted event on its own lane: steady or closing lead-in,
// leader braking or signal change, follower response delayed by exactly the
// planted brt. Stimulus times carry sub-sample jitter so detections are not
// grid-aligned by construction. Throws ValidationError on infeasible plants.
KinematicScene simulate_kinematics(const SimConfig& cfg, std::span<const PlantedEvent> planted);

// Pairs cruising with sub-threshold acceleration wiggle and matched speeds;
// no detector should emit anything on these.
KinematicScene simulate_stimulus_free(const SimConfig& cfg, int n_pairs);

struct DetectorCounts {
    int planted = 0;
    int hits = 0;            // detected within tolerance of the planted brt
    int misses = 0;
    int false_positives = 0;  // detections beyond or outside the planted one
    int suppressed_ok = 0;    // suppression variants correctly silent
};

// Runs the matching detector per realized event and scores recovery of the
// planted brt within the given tolerance.
DetectorCounts evaluate_planted(const KinematicScene& scene, const DetectorConfig& det,
                                double tolerance);

struct ConvergenceCell {
    int sample_size = 0;
    double mean_abs_p10_error = 0.0;  // seconds
    double mean_abs_p90_error = 0.0;  // seconds
};

struct SimReport {
    std::vector<ConvergenceCell> by_sample_size;
    double same_stimulus_error = 0.0;   // at comparison_size, all target-stimulus
    double cross_stimulus_error = 0.0;  // at comparison_size, all other-stimulus
    int comparison_size = 0;
    int replications = 0;
    DetectorCounts detector;
};

// Estimation-convergence study: for each sample size, the mean absolute
// error of the estimated 10th/90th PBRT percentiles against the driver's
// true distribution, over independent replications (observation sets are
// nested across sizes within one replication). Population parameters are
// taken as known (cov_beta = 0), isolating estimator convergence.
SimReport convergence_study(const SimConfig& cfg, std::span<const int> sample_sizes,
                            int replications,
                            StimulusType target = StimulusType::steady_state_lead_brake);

}  // namespace brt
