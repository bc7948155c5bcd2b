#pragma once

#include <optional>
#include <span>
#include <vector>

#include "brt/observation.hpp"
#include "brt/trajectory.hpp"

namespace brt {

// Detection thresholds. Defaults are the paper-derived values converted to
// SI: 250 ft separation, +-5 ft/s speed band, 0.5 ft/s^2 acceleration
// threshold, 20 mph minimum speed, 10 s headway cutoff.
struct DetectorConfig {
    double steady_max_separation = 76.2;  // m
    double steady_speed_band = 1.52;      // m/s
    double steady_duration = 4.0;         // s
    double accel_threshold = 0.1524;      // m/s^2
    double headway_cutoff = 10.0;         // s
    double min_speed = 8.9408;            // m/s
    double sustain_window = 0.25;         // s, separation-regression window
    double response_cutoff = 0.3;         // m/s^2, non-steady response drop (calibrated)

    // Artifact-level knobs (documented in README, not paper thresholds).
    double separation_slope_min = -0.05;  // m/s, OLS slope below which distance "decreases"
    double baseline_window = 1.0;         // s, pre-stimulus acceleration mean window
    double response_search_limit = 10.0;  // s, cap on stimulus-to-response search
    double requalify_gap = 5.0;           // s, gap before a new stimulus counts
};

// Steady state, leader brakes. One observation per qualifying episode:
// steady for >= steady_duration, separation starts a sustained decrease
// (time A), follower deceleration exceeds the threshold (time B), brt = B-A.
std::vector<BrtObservation> detect_steady_state(const VehicleTrack& leader,
                                                const VehicleTrack& follower,
                                                const DetectorConfig& cfg);

// Not in steady state, follower faster than leader, leader brakes. The
// response is the first instant the follower's acceleration drops more than
// response_cutoff below its pre-stimulus baseline mean.
std::vector<BrtObservation> detect_nonsteady(const VehicleTrack& leader,
                                             const VehicleTrack& follower,
                                             const DetectorConfig& cfg);

// Traffic signal changes green -> yellow ahead of the driver. Skips events
// with headway above the cutoff, events where an intervening car before the
// light decelerates first, and drivers flagged as turning at the intersection.
std::vector<BrtObservation> detect_signal(const VehicleTrack& track,
                                          std::span<const VehicleTrack> all_tracks,
                                          std::span<const SignalPhaseEvent> signals,
                                          const DetectorConfig& cfg);

// A manually labeled non-steady episode for response-cutoff calibration.
struct LabeledEpisode {
    VehicleTrack leader;
    VehicleTrack follower;
    double manual_response_time = 0.0;  // seconds
};

// Grid search over candidate cutoffs c, minimizing the summed squared error
// between algorithmic and manual response times. Episodes the algorithm
// misses under a candidate contribute miss_penalty (default: squared episode
// overlap duration). Ties resolve to the smaller c.
double calibrate_cutoff(std::span<const LabeledEpisode> labeled,
                        std::span<const double> candidates, const DetectorConfig& cfg,
                        std::optional<double> miss_penalty = std::nullopt);

// Runs all three detectors over a scene. Lead-brake detectors run on
// nearest-ahead, non-crossing same-lane pairs; the signal detector runs on
// every track. Output sorted by (driver_id, t_stimulus, stimulus).
std::vector<BrtObservation> detect_all(std::span<const VehicleTrack> tracks,
                                       std::span<const SignalPhaseEvent> signals,
                                       const DetectorConfig& cfg);

}  // namespace brt
