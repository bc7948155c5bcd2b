#pragma once

#include <optional>
#include <string>
#include <vector>

namespace brt {

// One timestamped kinematic state along the lane centerline. All values SI.
struct TrajectorySample {
    double t = 0.0;             // seconds
    double position = 0.0;      // meters along lane
    double speed = 0.0;         // m/s, >= 0
    double acceleration = 0.0;  // m/s^2, negative = deceleration
};

struct VehicleTrack {
    std::string vehicle_id;
    std::string driver_id;
    std::string lane_id;
    std::vector<TrajectorySample> samples;  // strictly increasing in t, constant step
    double dt = 0.1;                        // sampling period, seconds
    bool turns_at_intersection = false;     // per-vehicle turn annotation

    double start_time() const { return samples.front().t; }
    double end_time() const { return samples.back().t; }
    bool covers(double t) const;

    // Linearly interpolated state at t; throws std::out_of_range outside the span.
    TrajectorySample at(double t) const;
};

// Throws ValidationError unless samples are non-empty, strictly increasing
// in t, evenly spaced at track.dt, and speeds are non-negative.
void validate_track(const VehicleTrack& track);

enum class SignalPhase { green, yellow, red };

const char* signal_phase_name(SignalPhase p);
std::optional<SignalPhase> parse_signal_phase(std::string_view token);

struct SignalPhaseEvent {
    std::string signal_id;
    std::string lane_id;
    double position = 0.0;  // meters along lane
    double t_change = 0.0;  // seconds
    SignalPhase from_phase = SignalPhase::green;
    SignalPhase to_phase = SignalPhase::yellow;  // must differ from from_phase
};

// Leader/follower geometry at a common timestamp.
struct PairGeometry {
    double separation = 0.0;  // leader position - follower position, meters
    double speed_diff = 0.0;  // follower speed - leader speed, m/s
    std::optional<double> time_headway;  // separation / follower speed; absent at speed 0
};

// Both tracks must cover t; throws std::out_of_range otherwise.
PairGeometry pair_geometry(const VehicleTrack& leader, const VehicleTrack& follower,
                           double t);

// Unit conversion constants.
inline constexpr double kMetersPerFoot = 0.3048;
inline constexpr double kMetersPerSecondPerMph = 0.44704;

}  // namespace brt
