#include "brt/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "brt/errors.hpp"
#include "brt/util.hpp"

namespace brt {

bool VehicleTrack::covers(double t) const {
    if (samples.empty()) return false;
    return t >= samples.front().t - 1e-12 && t <= samples.back().t + 1e-12;
}

TrajectorySample VehicleTrack::at(double t) const {
    if (!covers(t)) {
        throw std::out_of_range("vehicle " + vehicle_id + ": time " + format_double(t) +
                                " outside track span [" + format_double(start_time()) +
                                ", " + format_double(end_time()) + "]");
    }
    auto it = std::lower_bound(samples.begin(), samples.end(), t,
                               [](const TrajectorySample& s, double v) { return s.t < v; });
    if (it == samples.end()) return samples.back();
    if (it == samples.begin() || it->t == t) return *it;
    const TrajectorySample& hi = *it;
    const TrajectorySample& lo = *(it - 1);
    double w = (t - lo.t) / (hi.t - lo.t);
    TrajectorySample out;
    out.t = t;
    out.position = lo.position + w * (hi.position - lo.position);
    out.speed = lo.speed + w * (hi.speed - lo.speed);
    out.acceleration = lo.acceleration + w * (hi.acceleration - lo.acceleration);
    return out;
}

void validate_track(const VehicleTrack& track) {
    if (track.samples.empty()) {
        throw ValidationError("vehicle " + track.vehicle_id + ": track has no samples");
    }
    if (!(track.dt > 0.0)) {
        throw ValidationError("vehicle " + track.vehicle_id + ": sampling period must be > 0");
    }
    const double step_tol = 1e-6;
    for (std::size_t i = 0; i < track.samples.size(); ++i) {
        const auto& s = track.samples[i];
        if (s.speed < 0.0) {
            throw ValidationError("vehicle " + track.vehicle_id + ": negative speed at t=" +
                                  format_double(s.t));
        }
        if (i == 0) continue;
        double step = s.t - track.samples[i - 1].t;
        if (step <= 0.0) {
            throw ValidationError("vehicle " + track.vehicle_id +
                                  ": non-monotone timestamps at t=" + format_double(s.t));
        }
        if (std::abs(step - track.dt) > step_tol) {
            throw ValidationError("vehicle " + track.vehicle_id +
                                  ": sampling period is not constant (expected " +
                                  format_double(track.dt) + ", found " + format_double(step) +
                                  " at t=" + format_double(s.t) + ")");
        }
    }
}

const char* signal_phase_name(SignalPhase p) {
    switch (p) {
        case SignalPhase::green: return "green";
        case SignalPhase::yellow: return "yellow";
        case SignalPhase::red: return "red";
    }
    return "?";
}

std::optional<SignalPhase> parse_signal_phase(std::string_view token) {
    if (token == "green") return SignalPhase::green;
    if (token == "yellow") return SignalPhase::yellow;
    if (token == "red") return SignalPhase::red;
    return std::nullopt;
}

PairGeometry pair_geometry(const VehicleTrack& leader, const VehicleTrack& follower,
                           double t) {
    TrajectorySample l = leader.at(t);
    TrajectorySample f = follower.at(t);
    PairGeometry g;
    g.separation = l.position - f.position;
    g.speed_diff = f.speed - l.speed;
    if (f.speed > 0.0) {
        g.time_headway = g.separation / f.speed;
    }
    return g;
}

}  // namespace brt
