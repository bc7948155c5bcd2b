#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace brt {

// The three braking-trigger settings. The enum order fixes the coefficient
// block layout of the mixed model design matrix.
enum class StimulusType {
    steady_state_lead_brake = 0,
    non_steady_lead_brake = 1,
    signal_green_to_yellow = 2,
};

inline constexpr int kNumStimuli = 3;

const char* stimulus_name(StimulusType s);  // "steady" | "nonsteady" | "signal"
std::optional<StimulusType> parse_stimulus(std::string_view token);

// One measured brake response: (stimulus, time headway, BRT) for a driver.
struct BrtObservation {
    std::string driver_id;
    StimulusType stimulus = StimulusType::steady_state_lead_brake;
    double t_stimulus = 0.0;    // absolute stimulus time, seconds
    double time_headway = 0.0;  // headway at the stimulus, seconds, > 0
    double brt = 0.0;           // response delay, seconds, > 0
};

// Observation files: header `driver_id,stimulus,t_stimulus,time_headway,brt`,
// comma-delimited rows, `#` comments. See docs/file-formats.md.
std::vector<BrtObservation> load_observations(const std::filesystem::path& file);
std::vector<BrtObservation> load_observations(std::istream& in, const std::string& source_name);
void save_observations(const std::filesystem::path& file, std::span<const BrtObservation> obs);
void save_observations(std::ostream& out, std::span<const BrtObservation> obs);

}  // namespace brt
