#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "brt/trajectory.hpp"

namespace brt {

// Trajectory files: comma-delimited text, `#` comments, optional `#dt:`
// directive, one header line declaring per-column units. See
// docs/file-formats.md for the exact grammar. Loaded tracks are grouped by
// vehicle_id, sorted by time, converted to SI, and validated.
std::vector<VehicleTrack> load_tracks(const std::filesystem::path& file);
std::vector<VehicleTrack> load_tracks(std::istream& in, const std::string& source_name);

// Writes SI units at full precision; rows ordered by (vehicle_id, t).
// All tracks in one file must share the same sampling period.
void save_tracks(const std::filesystem::path& file, std::span<const VehicleTrack> tracks);
void save_tracks(std::ostream& out, std::span<const VehicleTrack> tracks);

std::vector<SignalPhaseEvent> load_signals(const std::filesystem::path& file);
std::vector<SignalPhaseEvent> load_signals(std::istream& in, const std::string& source_name);
void save_signals(const std::filesystem::path& file, std::span<const SignalPhaseEvent> events);
void save_signals(std::ostream& out, std::span<const SignalPhaseEvent> events);

// Turn-annotation files: header `vehicle_id`, one id per row.
std::vector<std::string> load_turns(const std::filesystem::path& file);
std::vector<std::string> load_turns(std::istream& in, const std::string& source_name);

// Sets turns_at_intersection on every track whose vehicle_id is listed.
void apply_turns(std::vector<VehicleTrack>& tracks, std::span<const std::string> vehicle_ids);

}  // namespace brt
