#include "brt/trajectory_io.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "brt/errors.hpp"
#include "brt/util.hpp"

namespace brt {

namespace {

double unit_factor_position(std::string_view u, const std::string& src, std::size_t line) {
    if (u == "m") return 1.0;
    if (u == "ft") return kMetersPerFoot;
    throw ParseError(src, line, "unknown position unit '" + std::string(u) + "'");
}

double unit_factor_speed(std::string_view u, const std::string& src, std::size_t line) {
    if (u == "m/s") return 1.0;
    if (u == "ft/s") return kMetersPerFoot;
    if (u == "mph") return kMetersPerSecondPerMph;
    throw ParseError(src, line, "unknown speed unit '" + std::string(u) + "'");
}

double unit_factor_accel(std::string_view u, const std::string& src, std::size_t line) {
    if (u == "m/s2") return 1.0;
    if (u == "ft/s2") return kMetersPerFoot;
    throw ParseError(src, line, "unknown acceleration unit '" + std::string(u) + "'");
}

double unit_factor_time(std::string_view u, const std::string& src, std::size_t line) {
    if (u == "s") return 1.0;
    throw ParseError(src, line, "unknown time unit '" + std::string(u) + "'");
}

// "name" or "name:unit"; checks the name and returns the unit (or fallback).
std::string_view header_unit(std::string_view column, std::string_view expected_name,
                             std::string_view default_unit, const std::string& src,
                             std::size_t line) {
    column = trim(column);
    auto colon = column.find(':');
    std::string_view name = colon == std::string_view::npos ? column : column.substr(0, colon);
    if (trim(name) != expected_name) {
        throw ParseError(src, line,
                         "expected column '" + std::string(expected_name) + "', found '" +
                             std::string(name) + "'");
    }
    if (colon == std::string_view::npos) return default_unit;
    return trim(column.substr(colon + 1));
}

double parse_numeric_field(std::string_view token, const char* what, const std::string& src,
                           std::size_t line) {
    double v = 0.0;
    if (!parse_double(token, v)) {
        throw ParseError(src, line, std::string("malformed ") + what + " value '" +
                                        std::string(trim(token)) + "'");
    }
    return v;
}

struct Line {
    std::string text;
    std::size_t number = 0;
};

// Reads the next content line, handling blank lines, comments and the #dt:
// directive (directive_dt updated in place when seen).
bool next_content_line(std::istream& in, std::size_t& line_no, Line& out, double* directive_dt,
                       const std::string& src) {
    std::string raw;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view s = trim(raw);
        if (s.empty()) continue;
        if (s.front() == '#') {
            if (directive_dt != nullptr && s.rfind("#dt:", 0) == 0) {
                double v = 0.0;
                if (!parse_double(s.substr(4), v) || !(v > 0.0)) {
                    throw ParseError(src, line_no, "malformed #dt: directive");
                }
                *directive_dt = v;
            }
            continue;
        }
        out.text = std::string(s);
        out.number = line_no;
        return true;
    }
    return false;
}

std::string id_field(std::string_view token, const char* what, const std::string& src,
                     std::size_t line) {
    auto t = trim(token);
    if (t.empty()) {
        throw ParseError(src, line, std::string("empty ") + what);
    }
    return std::string(t);
}

}  // namespace

std::vector<VehicleTrack> load_tracks(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open trajectory file: " + file.string());
    return load_tracks(in, file.string());
}

std::vector<VehicleTrack> load_tracks(std::istream& in, const std::string& src) {
    std::size_t line_no = 0;
    double dt = 0.1;
    Line line;

    if (!next_content_line(in, line_no, line, &dt, src)) {
        throw ParseError(src, line_no, "missing header line");
    }
    auto cols = split(line.text, ',');
    if (cols.size() != 7) {
        throw ParseError(src, line.number, "trajectory header must have 7 columns");
    }
    header_unit(cols[0], "vehicle_id", "", src, line.number);
    header_unit(cols[1], "driver_id", "", src, line.number);
    header_unit(cols[2], "lane_id", "", src, line.number);
    double f_t = unit_factor_time(header_unit(cols[3], "t", "s", src, line.number), src, line.number);
    double f_pos = unit_factor_position(header_unit(cols[4], "position", "m", src, line.number),
                                        src, line.number);
    double f_spd = unit_factor_speed(header_unit(cols[5], "speed", "m/s", src, line.number), src,
                                     line.number);
    double f_acc = unit_factor_accel(
        header_unit(cols[6], "acceleration", "m/s2", src, line.number), src, line.number);

    std::map<std::string, VehicleTrack> by_vehicle;
    while (next_content_line(in, line_no, line, &dt, src)) {
        auto fields = split(line.text, ',');
        if (fields.size() != 7) {
            throw ParseError(src, line.number, "expected 7 fields, found " +
                                                   std::to_string(fields.size()));
        }
        std::string vid = id_field(fields[0], "vehicle_id", src, line.number);
        std::string did = id_field(fields[1], "driver_id", src, line.number);
        std::string lid = id_field(fields[2], "lane_id", src, line.number);

        TrajectorySample s;
        s.t = f_t * parse_numeric_field(fields[3], "t", src, line.number);
        s.position = f_pos * parse_numeric_field(fields[4], "position", src, line.number);
        s.speed = f_spd * parse_numeric_field(fields[5], "speed", src, line.number);
        s.acceleration = f_acc * parse_numeric_field(fields[6], "acceleration", src, line.number);

        auto [it, inserted] = by_vehicle.try_emplace(vid);
        VehicleTrack& track = it->second;
        if (inserted) {
            track.vehicle_id = vid;
            track.driver_id = did;
            track.lane_id = lid;
        } else if (track.driver_id != did || track.lane_id != lid) {
            throw ValidationError("vehicle " + vid +
                                  ": inconsistent driver_id or lane_id across rows");
        }
        track.samples.push_back(s);
    }

    std::vector<VehicleTrack> tracks;
    tracks.reserve(by_vehicle.size());
    for (auto& [vid, track] : by_vehicle) {
        std::stable_sort(track.samples.begin(), track.samples.end(),
                         [](const TrajectorySample& a, const TrajectorySample& b) {
                             return a.t < b.t;
                         });
        track.dt = dt;
        validate_track(track);
        tracks.push_back(std::move(track));
    }
    if (tracks.empty()) throw ParseError(src, line_no, "trajectory file has no data rows");
    return tracks;
}

void save_tracks(const std::filesystem::path& file, std::span<const VehicleTrack> tracks) {
    std::ofstream out(file);
    if (!out) throw IoError("cannot write trajectory file: " + file.string());
    save_tracks(out, tracks);
}

void save_tracks(std::ostream& out, std::span<const VehicleTrack> tracks) {
    if (tracks.empty()) throw ValidationError("save_tracks: no tracks");
    double dt = tracks.front().dt;
    for (const auto& t : tracks) {
        if (t.dt != dt) {
            throw ValidationError("save_tracks: tracks with mixed sampling periods");
        }
    }
    out << "#dt: " << format_double(dt) << "\n";
    out << "vehicle_id,driver_id,lane_id,t:s,position:m,speed:m/s,acceleration:m/s2\n";

    std::vector<const VehicleTrack*> ordered;
    ordered.reserve(tracks.size());
    for (const auto& t : tracks) ordered.push_back(&t);
    std::sort(ordered.begin(), ordered.end(), [](const VehicleTrack* a, const VehicleTrack* b) {
        return a->vehicle_id < b->vehicle_id;
    });

    for (const VehicleTrack* t : ordered) {
        for (const auto& s : t->samples) {
            out << t->vehicle_id << ',' << t->driver_id << ',' << t->lane_id << ','
                << format_double(s.t) << ',' << format_double(s.position) << ','
                << format_double(s.speed) << ',' << format_double(s.acceleration) << '\n';
        }
    }
}

std::vector<SignalPhaseEvent> load_signals(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open signal file: " + file.string());
    return load_signals(in, file.string());
}

std::vector<SignalPhaseEvent> load_signals(std::istream& in, const std::string& src) {
    std::size_t line_no = 0;
    Line line;
    if (!next_content_line(in, line_no, line, nullptr, src)) {
        throw ParseError(src, line_no, "missing header line");
    }
    auto cols = split(line.text, ',');
    if (cols.size() != 6) {
        throw ParseError(src, line.number, "signal header must have 6 columns");
    }
    header_unit(cols[0], "signal_id", "", src, line.number);
    header_unit(cols[1], "lane_id", "", src, line.number);
    double f_pos = unit_factor_position(header_unit(cols[2], "position", "m", src, line.number),
                                        src, line.number);
    double f_t = unit_factor_time(header_unit(cols[3], "t_change", "s", src, line.number), src,
                                  line.number);
    header_unit(cols[4], "from_phase", "", src, line.number);
    header_unit(cols[5], "to_phase", "", src, line.number);

    std::vector<SignalPhaseEvent> events;
    while (next_content_line(in, line_no, line, nullptr, src)) {
        auto fields = split(line.text, ',');
        if (fields.size() != 6) {
            throw ParseError(src, line.number, "expected 6 fields, found " +
                                                   std::to_string(fields.size()));
        }
        SignalPhaseEvent e;
        e.signal_id = id_field(fields[0], "signal_id", src, line.number);
        e.lane_id = id_field(fields[1], "lane_id", src, line.number);
        e.position = f_pos * parse_numeric_field(fields[2], "position", src, line.number);
        e.t_change = f_t * parse_numeric_field(fields[3], "t_change", src, line.number);
        auto from = parse_signal_phase(trim(fields[4]));
        auto to = parse_signal_phase(trim(fields[5]));
        if (!from || !to) {
            throw ParseError(src, line.number, "unknown signal phase");
        }
        e.from_phase = *from;
        e.to_phase = *to;
        if (e.from_phase == e.to_phase) {
            throw ValidationError("signal " + e.signal_id + ": from_phase equals to_phase at t=" +
                                  format_double(e.t_change));
        }
        events.push_back(std::move(e));
    }
    std::sort(events.begin(), events.end(),
              [](const SignalPhaseEvent& a, const SignalPhaseEvent& b) {
                  return a.t_change < b.t_change;
              });
    return events;
}

void save_signals(const std::filesystem::path& file, std::span<const SignalPhaseEvent> events) {
    std::ofstream out(file);
    if (!out) throw IoError("cannot write signal file: " + file.string());
    save_signals(out, events);
}

void save_signals(std::ostream& out, std::span<const SignalPhaseEvent> events) {
    out << "signal_id,lane_id,position:m,t_change:s,from_phase,to_phase\n";
    for (const auto& e : events) {
        out << e.signal_id << ',' << e.lane_id << ',' << format_double(e.position) << ','
            << format_double(e.t_change) << ',' << signal_phase_name(e.from_phase) << ','
            << signal_phase_name(e.to_phase) << '\n';
    }
}

std::vector<std::string> load_turns(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open turn-annotation file: " + file.string());
    return load_turns(in, file.string());
}

std::vector<std::string> load_turns(std::istream& in, const std::string& src) {
    std::size_t line_no = 0;
    Line line;
    if (!next_content_line(in, line_no, line, nullptr, src)) {
        throw ParseError(src, line_no, "missing header line");
    }
    if (trim(line.text) != "vehicle_id") {
        throw ParseError(src, line.number, "turn-annotation header must be 'vehicle_id'");
    }
    std::vector<std::string> ids;
    while (next_content_line(in, line_no, line, nullptr, src)) {
        ids.push_back(id_field(line.text, "vehicle_id", src, line.number));
    }
    return ids;
}

void apply_turns(std::vector<VehicleTrack>& tracks, std::span<const std::string> vehicle_ids) {
    for (auto& t : tracks) {
        for (const auto& id : vehicle_ids) {
            if (t.vehicle_id == id) {
                t.turns_at_intersection = true;
                break;
            }
        }
    }
}

}  // namespace brt
