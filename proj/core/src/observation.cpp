#include "brt/observation.hpp"

#include <fstream>
#include <ostream>

#include "brt/errors.hpp"
#include "brt/util.hpp"

namespace brt {

const char* stimulus_name(StimulusType s) {
    switch (s) {
        case StimulusType::steady_state_lead_brake: return "steady";
        case StimulusType::non_steady_lead_brake: return "nonsteady";
        case StimulusType::signal_green_to_yellow: return "signal";
    }
    return "?";
}

std::optional<StimulusType> parse_stimulus(std::string_view token) {
    if (token == "steady") return StimulusType::steady_state_lead_brake;
    if (token == "nonsteady") return StimulusType::non_steady_lead_brake;
    if (token == "signal") return StimulusType::signal_green_to_yellow;
    return std::nullopt;
}

namespace {

bool next_line(std::istream& in, std::size_t& line_no, std::string& out) {
    std::string raw;
    while (std::getline(in, raw)) {
        ++line_no;
        auto s = trim(raw);
        if (s.empty() || s.front() == '#') continue;
        out = std::string(s);
        return true;
    }
    return false;
}

}  // namespace

std::vector<BrtObservation> load_observations(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open observation file: " + file.string());
    return load_observations(in, file.string());
}

std::vector<BrtObservation> load_observations(std::istream& in, const std::string& src) {
    std::size_t line_no = 0;
    std::string line;
    if (!next_line(in, line_no, line)) {
        throw ParseError(src, line_no, "missing header line");
    }
    if (line != "driver_id,stimulus,t_stimulus,time_headway,brt") {
        throw ParseError(src, line_no, "unexpected observation header");
    }
    std::vector<BrtObservation> obs;
    while (next_line(in, line_no, line)) {
        auto fields = split(line, ',');
        if (fields.size() != 5) {
            throw ParseError(src, line_no,
                             "expected 5 fields, found " + std::to_string(fields.size()));
        }
        BrtObservation o;
        o.driver_id = std::string(trim(fields[0]));
        if (o.driver_id.empty()) throw ParseError(src, line_no, "empty driver_id");
        auto stim = parse_stimulus(trim(fields[1]));
        if (!stim) {
            throw ParseError(src, line_no,
                             "unknown stimulus '" + std::string(trim(fields[1])) + "'");
        }
        o.stimulus = *stim;
        if (!parse_double(fields[2], o.t_stimulus) || !parse_double(fields[3], o.time_headway) ||
            !parse_double(fields[4], o.brt)) {
            throw ParseError(src, line_no, "malformed numeric field");
        }
        if (!(o.brt > 0.0)) {
            throw ValidationError("driver " + o.driver_id + ": brt must be > 0 (" + src + ":" +
                                  std::to_string(line_no) + ")");
        }
        if (!(o.time_headway > 0.0)) {
            throw ValidationError("driver " + o.driver_id + ": time_headway must be > 0 (" + src +
                                  ":" + std::to_string(line_no) + ")");
        }
        obs.push_back(std::move(o));
    }
    return obs;
}

void save_observations(const std::filesystem::path& file, std::span<const BrtObservation> obs) {
    std::ofstream out(file);
    if (!out) throw IoError("cannot write observation file: " + file.string());
    save_observations(out, obs);
}

void save_observations(std::ostream& out, std::span<const BrtObservation> obs) {
    out << "driver_id,stimulus,t_stimulus,time_headway,brt\n";
    for (const auto& o : obs) {
        out << o.driver_id << ',' << stimulus_name(o.stimulus) << ','
            << format_double(o.t_stimulus) << ',' << format_double(o.time_headway) << ','
            << format_double(o.brt) << '\n';
    }
}

}  // namespace brt
