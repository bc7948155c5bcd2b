#include "brt/driver_store.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "brt/errors.hpp"
#include "brt/util.hpp"

namespace brt {

namespace {
constexpr const char* kIndexName = "drivers.txt";
constexpr const char* kObservationHeader = "driver_id,stimulus,t_stimulus,time_headway,brt";
}  // namespace

DriverStore::DriverStore(std::filesystem::path directory) : dir_(std::move(directory)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec || !std::filesystem::is_directory(dir_)) {
        throw IoError("cannot create driver store directory: " + dir_.string());
    }
}

bool DriverStore::valid_driver_id(const std::string& driver_id) {
    if (driver_id.empty() || driver_id.size() > 128) return false;
    for (char c : driver_id) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                  c == '_' || c == '-' || c == '.';
        if (!ok) return false;
    }
    return driver_id != "." && driver_id != "..";
}

std::filesystem::path DriverStore::driver_log(const std::string& driver_id) const {
    if (!valid_driver_id(driver_id)) {
        throw ValidationError("driver id not usable in a store (allowed: [A-Za-z0-9_.-]): '" +
                              driver_id + "'");
    }
    return dir_ / ("driver_" + driver_id + ".log");
}

void DriverStore::add_to_index(const std::string& driver_id) {
    std::set<std::string> ids;
    auto index = dir_ / kIndexName;
    if (std::filesystem::exists(index)) {
        std::ifstream in(index);
        std::string line;
        while (std::getline(in, line)) {
            auto t = trim(line);
            if (!t.empty()) ids.insert(std::string(t));
        }
    }
    if (!ids.insert(driver_id).second) return;

    // Rewrite through a temp file so readers never see a partial index.
    auto tmp = dir_ / (std::string(kIndexName) + ".tmp");
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw IoError("cannot write driver index: " + tmp.string());
        for (const auto& id : ids) out << id << '\n';
    }
    std::filesystem::rename(tmp, index);
}

void DriverStore::append(const BrtObservation& obs) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto log = driver_log(obs.driver_id);
    bool fresh = !std::filesystem::exists(log);
    std::ofstream out(log, std::ios::app);
    if (!out) throw IoError("cannot append to driver log: " + log.string());
    if (fresh) out << kObservationHeader << '\n';
    out << obs.driver_id << ',' << stimulus_name(obs.stimulus) << ','
        << format_double(obs.t_stimulus) << ',' << format_double(obs.time_headway) << ','
        << format_double(obs.brt) << '\n';
    out.flush();
    if (!out) throw IoError("write failed on driver log: " + log.string());
    if (fresh) add_to_index(obs.driver_id);
}

std::vector<BrtObservation> DriverStore::history(const std::string& driver_id) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto log = driver_log(driver_id);
    if (!std::filesystem::exists(log)) return {};
    auto obs = load_observations(log);
    for (const auto& o : obs) {
        if (o.driver_id != driver_id) {
            throw ValidationError("driver log " + log.string() +
                                  " contains foreign driver id '" + o.driver_id + "'");
        }
    }
    return obs;
}

std::vector<std::string> DriverStore::driver_ids() const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto index = dir_ / kIndexName;
    std::vector<std::string> ids;
    if (!std::filesystem::exists(index)) return ids;
    std::ifstream in(index);
    std::string line;
    while (std::getline(in, line)) {
        auto t = trim(line);
        if (!t.empty()) ids.push_back(std::string(t));
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

}  // namespace brt
