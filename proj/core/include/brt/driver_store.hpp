#pragma once

#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

#include "brt/observation.hpp"

namespace brt {

// Persistent per-driver observation history: one append-only log per driver
// (observation row format) plus an index of known drivers. Estimates are
// always recomputed from raw observations on load, so the store holds no
// derived state. Appends for distinct drivers may run concurrently; the
// store serializes writers per driver.
class DriverStore {
public:
    explicit DriverStore(std::filesystem::path directory);

    void append(const BrtObservation& obs);

    // Observation history for one driver, in append order. Empty when the
    // driver is unknown.
    std::vector<BrtObservation> history(const std::string& driver_id) const;

    std::vector<std::string> driver_ids() const;  // sorted

    const std::filesystem::path& directory() const { return dir_; }

    // Driver ids are restricted to filename-safe characters.
    static bool valid_driver_id(const std::string& driver_id);

private:
    std::filesystem::path driver_log(const std::string& driver_id) const;
    void add_to_index(const std::string& driver_id);

    std::filesystem::path dir_;
    mutable std::mutex mutex_;
};

}  // namespace brt
