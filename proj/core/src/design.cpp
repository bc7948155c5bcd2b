#include "brt/design.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "brt/errors.hpp"
#include "brt/util.hpp"

namespace brt {

Vector9 design_basis(StimulusType stimulus, double time_headway) {
    Vector9 x = Vector9::Zero();
    int block = 3 * static_cast<int>(stimulus);
    x[block] = 1.0;
    x[block + 1] = time_headway;
    x[block + 2] = time_headway * time_headway;
    return x;
}

int TrainingSet::total_observations() const {
    int n = 0;
    for (const auto& d : drivers) n += d.n();
    return n;
}

TrainingSet build_design(std::span<const BrtObservation> observations) {
    // Group by driver, preserving input order within (driver, stimulus).
    std::map<std::string, std::array<std::vector<const BrtObservation*>, kNumStimuli>> grouped;
    for (const auto& o : observations) {
        if (!(o.brt > 0.0)) {
            throw ValidationError("driver " + o.driver_id + ": brt must be > 0, got " +
                                  format_double(o.brt));
        }
        if (!(o.time_headway > 0.0)) {
            throw ValidationError("driver " + o.driver_id + ": time_headway must be > 0, got " +
                                  format_double(o.time_headway));
        }
        grouped[o.driver_id][static_cast<int>(o.stimulus)].push_back(&o);
    }

    TrainingSet train;
    train.drivers.reserve(grouped.size());
    for (auto& [driver_id, by_stimulus] : grouped) {
        DriverData d;
        d.driver_id = driver_id;
        int n = 0;
        for (const auto& v : by_stimulus) n += static_cast<int>(v.size());
        d.X.resize(n, kNumCoeffs);
        d.y.resize(n);
        int row = 0;
        for (int s = 0; s < kNumStimuli; ++s) {
            d.n_per_stimulus[s] = static_cast<int>(by_stimulus[s].size());
            for (const BrtObservation* o : by_stimulus[s]) {
                d.X.row(row) = design_basis(o->stimulus, o->time_headway).transpose();
                d.y[row] = std::log(o->brt);
                ++row;
            }
        }
        train.drivers.push_back(std::move(d));
    }
    return train;
}

}  // namespace brt
