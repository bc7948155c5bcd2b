#pragma once

#include <Eigen/Dense>
#include <array>
#include <span>
#include <string>
#include <vector>

#include "brt/observation.hpp"

namespace brt {

// 3 stimulus blocks x (1, t, t^2) = 9 coefficients.
inline constexpr int kNumCoeffs = 9;

using Vector9 = Eigen::Matrix<double, kNumCoeffs, 1>;
using Matrix9 = Eigen::Matrix<double, kNumCoeffs, kNumCoeffs>;

// Block-diagonal placement of (1, t, t^2) into the stimulus's 3-slot block.
Vector9 design_basis(StimulusType stimulus, double time_headway);

// One driver's stacked rows: y = ln(brt), X rows ordered by
// (stimulus, observation index).
struct DriverData {
    std::string driver_id;
    Eigen::MatrixXd X;  // n x 9
    Eigen::VectorXd y;  // n, log-seconds
    std::array<int, kNumStimuli> n_per_stimulus{};

    int n() const { return static_cast<int>(y.size()); }
};

struct TrainingSet {
    std::vector<DriverData> drivers;  // ordered by driver_id

    int total_observations() const;
};

// Throws ValidationError on brt <= 0 or time_headway <= 0.
TrainingSet build_design(std::span<const BrtObservation> observations);

}  // namespace brt
