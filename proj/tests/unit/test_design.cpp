#include <doctest.h>

#include <cmath>

#include "brt/design.hpp"
#include "brt/errors.hpp"

using namespace brt;

TEST_CASE("signal basis occupies the third block") {
    Vector9 x = design_basis(StimulusType::signal_green_to_yellow, 2.0);
    Vector9 expect;
    expect << 0, 0, 0, 0, 0, 0, 1, 2, 4;
    CHECK((x - expect).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("basis has exactly three nonzeros in the stimulus block") {
    for (int s = 0; s < kNumStimuli; ++s) {
        Vector9 x = design_basis(static_cast<StimulusType>(s), 1.7);
        int nonzeros = 0;
        for (int k = 0; k < kNumCoeffs; ++k) {
            if (x[k] != 0.0) {
                ++nonzeros;
                CHECK(k / 3 == s);
            }
        }
        CHECK(nonzeros == 3);
        CHECK(x[3 * s] == 1.0);
        CHECK(x[3 * s + 1] == 1.7);
        CHECK(x[3 * s + 2] == doctest::Approx(1.7 * 1.7));
    }
}

TEST_CASE("unit response time maps to zero log") {
    BrtObservation o{"d1", StimulusType::steady_state_lead_brake, 0.0, 2.0, 1.0};
    auto train = build_design(std::vector<BrtObservation>{o});
    REQUIRE(train.drivers.size() == 1);
    CHECK(train.drivers[0].y[0] == 0.0);
}

TEST_CASE("mixed batch reproduces the block pattern row for row") {
    std::vector<BrtObservation> obs{
        {"d1", StimulusType::signal_green_to_yellow, 0, 1.5, 0.9},
        {"d1", StimulusType::steady_state_lead_brake, 1, 2.5, 1.1},
        {"d2", StimulusType::non_steady_lead_brake, 2, 3.0, 1.4},
        {"d1", StimulusType::steady_state_lead_brake, 3, 1.0, 0.8},
    };
    auto train = build_design(obs);
    REQUIRE(train.drivers.size() == 2);
    CHECK(train.drivers[0].driver_id == "d1");
    CHECK(train.drivers[1].driver_id == "d2");

    // Independent second path: assemble each expected row from scratch by
    // the block rule (1, t, t^2) at offset 3s, ordered by (stimulus, input).
    struct Row {
        int stimulus;
        double t, brt;
    };
    std::vector<Row> d1_rows{{0, 2.5, 1.1}, {0, 1.0, 0.8}, {2, 1.5, 0.9}};
    const auto& d1 = train.drivers[0];
    REQUIRE(d1.n() == 3);
    CHECK(d1.n_per_stimulus[0] == 2);
    CHECK(d1.n_per_stimulus[1] == 0);
    CHECK(d1.n_per_stimulus[2] == 1);
    for (int r = 0; r < 3; ++r) {
        Eigen::RowVectorXd expect = Eigen::RowVectorXd::Zero(9);
        expect[3 * d1_rows[r].stimulus] = 1.0;
        expect[3 * d1_rows[r].stimulus + 1] = d1_rows[r].t;
        expect[3 * d1_rows[r].stimulus + 2] = d1_rows[r].t * d1_rows[r].t;
        CHECK((d1.X.row(r) - expect).cwiseAbs().maxCoeff() == 0.0);
        CHECK(d1.y[r] == doctest::Approx(std::log(d1_rows[r].brt)));
    }

    CHECK(train.total_observations() == 4);
    CHECK(d1.X.cols() == 9);
}

TEST_CASE("non-positive inputs are rejected") {
    BrtObservation bad_brt{"d1", StimulusType::steady_state_lead_brake, 0.0, 2.0, 0.0};
    CHECK_THROWS_AS(build_design(std::vector<BrtObservation>{bad_brt}), ValidationError);
    BrtObservation bad_headway{"d1", StimulusType::steady_state_lead_brake, 0.0, -1.0, 1.0};
    CHECK_THROWS_AS(build_design(std::vector<BrtObservation>{bad_headway}), ValidationError);
}
