#include <doctest.h>

#include <algorithm>
#include <map>
#include <sstream>

#include "brt/errors.hpp"
#include "brt/trajectory.hpp"
#include "brt/trajectory_io.hpp"

using namespace brt;

namespace {

VehicleTrack linear_track(const std::string& id, double t0, int n, double dt, double p0,
                          double v, double a = 0.0) {
    VehicleTrack track;
    track.vehicle_id = id;
    track.driver_id = "d_" + id;
    track.lane_id = "lane";
    track.dt = dt;
    for (int k = 0; k < n; ++k) {
        double t = t0 + k * dt;
        double tau = t - t0;
        track.samples.push_back({t, p0 + v * tau + 0.5 * a * tau * tau, v + a * tau, a});
    }
    return track;
}

}  // namespace

TEST_CASE("three-row single-vehicle file loads as one track") {
    std::istringstream in(
        "vehicle_id,driver_id,lane_id,t,position,speed,acceleration\n"
        "V1,D1,L1,0.0,0.0,20.0,0.0\n"
        "V1,D1,L1,0.1,2.0,20.0,0.0\n"
        "V1,D1,L1,0.2,4.0,20.0,0.0\n");
    auto tracks = load_tracks(in, "mem");
    REQUIRE(tracks.size() == 1);
    CHECK(tracks[0].vehicle_id == "V1");
    CHECK(tracks[0].driver_id == "D1");
    REQUIRE(tracks[0].samples.size() == 3);
    CHECK(tracks[0].samples[1].position == 2.0);
}

TEST_CASE("header unit tags convert to SI") {
    std::istringstream in(
        "vehicle_id,driver_id,lane_id,t:s,position:ft,speed:ft/s,acceleration:ft/s2\n"
        "V1,D1,L1,0.0,100.0,10.0,1.0\n"
        "V1,D1,L1,0.1,101.0,10.0,1.0\n");
    auto tracks = load_tracks(in, "mem");
    REQUIRE(tracks.size() == 1);
    CHECK(tracks[0].samples[0].position == doctest::Approx(30.48));
    CHECK(tracks[0].samples[0].speed == doctest::Approx(3.048));
    CHECK(tracks[0].samples[0].acceleration == doctest::Approx(0.3048));
}

TEST_CASE("mph speeds convert to SI") {
    std::istringstream in(
        "vehicle_id,driver_id,lane_id,t,position,speed:mph,acceleration\n"
        "V1,D1,L1,0.0,0.0,20.0,0.0\n");
    auto tracks = load_tracks(in, "mem");
    CHECK(tracks[0].samples[0].speed == doctest::Approx(8.9408));
}

TEST_CASE("interleaved vehicles group and sort like a reference oracle") {
    std::istringstream in(
        "vehicle_id,driver_id,lane_id,t,position,speed,acceleration\n"
        "B,DB,L1,0.2,12.0,10.0,0\n"
        "A,DA,L1,0.1,1.0,10.0,0\n"
        "B,DB,L1,0.0,10.0,10.0,0\n"
        "A,DA,L1,0.0,0.0,10.0,0\n"
        "A,DA,L1,0.2,2.0,10.0,0\n"
        "B,DB,L1,0.1,11.0,10.0,0\n");
    auto tracks = load_tracks(in, "mem");

    // Independent grouping oracle: map of id -> sorted (t, position) pairs.
    std::map<std::string, std::vector<std::pair<double, double>>> oracle;
    oracle["A"] = {{0.0, 0.0}, {0.1, 1.0}, {0.2, 2.0}};
    oracle["B"] = {{0.0, 10.0}, {0.1, 11.0}, {0.2, 12.0}};

    REQUIRE(tracks.size() == 2);
    for (const auto& track : tracks) {
        const auto& expect = oracle.at(track.vehicle_id);
        REQUIRE(track.samples.size() == expect.size());
        for (std::size_t k = 0; k < expect.size(); ++k) {
            CHECK(track.samples[k].t == expect[k].first);
            CHECK(track.samples[k].position == expect[k].second);
        }
    }
}

TEST_CASE("malformed row reports the line number") {
    std::istringstream in(
        "vehicle_id,driver_id,lane_id,t,position,speed,acceleration\n"
        "V1,D1,L1,0.0,0.0,20.0,0.0\n"
        "V1,D1,L1,0.1,bogus,20.0,0.0\n");
    try {
        load_tracks(in, "mem");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
        CHECK(std::string(e.what()).find("position") != std::string::npos);
    }
}

TEST_CASE("non-monotone timestamps name the vehicle") {
    std::istringstream in(
        "vehicle_id,driver_id,lane_id,t,position,speed,acceleration\n"
        "V7,D1,L1,0.1,0.0,20.0,0.0\n"
        "V7,D1,L1,0.1,1.0,20.0,0.0\n");
    try {
        load_tracks(in, "mem");
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("V7") != std::string::npos);
    }
}

TEST_CASE("pair geometry at matching speeds") {
    auto leader = linear_track("L", 0.0, 50, 0.1, 30.0, 15.0);
    auto follower = linear_track("F", 0.0, 50, 0.1, 0.0, 15.0);
    auto g = pair_geometry(leader, follower, 1.0);
    CHECK(g.separation == doctest::Approx(30.0));
    CHECK(g.speed_diff == doctest::Approx(0.0));
    REQUIRE(g.time_headway.has_value());
    CHECK(*g.time_headway == doctest::Approx(2.0));
}

TEST_CASE("zero follower speed leaves headway absent") {
    auto leader = linear_track("L", 0.0, 10, 0.1, 30.0, 15.0);
    auto follower = linear_track("F", 0.0, 10, 0.1, 0.0, 0.0);
    auto g = pair_geometry(leader, follower, 0.5);
    CHECK_FALSE(g.time_headway.has_value());
}

TEST_CASE("interpolation matches the closed form between samples") {
    auto track = linear_track("V", 0.0, 20, 0.1, 5.0, 12.0, 0.4);
    double t = 1.03;
    auto s = track.at(t);
    // Position is piecewise linear between samples; interpolate by hand.
    auto lo = track.samples[10], hi = track.samples[11];
    double w = (t - lo.t) / (hi.t - lo.t);
    CHECK(s.position == doctest::Approx(lo.position + w * (hi.position - lo.position)).epsilon(1e-12));
    CHECK(s.speed == doctest::Approx(lo.speed + w * (hi.speed - lo.speed)).epsilon(1e-12));

    CHECK_THROWS_AS(track.at(-0.5), std::out_of_range);
    CHECK_THROWS_AS(track.at(99.0), std::out_of_range);
}

TEST_CASE("pair geometry is invariant under time shift") {
    auto leader = linear_track("L", 0.0, 60, 0.1, 28.0, 14.0, -0.5);
    auto follower = linear_track("F", 0.0, 60, 0.1, 0.0, 15.0, 0.1);
    const double shift = 17.3;
    auto leader_s = leader;
    auto follower_s = follower;
    for (auto& s : leader_s.samples) s.t += shift;
    for (auto& s : follower_s.samples) s.t += shift;

    for (double t : {0.5, 1.7, 3.14, 5.0}) {
        auto a = pair_geometry(leader, follower, t);
        auto b = pair_geometry(leader_s, follower_s, t + shift);
        CHECK(a.separation == doctest::Approx(b.separation).epsilon(1e-12));
        CHECK(a.speed_diff == doctest::Approx(b.speed_diff).epsilon(1e-12));
        CHECK(*a.time_headway == doctest::Approx(*b.time_headway).epsilon(1e-12));
    }
}

TEST_CASE("save and reload reproduces numeric content exactly") {
    auto t1 = linear_track("V1", 0.0, 25, 0.1, 3.25, 17.77, -0.123);
    auto t2 = linear_track("V2", 0.0, 25, 0.1, 40.0, 16.0, 0.05);
    std::vector<VehicleTrack> tracks{t1, t2};
    std::ostringstream out;
    save_tracks(out, tracks);
    std::istringstream in(out.str());
    auto back = load_tracks(in, "mem");
    REQUIRE(back.size() == 2);
    for (std::size_t v = 0; v < 2; ++v) {
        REQUIRE(back[v].samples.size() == tracks[v].samples.size());
        for (std::size_t k = 0; k < back[v].samples.size(); ++k) {
            CHECK(back[v].samples[k].t == tracks[v].samples[k].t);
            CHECK(back[v].samples[k].position == tracks[v].samples[k].position);
            CHECK(back[v].samples[k].speed == tracks[v].samples[k].speed);
            CHECK(back[v].samples[k].acceleration == tracks[v].samples[k].acceleration);
        }
    }
}

TEST_CASE("signal files parse phases and reject degenerate transitions") {
    std::istringstream in(
        "signal_id,lane_id,position,t_change,from_phase,to_phase\n"
        "S1,L1,500.0,12.0,green,yellow\n");
    auto events = load_signals(in, "mem");
    REQUIRE(events.size() == 1);
    CHECK(events[0].from_phase == SignalPhase::green);
    CHECK(events[0].to_phase == SignalPhase::yellow);

    std::istringstream bad(
        "signal_id,lane_id,position,t_change,from_phase,to_phase\n"
        "S1,L1,500.0,12.0,green,green\n");
    CHECK_THROWS_AS(load_signals(bad, "mem"), ValidationError);
}

TEST_CASE("turn annotations apply to matching vehicles") {
    std::istringstream in("vehicle_id\nV2\n");
    auto ids = load_turns(in, "mem");
    std::vector<VehicleTrack> tracks{linear_track("V1", 0, 5, 0.1, 0, 10),
                                     linear_track("V2", 0, 5, 0.1, 0, 10)};
    apply_turns(tracks, ids);
    CHECK_FALSE(tracks[0].turns_at_intersection);
    CHECK(tracks[1].turns_at_intersection);
}
