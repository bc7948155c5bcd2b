#include <doctest.h>

#include "brt/util.hpp"

using namespace brt;

TEST_CASE("format_double round-trips exactly") {
    for (double v : {0.0, 1.0, -2.5, 0.1, 3.2989128862624126, 1e-300, 1.7e308, -0.44}) {
        double back = 0.0;
        REQUIRE(parse_double(format_double(v), back));
        CHECK(back == v);
    }
}

TEST_CASE("parse_double rejects junk") {
    double v = 0.0;
    CHECK_FALSE(parse_double("", v));
    CHECK_FALSE(parse_double("1.2.3", v));
    CHECK_FALSE(parse_double("12a", v));
    CHECK_FALSE(parse_double("nanx", v));
    CHECK(parse_double("  2.5 ", v));
    CHECK(v == 2.5);
    CHECK(parse_double("-1e-3", v));
    CHECK(v == -1e-3);
}

TEST_CASE("split keeps empty fields") {
    auto parts = split("a,,c", ',');
    REQUIRE(parts.size() == 3);
    CHECK(parts[0] == "a");
    CHECK(parts[1] == "");
    CHECK(parts[2] == "c");
}

TEST_CASE("fnv1a64 known vectors") {
    // Published FNV-1a test values.
    CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ull);
    CHECK(to_hex(0xcbf29ce484222325ull) == "cbf29ce484222325");
}
