#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "region.hpp"

using namespace mrf;

TEST_CASE("region parsing and round trip") {
    Region b = parse_region("ball([1,2],3)");
    CHECK(b.dim() == 2);
    CHECK(signed_margin(b, Vec{1.0, 2.0}) == doctest::Approx(3.0));
    CHECK(signed_margin(b, Vec{4.0, 2.0}) == doctest::Approx(0.0));
    CHECK(signed_margin(b, Vec{5.0, 2.0}) == doctest::Approx(-1.0));
    CHECK(parse_region(region_to_string(b)).dim() == 2);

    Region box = parse_region("box([0,0],[2,1])");
    CHECK(signed_margin(box, Vec{1.0, 0.5}) == doctest::Approx(0.5));
    CHECK(region_volume(box) == doctest::Approx(2.0));
    CHECK(region_diameter(box) == doctest::Approx(std::sqrt(5.0)));

    Region rs = parse_region("rspace(3)");
    CHECK(rs.is_whole_space());
    CHECK(rs.dim() == 3);
    CHECK(region_diameter(rs) == kInf);

    Region u = parse_region("union[ball([0,0],1);ball([3,0],1)]");
    CHECK(contains(u, Vec{3.5, 0.0}));
    CHECK(!contains(u, Vec{1.5, 0.0}));
    CHECK(parse_region(region_to_string(u)).dim() == 2);
}

TEST_CASE("malformed region strings throw") {
    CHECK_THROWS_AS(parse_region("ball([0,0])"), Error);
    CHECK_THROWS_AS(parse_region("cylinder([0],1)"), Error);
    CHECK_THROWS_AS(parse_region(""), Error);
}

TEST_CASE("ball volume oracle") {
    CHECK(region_volume(parse_region("ball([0,0],2)")) ==
          doctest::Approx(4.0 * M_PI));  // pi r^2
    CHECK(region_volume(parse_region("ball([0,0,0],1)")) ==
          doctest::Approx(4.0 * M_PI / 3.0));
    CHECK_THROWS_AS(region_volume(parse_region("rspace(2)")), Error);
}

TEST_CASE("whole-space exhaustion and confining potential") {
    ExhaustionDomain dom = ExhaustionDomain::whole_space(2, 10);
    CHECK(dom.levels.size() == 10);
    CHECK(!dom.bounded);
    CHECK(contains(dom.levels[0], Vec{0.0, 0.0}));
    // nested
    CHECK(signed_margin(dom.levels[1], Vec{0.0, 0.0}) >
          signed_margin(dom.levels[0], Vec{0.0, 0.0}));
    // V(x) = |x| for the whole space
    CHECK(dom.potential(Vec{3.0, 4.0}) == doctest::Approx(5.0));
}

TEST_CASE("bounded exhaustion potential diverges at the boundary") {
    ExhaustionDomain dom = ExhaustionDomain::from_region(parse_region("ball([0,0],1)"), 10);
    CHECK(dom.bounded);
    double v_in = dom.potential(Vec{0.5, 0.0});
    double v_edge = dom.potential(Vec{0.999, 0.0});
    CHECK(v_edge > v_in);
    CHECK(v_edge == doctest::Approx(1.0 / 0.001).epsilon(1e-6));
    CHECK_THROWS_AS(dom.potential(Vec{2.0, 0.0}), Error);
}

TEST_CASE("hitting record default encodes never-hit") {
    HittingRecord h;
    CHECK(!h.hit);
    CHECK(h.time == kInf);
}
