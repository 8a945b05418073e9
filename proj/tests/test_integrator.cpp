#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "integrate.hpp"

using namespace mrf;

namespace {
IntegratorParams tight() {
    IntegratorParams p;
    p.rel_tol = 1e-10;
    p.abs_tol = 1e-12;
    return p;
}
}  // namespace

TEST_CASE("exponential growth matches the closed form") {
    VectorField f = make_linear_field(1.0, 2, 1.0);
    auto dom = ExhaustionDomain::whole_space(2);
    IntegratorParams p = tight();
    Trajectory tr = integrate(f, dom, Vec{0.3, -0.4}, p);
    CHECK(tr.termination == Termination::horizon_reached);
    CHECK(tr.final_state.x[0] == doctest::Approx(0.3 * std::exp(1.0)).epsilon(1e-9));
    CHECK(tr.final_state.x[1] == doctest::Approx(-0.4 * std::exp(1.0)).epsilon(1e-9));
    CHECK(tr.t_max_estimate == doctest::Approx(1.0));
}

TEST_CASE("rotation preserves the radius over a full period") {
    VectorField f = make_rotation_field(10.0);
    auto dom = ExhaustionDomain::whole_space(2);
    IntegratorParams p = tight();
    p.horizon = 2.0 * M_PI;
    Trajectory tr = integrate(f, dom, Vec{1.0, 0.0}, p);
    CHECK((tr.final_state.x - Vec{1.0, 0.0}).norm() < 1e-7);
}

TEST_CASE("cubic blow-up time matches 1/(2 r0^2)") {
    // dr/dt = r^3  =>  T = 1/(2 r0^2)
    VectorField f = make_cubic_radial_field(3, 2.0);
    auto dom = ExhaustionDomain::whole_space(3);
    IntegratorParams p = tight();
    p.horizon = 2.0;
    Trajectory tr = integrate(f, dom, Vec{1.0, 0.0, 0.0}, p);
    CHECK(tr.termination == Termination::blowup_declared);
    CHECK(tr.t_max_estimate == doctest::Approx(0.5).epsilon(1e-3));
    CHECK(classify_blowup(tr, dom, ClassifyParams{}) == BlowupClass::proper);
}

TEST_CASE("no blow-up classification for a completed trajectory") {
    VectorField f = make_linear_field(1.0, 2, 1.0);
    auto dom = ExhaustionDomain::whole_space(2);
    Trajectory tr = integrate(f, dom, Vec{0.5, 0.0}, tight());
    CHECK(classify_blowup(tr, dom, ClassifyParams{}) == BlowupClass::none);
}

TEST_CASE("hitting time of the first exhaustion level is ln 2") {
    // |X(t)| = e^t from |x0| = 1 crosses B_2 at t = ln 2
    VectorField f = make_linear_field(1.0, 2, 1.0);
    auto dom = ExhaustionDomain::whole_space(2);
    Trajectory tr = integrate(f, dom, Vec{1.0, 0.0}, tight());
    REQUIRE(!tr.hitting.empty());
    CHECK(tr.hitting[0].hit);
    CHECK(tr.hitting[0].time == doctest::Approx(std::log(2.0)).epsilon(1e-8));
    CHECK(tr.hitting[0].exit_point.norm() == doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("restart from s0 shifts the time axis") {
    VectorField f = make_linear_field(1.0, 2, 1.0);
    auto dom = ExhaustionDomain::whole_space(2);
    IntegratorParams p = tight();
    Trajectory tr = integrate(f, dom, Vec{0.2, 0.0}, p, 0.4);
    CHECK(tr.start_time == doctest::Approx(0.4));
    CHECK(tr.final_state.t == doctest::Approx(1.0));
    CHECK(tr.final_state.x[0] == doctest::Approx(0.2 * std::exp(0.6)).epsilon(1e-9));
}

TEST_CASE("record_times stores exactly the requested grid") {
    VectorField f = make_linear_field(1.0, 2, 1.0);
    auto dom = ExhaustionDomain::whole_space(2);
    IntegratorParams p = tight();
    p.store_all = false;
    p.record_times = {0.0, 0.25, 0.5, 0.75, 1.0};
    Trajectory tr = integrate(f, dom, Vec{0.1, 0.0}, p);
    REQUIRE(tr.samples.size() >= 5);
    for (double t : p.record_times) {
        TrajSample s = sample_at(tr, t);
        CHECK(s.x[0] == doctest::Approx(0.1 * std::exp(t)).epsilon(1e-8));
    }
}

TEST_CASE("hermite interpolation between accepted steps") {
    VectorField f = make_linear_field(-1.0, 2, 1.0);
    auto dom = ExhaustionDomain::whole_space(2);
    Trajectory tr = integrate(f, dom, Vec{1.0, 1.0}, tight());
    for (double t : {0.123, 0.5, 0.987}) {
        TrajSample s = sample_at(tr, t);
        CHECK(s.x[0] == doctest::Approx(std::exp(-t)).epsilon(1e-8));
    }
}

TEST_CASE("jacobian ODE gives log J = d t for b = x") {
    for (int d : {2, 3}) {
        VectorField f = make_linear_field(1.0, d, 1.0);
        auto dom = ExhaustionDomain::whole_space(d);
        Trajectory tr = integrate(f, dom, Vec(d), tight());
        integrate_jacobian(f, tr);
        REQUIRE(!tr.jacobian.empty());
        CHECK(std::log(tr.jacobian.back().second) == doctest::Approx((double)d).epsilon(1e-6));
    }
}

TEST_CASE("first_hitting reports 0 for an initial point outside") {
    std::vector<TrajSample> samples{{0.0, Vec{5.0, 0.0}, Vec{0.0, 0.0}}};
    HittingRecord h = first_hitting(samples, parse_region("ball([0,0],1)"));
    CHECK(h.hit);
    CHECK(h.time == doctest::Approx(0.0));
}

TEST_CASE("parameter validation rejects nonsense") {
    IntegratorParams p;
    p.dt_max = -1;
    CHECK_THROWS_AS(p.validate(), Error);
}
