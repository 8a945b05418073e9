#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "field.hpp"

using namespace mrf;

TEST_CASE("piecewise constant integral of |m|") {
    // m = -2 on [0,1), +1 on [1,3), -0.5 afterwards
    PiecewiseConstFn m{{1.0, 3.0}, {-2.0, 1.0, -0.5}};
    CHECK(m(0.5) == -2.0);
    CHECK(m(1.0) == 1.0);
    CHECK(m(10.0) == -0.5);
    // int_0^2 |m| = 2 + 1 = 3; int_0^4 = 2 + 2 + 0.5 = 4.5
    CHECK(m.integral_abs(2.0) == doctest::Approx(3.0));
    CHECK(m.integral_abs(4.0) == doctest::Approx(4.5));
    CHECK(PiecewiseConstFn::constant(-3.0).integral_abs(2.0) == doctest::Approx(6.0));
}

TEST_CASE("divergence bound records L") {
    auto b = make_divergence_bound(parse_region("ball([0,0],1)"),
                                   PiecewiseConstFn::constant(-2.0), 1.0);
    CHECK(b.L == doctest::Approx(2.0));
}

TEST_CASE("linear field evaluation and divergence") {
    VectorField f = make_linear_field(2.0, 3, 1.0);
    Vec x{1.0, -0.5, 2.0};
    Vec v = f(0.3, x);
    CHECK(v[0] == doctest::Approx(2.0));
    CHECK(v[1] == doctest::Approx(-1.0));
    CHECK(v[2] == doctest::Approx(4.0));
    CHECK(f.divergence(0.0, x) == doctest::Approx(6.0));  // d * lambda
}

TEST_CASE("rotation field is divergence free") {
    VectorField f = make_rotation_field(1.0);
    Vec x{0.7, -0.2};
    Vec v = f(0.0, x);
    CHECK(v[0] == doctest::Approx(0.2));
    CHECK(v[1] == doctest::Approx(0.7));
    CHECK(f.divergence(0.0, x) == doctest::Approx(0.0).epsilon(1e-8));
}

TEST_CASE("support clips the field to zero outside") {
    VectorField f = make_linear_field(1.0, 2, 1.0);
    f.support = parse_region("ball([0,0],1)");
    CHECK(f(0.0, Vec{0.5, 0.0}).norm() == doctest::Approx(0.5));
    CHECK(f(0.0, Vec{3.0, 0.0}).norm() == 0.0);
}

TEST_CASE("mollification preserves constant fields exactly") {
    VectorField f = make_constant_field(Vec{1.0, -2.0}, 1.0);
    MollifierParams mp;
    mp.epsilon = 0.2;
    VectorField g = mollify(f, mp, parse_region("ball([0,0],10)"));
    Vec v = g(0.0, Vec{0.3, 0.4});
    CHECK(v[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(v[1] == doctest::Approx(-2.0).epsilon(1e-12));
}

TEST_CASE("mollification reproduces linear fields away from the clip edge") {
    // convolution with a symmetric kernel leaves affine functions unchanged
    VectorField f = make_linear_field(1.0, 2, 1.0);
    MollifierParams mp;
    mp.epsilon = 0.1;
    VectorField g = mollify(f, mp, parse_region("ball([0,0],5)"));
    Vec x{0.4, -0.7};
    CHECK((g(0.0, x) - f(0.0, x)).norm() < 1e-10);
}

TEST_CASE("divergence bound verification flags violations") {
    VectorField f = make_linear_field(-1.0, 2, 1.0);
    SamplePlan plan;
    auto ok = make_divergence_bound(parse_region("ball([0,0],1)"),
                                    PiecewiseConstFn::constant(-2.0), 1.0);
    CHECK(verify_divergence_bound(f, ok, plan).violations.empty());
    auto bad = make_divergence_bound(parse_region("ball([0,0],1)"),
                                     PiecewiseConstFn::constant(-1.5), 1.0);
    CHECK(!verify_divergence_bound(f, bad, plan).violations.empty());
}

TEST_CASE("gauss-legendre integrates polynomials exactly") {
    std::vector<double> xs, ws;
    gauss_legendre(5, xs, ws);
    double s0 = 0, s4 = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
        s0 += ws[i];
        s4 += ws[i] * std::pow(xs[i], 4);
    }
    CHECK(s0 == doctest::Approx(2.0).epsilon(1e-13));
    CHECK(s4 == doctest::Approx(0.4).epsilon(1e-12));  // int_-1^1 x^4 = 2/5
}

TEST_CASE("halton points are deterministic and in the unit cube") {
    CHECK(halton(1, 2) == doctest::Approx(0.5));
    CHECK(halton(2, 2) == doctest::Approx(0.25));
    CHECK(halton(1, 3) == doctest::Approx(1.0 / 3.0));
    for (uint64_t i = 1; i < 100; ++i) {
        Vec p = halton_point(i, 4);
        for (int k = 0; k < 4; ++k) {
            CHECK(p[k] > 0.0);
            CHECK(p[k] < 1.0);
        }
    }
}

TEST_CASE("non-finite field output is rejected") {
    VectorField f = make_cubic_radial_field(2, 1.0);
    CHECK_THROWS_AS((void)f(0.0, Vec{1e200, 0.0}), Error);
}
