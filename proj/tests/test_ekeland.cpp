#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tsfb/presets.hpp"

using namespace tsfb;

TEST_CASE("metric on control triples") {
    TwoSidedLattice lat(1.0, 4);
    ControlTriple a, b;
    a.xi = LevelField(lat, 0, 1, 0.0);
    a.eta = LevelField(lat, lat.N(), 1, 0.0);
    a.u = constant_control(lat, 1, 0.0);
    b = a;
    CHECK(metric_d(a, b) == doctest::Approx(0.0));
    // constant offsets: each term contributes its absolute size (T = 1)
    b.xi = LevelField(lat, 0, 1, 0.3);
    b.eta = LevelField(lat, lat.N(), 1, -0.2);
    b.u = constant_control(lat, 1, 0.4);
    CHECK(metric_d(a, b) == doctest::Approx(0.3 + 0.2 + 0.4).epsilon(1e-12));
    CHECK(metric_d(b, a) == doctest::Approx(metric_d(a, b)));
}

TEST_CASE("penalty at a feasible optimum equals eps * sqrt(2)") {
    TwoSidedLattice lat(1.0, 6);
    Preset p = get_preset("paper-3.12", lat);
    FbdsdeSolution sol = solve_fbdsde(make_state_problem(p.spec, p.base));
    OptimalReference ref{0.0, 0.0};  // E phi and E gamma vanish at the optimum
    for (double eps : {0.1, 0.5, 1.0}) {
        PenaltyReport rep = penalty(p.base, ref, p.spec, eps);
        CHECK(rep.F_eps == doctest::Approx(eps * std::sqrt(2.0)).epsilon(1e-12));
        CHECK(rep.components[0] == doctest::Approx(0.0));
        CHECK(rep.components[1] == doctest::Approx(0.0));
        Multipliers m = extract_multipliers(rep);
        CHECK(m.h0 == doctest::Approx(-1.0 / std::sqrt(2.0)).epsilon(1e-12));
        CHECK(m.h1 == doctest::Approx(-1.0 / std::sqrt(2.0)).epsilon(1e-12));
        CHECK(m.norm() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("multiplier sign and normalization across candidates") {
    TwoSidedLattice lat(1.0, 5);
    Preset p = get_preset("nonlinear-scalar", lat);
    OptimalReference ref{0.1, 0.1};
    for (double uval : {-0.5, 0.0, 0.2, 0.7}) {
        ControlTriple cand = p.base;
        cand.u = constant_control(lat, 1, uval);
        PenaltyReport rep = penalty(cand, ref, p.spec, 2.0);
        REQUIRE(rep.F_eps > 0.0);
        Multipliers m = extract_multipliers(rep);
        CHECK(m.h0 <= 0.0);
        CHECK(m.h1 <= 0.0);
        CHECK(m.norm() == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("degenerate penalty: F_eps = 0 is reported, not normalized") {
    TwoSidedLattice lat(1.0, 5);
    Preset p = get_preset("paper-3.12", lat);
    OptimalReference fake{-1.0, -1.0};  // candidate beats the reference by more than eps
    PenaltyReport rep = penalty(p.base, fake, p.spec, 0.5);
    CHECK(rep.F_eps == doctest::Approx(0.0));
    CHECK_THROWS(extract_multipliers(rep));
    DescentResult dr = penalized_descent(p.spec, 0.5, p.base, fake);
    CHECK(dr.hit_zero);
}

TEST_CASE("penalized descent decreases F_eps monotonically") {
    TwoSidedLattice lat(1.0, 5);
    Preset p = get_preset("nonlinear-scalar", lat);
    OptimalReference ref{0.1, 0.1};
    DescentOptions opts;
    opts.max_iter = 12;
    DescentResult dr = penalized_descent(p.spec, 2.0, p.base, ref, opts);
    REQUIRE(dr.history.size() >= 2);
    for (std::size_t i = 1; i < dr.history.size(); ++i)
        CHECK(dr.history[i] < dr.history[i - 1]);
    CHECK(dr.report.F_eps < dr.history.front());
    CHECK(dr.distance_from_start > 0.0);
    CHECK(dr.sqrt_2eps_ball == doctest::Approx(2.0));
}

TEST_CASE("variational inequality residual at the optimum") {
    TwoSidedLattice lat(1.0, 6);
    Preset p = get_preset("paper-3.12", lat);
    FbdsdeSolution sol = solve_fbdsde(make_state_problem(p.spec, p.base));
    OptimalReference ref{0.0, 0.0};
    PenaltyReport rep = penalty(p.base, ref, p.spec, 0.5);
    Multipliers m = extract_multipliers(rep);
    const double r = variational_inequality_residual(m, p.spec, p.base, sol, 50, 23);
    CHECK(r >= -1e-6);
}

TEST_CASE("descent start must be admissible") {
    TwoSidedLattice lat(1.0, 4);
    Preset p = get_preset("nonlinear-scalar", lat);
    ControlTriple bad = p.base;
    bad.u.node(0, 0)[0] = 3.0;
    CHECK_THROWS_AS(penalized_descent(p.spec, 1.0, bad, OptimalReference{0.0, 0.0}),
                    ConfigError);
}
