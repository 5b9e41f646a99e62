#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tsfb/presets.hpp"

using namespace tsfb;

TEST_CASE("convex set projection and membership") {
    ConvexSet box = ConvexSet::box({-1.0, 0.0}, {1.0, 2.0});
    double p[2] = {3.0, -1.0}, out[2];
    box.project(p, out);
    CHECK(out[0] == doctest::Approx(1.0));
    CHECK(out[1] == doctest::Approx(0.0));
    CHECK(box.contains(out));
    CHECK_FALSE(box.contains(p));
    CHECK(box.on_boundary(out));
    CHECK(box.diameter() == doctest::Approx(std::sqrt(4.0 + 4.0)));

    ConvexSet ball = ConvexSet::ball({0.0, 0.0}, 2.0);
    double q[2] = {3.0, 4.0};
    ball.project(q, out);
    CHECK(std::hypot(out[0], out[1]) == doctest::Approx(2.0));
    CHECK(out[0] == doctest::Approx(1.2));
    CHECK(ball.on_boundary(out));
    CHECK(ball.diameter() == doctest::Approx(4.0));

    ConvexSet pt = ConvexSet::point({0.7});
    double r[1] = {-5.0};
    pt.project(r, out);
    CHECK(out[0] == doctest::Approx(0.7));
    CHECK(pt.diameter() == doctest::Approx(0.0));
}

TEST_CASE("left-endpoint quadrature of the running cost") {
    Dims dims;
    ProblemSpec spec = make_problem_shell(dims);
    auto zero = [](double, const double*, const double*, const double*, const double*,
                   const double*, double* o) { o[0] = 0.0; };
    spec.coeffs.F = zero;
    spec.coeffs.G = zero;
    spec.coeffs.f = zero;
    spec.coeffs.g = zero;
    spec.l = [](double t, const double*, const double*, const double*, const double*,
                const double*, double* o) { o[0] = t; };
    spec.has_l = true;
    spec.K1 = ConvexSet::scalar_box(-1.0, 1.0);
    spec.K2 = ConvexSet::scalar_box(-1.0, 1.0);

    const int N = 5;
    TwoSidedLattice lat(1.0, N);
    ControlTriple t;
    t.xi = LevelField(lat, 0, 1, 0.0);
    t.eta = LevelField(lat, lat.N(), 1, 0.0);
    t.u = constant_control(lat, 1, 0.0);
    FbdsdeSolution sol = solve_fbdsde(make_state_problem(spec, t));
    // sum_{k<N} t_k dt = (N-1)/(2N)
    CHECK(evaluate_cost(t, spec, sol) ==
          doctest::Approx((N - 1) / (2.0 * N)).epsilon(1e-13));

    // boundary pieces are means of chi(xi), lambda(eta), phi(x_N), gamma(y_0)
    spec.chi.value = [](const double* x) { return 2.0 * x[0]; };
    spec.chi.grad = [](const double*, double* g) { g[0] = 2.0; };
    ControlTriple t2 = t;
    for (std::size_t i = 0; i < lat.level_size(0); ++i) t2.xi.node(i)[0] = 0.25;
    FbdsdeSolution sol2 = solve_fbdsde(make_state_problem(spec, t2));
    CHECK(evaluate_cost(t2, spec, sol2) ==
          doctest::Approx((N - 1) / (2.0 * N) + 0.5).epsilon(1e-13));
}

TEST_CASE("constraint residuals measure expectation gaps") {
    TwoSidedLattice lat(1.0, 4);
    Preset p = get_preset("nonlinear-scalar", lat);
    FbdsdeSolution sol = solve_fbdsde(make_state_problem(p.spec, p.base));
    ConstraintResiduals cr = constraint_residuals(p.spec, sol);
    const double ex = expectation(sol.x, lat.N())[0];
    const double ey = expectation(sol.y, 0)[0];
    CHECK(cr.psi_gap[0] == doctest::Approx(ex - p.spec.a[0]));
    CHECK(cr.h_gap[0] == doctest::Approx(ey - p.spec.b[0]));
    CHECK(cr.psi_residual == doctest::Approx(std::abs(cr.psi_gap[0])));
}

TEST_CASE("admissibility is checked nodewise") {
    TwoSidedLattice lat(1.0, 3);
    Preset p = get_preset("nonlinear-scalar", lat);
    CHECK(is_admissible(p.base, p.spec));
    ControlTriple bad = p.base;
    bad.u.node(1, 0)[0] = 5.0;  // outside K = [-1, 1]
    CHECK_FALSE(is_admissible(bad, p.spec));
    ControlTriple bad2 = p.base;
    bad2.xi.node(0)[0] = 0.4;  // K1 is the point {0.3}
    CHECK_FALSE(is_admissible(bad2, p.spec));
}

TEST_CASE("time-function controls are constant across nodes") {
    TwoSidedLattice lat(1.0, 4);
    AdaptedField u = control_from_time_function(lat, 1, [](double t, double* o) {
        o[0] = 3.0 * t;
    });
    for (int k = 0; k <= lat.N(); ++k)
        for (std::size_t i = 0; i < lat.level_size(k); ++i)
            CHECK(u.node(k, i)[0] == doctest::Approx(3.0 * lat.t(k)));
    AdaptedField c = constant_control(lat, 2, 0.4);
    CHECK(c.dim == 2);
    CHECK(c.node(2, 3)[1] == doctest::Approx(0.4));
}

TEST_CASE("forward junction reads the control at the left endpoint") {
    // dynamics: F = u with u(t) = t; then E x_N = x_0 - sum t_k dt
    Dims dims;
    ProblemSpec spec = make_problem_shell(dims);
    auto zero = [](double, const double*, const double*, const double*, const double*,
                   const double*, double* o) { o[0] = 0.0; };
    spec.coeffs.F = [](double, const double*, const double*, const double*, const double*,
                       const double* u, double* o) { o[0] = u[0]; };
    spec.coeffs.G = zero;
    spec.coeffs.f = zero;
    spec.coeffs.g = zero;
    const int N = 4;
    TwoSidedLattice lat(1.0, N);
    ControlTriple t;
    t.xi = LevelField(lat, 0, 1, 1.0);
    t.eta = LevelField(lat, lat.N(), 1, 0.0);
    t.u = control_from_time_function(lat, 1, [](double s, double* o) { o[0] = s; });
    FbdsdeSolution sol = solve_fbdsde(make_state_problem(spec, t));
    CHECK(expectation(sol.x, lat.N())[0] ==
          doctest::Approx(1.0 - (N - 1) / (2.0 * N)).epsilon(1e-12));
}
