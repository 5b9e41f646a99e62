#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tsfb/presets.hpp"

using namespace tsfb;

namespace {

Coeff constant(double v, int dim = 1) {
    return [v, dim](double, const double*, const double*, const double*, const double*,
                    const double*, double* o) { std::fill(o, o + dim, v); };
}

ProblemSpec cross_coupled(double a, double b) {
    Dims dims;
    ProblemSpec sp = make_problem_shell(dims);
    sp.coeffs.F = [a](double, const double*, const double*, const double* y, const double*,
                      const double*, double* o) { o[0] = a * y[0]; };
    sp.coeffs.G = constant(0.0);
    sp.coeffs.f = [b](double, const double* x, const double*, const double*, const double*,
                      const double*, double* o) { o[0] = b * x[0]; };
    sp.coeffs.g = constant(0.0);
    for (int v = 0; v < 5; ++v) {
        sp.coeffs.dF[v] = constant(0.0);
        sp.coeffs.dG[v] = constant(0.0);
        sp.coeffs.df[v] = constant(0.0);
        sp.coeffs.dg[v] = constant(0.0);
    }
    sp.coeffs.dF[static_cast<int>(Var::y)] = constant(a);
    sp.coeffs.df[static_cast<int>(Var::x)] = constant(b);
    sp.coeffs.has_partials = true;
    return sp;
}

ControlTriple unit_triple(const TwoSidedLattice& lat) {
    ControlTriple t;
    t.xi = LevelField(lat, 0, 1, 1.0);
    t.eta = LevelField(lat, lat.N(), 1, 1.0);
    t.u = constant_control(lat, 1, 0.0);
    return t;
}

}  // namespace

TEST_CASE("zero data yields the zero solution with zero residuals") {
    TwoSidedLattice lat(1.0, 6);
    Preset p = get_preset("paper-3.12", lat);
    FbdsdeProblem prob = make_state_problem(p.spec, p.base);
    FbdsdeSolution sol = solve_fbdsde(prob);
    CHECK(sol.converged);
    for (int k = 0; k <= lat.N(); ++k) {
        for (double v : sol.x.level[k]) CHECK(std::abs(v) <= 1e-12);
        for (double v : sol.z.level[k]) CHECK(std::abs(v) <= 1e-12);
        for (double v : sol.y.level[k]) CHECK(std::abs(v) <= 1e-12);
        for (double v : sol.q.level[k]) CHECK(std::abs(v) <= 1e-12);
    }
    CHECK(fbdsde_backward_residual(prob, sol) <= 1e-12);
    CHECK(fbdsde_forward_residual(prob, sol) <= 1e-10);
}

TEST_CASE("one-step cost oracle for the bilinear example under u = 1") {
    // single step, u = 1: four outcomes, cost enumerated by hand
    TwoSidedLattice lat(1.0, 1);
    Preset p = get_preset("paper-3.12", lat);
    ControlTriple t = p.base;
    t.u = constant_control(lat, 1, 1.0);
    FbdsdeSolution sol = solve_fbdsde(make_state_problem(p.spec, t));
    CHECK(sol.converged);
    CHECK(evaluate_cost(t, p.spec, sol) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("solutions satisfy the recursions a posteriori") {
    TwoSidedLattice lat(1.0, 5);
    for (const char* name : {"nonlinear-scalar", "linear-scalar", "lq-2d"}) {
        Preset p = get_preset(name, lat);
        FbdsdeProblem prob = make_state_problem(p.spec, p.base);
        FbdsdeSolution sol = solve_fbdsde(prob);
        CHECK(sol.converged);
        CHECK(fbdsde_backward_residual(prob, sol) <= 1e-11);
        CHECK(fbdsde_forward_residual(prob, sol) <= 1e-10);
    }
}

TEST_CASE("declared partials agree with finite differences") {
    TwoSidedLattice lat(1.0, 4);
    for (const char* name : {"paper-3.12", "nonlinear-scalar", "linear-scalar", "lq-2d"}) {
        Preset p = get_preset(name, lat);
        CHECK(validate_partials(p.spec.coeffs, 40, 7) <= 1e-6);
    }
}

TEST_CASE("non-convergence is reported honestly and damping steps in") {
    TwoSidedLattice lat(1.0, 4);
    ProblemSpec sp = cross_coupled(2.0, -0.98);
    SolveOptions opts;
    opts.max_iter = 300;
    FbdsdeSolution sol = solve_fbdsde(make_state_problem(sp, unit_triple(lat)), opts);
    CHECK_FALSE(sol.converged);
    CHECK(sol.theta_used < 1.0);  // automatic fallback engaged

    // mild coupling converges at full weight
    FbdsdeSolution ok = solve_fbdsde(make_state_problem(cross_coupled(1.5, -1.0),
                                                        unit_triple(lat)), opts);
    CHECK(ok.converged);
    CHECK(ok.theta_used == doctest::Approx(1.0));
}

TEST_CASE("monotonicity certificate on a dissipative system") {
    Dims dims;
    ProblemSpec sp = make_problem_shell(dims);
    // A(zeta) = -(F, G, f, g) = -zeta is 1-monotone
    sp.coeffs.F = [](double, const double* x, const double*, const double*, const double*,
                     const double*, double* o) { o[0] = x[0]; };
    sp.coeffs.G = [](double, const double*, const double* z, const double*, const double*,
                     const double*, double* o) { o[0] = z[0]; };
    sp.coeffs.f = [](double, const double*, const double*, const double* y, const double*,
                     const double*, double* o) { o[0] = y[0]; };
    sp.coeffs.g = [](double, const double*, const double*, const double*, const double* q,
                     const double*, double* o) { o[0] = q[0]; };
    const double u0 = 0.0;
    MonotonicityReport rep = certify_monotonicity(sp.coeffs, &u0, 200, 11);
    CHECK(rep.certified);
    CHECK(rep.mu_hat == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("Lipschitz certificate separates state and noise gains") {
    TwoSidedLattice lat(1.0, 4);
    Preset p = get_preset("nonlinear-scalar", lat);
    LipschitzReport rep = certify_lipschitz(p.spec.coeffs, p.base.u.node(0, 0), 300, 13);
    CHECK(rep.certified);  // the preset's (G, g) do not read z or q
    CHECK(rep.alpha_hat <= 1e-12);
    CHECK(rep.C_hat > 0.0);

    // strong q-gain in g breaks the coupled-regime bound
    Dims dims;
    ProblemSpec sp = make_problem_shell(dims);
    sp.coeffs.F = constant(0.0);
    sp.coeffs.G = constant(0.0);
    sp.coeffs.f = constant(0.0);
    sp.coeffs.g = [](double, const double*, const double*, const double*, const double* q,
                     const double*, double* o) { o[0] = 0.9 * q[0]; };
    const double u0 = 0.0;
    LipschitzReport bad = certify_lipschitz(sp.coeffs, &u0, 300, 13);
    CHECK_FALSE(bad.certified);
    CHECK(bad.alpha_hat >= 0.5);
}

TEST_CASE("repeated solves are bitwise identical") {
    TwoSidedLattice lat(1.0, 5);
    Preset p = get_preset("nonlinear-scalar", lat);
    FbdsdeSolution a = solve_fbdsde(make_state_problem(p.spec, p.base));
    FbdsdeSolution b = solve_fbdsde(make_state_problem(p.spec, p.base));
    for (int k = 0; k <= lat.N(); ++k) {
        CHECK(a.x.level[k] == b.x.level[k]);
        CHECK(a.z.level[k] == b.z.level[k]);
        CHECK(a.y.level[k] == b.y.level[k]);
        CHECK(a.q.level[k] == b.q.level[k]);
    }
}
