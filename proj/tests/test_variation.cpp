#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tsfb/presets.hpp"

using namespace tsfb;

namespace {

Direction mixed_direction(const TwoSidedLattice& lat, const Dims& dims) {
    Direction d = zero_direction(lat, dims);
    for (std::size_t i = 0; i < lat.level_size(0); ++i)
        for (int c = 0; c < dims.n; ++c) d.dxi.node(i)[c] = 0.5;
    for (std::size_t i = 0; i < lat.level_size(lat.N()); ++i)
        for (int c = 0; c < dims.k; ++c) d.deta.node(i)[c] = -0.3;
    for (int k = 0; k <= lat.N(); ++k)
        for (std::size_t i = 0; i < lat.level_size(k); ++i)
            for (int c = 0; c < dims.u_dim(); ++c) d.du.node(k, i)[c] = 0.4;
    return d;
}

}  // namespace

TEST_CASE("direction algebra") {
    TwoSidedLattice lat(1.0, 3);
    Dims dims;
    Direction d = mixed_direction(lat, dims);
    Direction half = scale_direction(d, 0.5);
    CHECK(half.dxi.node(0)[0] == doctest::Approx(0.25));
    CHECK(half.du.node(1, 0)[0] == doctest::Approx(0.2));

    ControlTriple base;
    base.xi = LevelField(lat, 0, 1, 1.0);
    base.eta = LevelField(lat, lat.N(), 1, 2.0);
    base.u = constant_control(lat, 1, 0.1);
    ControlTriple moved = shift_triple(base, d, 2.0);
    CHECK(moved.xi.node(0)[0] == doctest::Approx(2.0));
    CHECK(moved.eta.node(0)[0] == doctest::Approx(1.4));
    CHECK(moved.u.node(2, 1)[0] == doctest::Approx(0.9));
    Direction back = triple_difference(moved, base);
    CHECK(back.dxi.node(0)[0] == doctest::Approx(1.0));
    CHECK(back.du.node(2, 1)[0] == doctest::Approx(0.8));
}

TEST_CASE("frozen Jacobians match the declared partials") {
    TwoSidedLattice lat(1.0, 3);
    Preset p = get_preset("nonlinear-scalar", lat);
    FbdsdeSolution sol = solve_fbdsde(make_state_problem(p.spec, p.base));
    FrozenCoefficients frozen = freeze(p.spec, sol, p.base.u, true);
    const int k = 2;
    const std::size_t i = 1;
    double expected;
    p.spec.coeffs.dF[static_cast<int>(Var::y)](
        lat.t(k), sol.x.node(k, i), sol.z.node(k, i), sol.y.node(k, i), sol.q.node(k, i),
        p.base.u.node(k, i), &expected);
    CHECK(frozen.dF[static_cast<int>(Var::y)].node(k, i)[0] == doctest::Approx(expected));
    CHECK(frozen.has_l);
}

TEST_CASE("linear dynamics: variational solution is exact for every rho") {
    TwoSidedLattice lat(1.0, 5);
    for (const char* name : {"linear-scalar", "lq-2d"}) {
        Preset p = get_preset(name, lat);
        Direction dir = mixed_direction(lat, p.dims);
        auto gaps = difference_quotient_gap(p.spec, p.base, dir, {1.0, 0.1, 0.01});
        for (const auto& g : gaps) {
            CHECK(g.x_gap <= 1e-9);
            CHECK(g.z_gap <= 1e-9);
            CHECK(g.y_gap <= 1e-9);
            CHECK(g.q_gap <= 1e-9);
        }
    }
}

TEST_CASE("nonlinear dynamics: quadratic shrinkage of the quotient gap") {
    TwoSidedLattice lat(1.0, 5);
    Preset p = get_preset("nonlinear-scalar", lat);
    Direction dir = mixed_direction(lat, p.dims);
    auto gaps = difference_quotient_gap(p.spec, p.base, dir, {0.1, 0.01});
    CHECK(gaps[1].x_gap <= 0.5 * gaps[0].x_gap);
    CHECK(gaps[1].y_gap <= 0.5 * gaps[0].y_gap);
    CHECK(gaps[1].z_gap <= 0.5 * gaps[0].z_gap);
    CHECK(gaps[1].q_gap <= 0.5 * gaps[0].q_gap);
}

TEST_CASE("directional derivative matches central differences") {
    TwoSidedLattice lat(1.0, 5);
    for (const char* name : {"linear-scalar", "nonlinear-scalar"}) {
        Preset p = get_preset(name, lat);
        Direction dir = mixed_direction(lat, p.dims);
        const double dJ = directional_cost_derivative(p.spec, p.base, dir);
        const double rho = 1e-5;
        ControlTriple tp = shift_triple(p.base, dir, rho);
        ControlTriple tm = shift_triple(p.base, dir, -rho);
        FbdsdeSolution sp = solve_fbdsde(make_state_problem(p.spec, tp));
        FbdsdeSolution sm = solve_fbdsde(make_state_problem(p.spec, tm));
        const double fd =
            (evaluate_cost(tp, p.spec, sp) - evaluate_cost(tm, p.spec, sm)) / (2.0 * rho);
        CHECK(std::abs(dJ - fd) <= 1e-3);
        CHECK(std::abs(dJ - fd) <= 1e-8);  // the discrete derivative is exact
    }
}

TEST_CASE("zero direction gives the zero variational solution") {
    TwoSidedLattice lat(1.0, 4);
    Preset p = get_preset("nonlinear-scalar", lat);
    FbdsdeSolution sol = solve_fbdsde(make_state_problem(p.spec, p.base));
    FrozenCoefficients frozen = freeze(p.spec, sol, p.base.u, false);
    FbdsdeSolution var = solve_variational(frozen, zero_direction(lat, p.dims));
    for (int k = 0; k <= lat.N(); ++k) {
        for (double v : var.x.level[k]) CHECK(std::abs(v) <= 1e-13);
        for (double v : var.y.level[k]) CHECK(std::abs(v) <= 1e-13);
    }
}
