#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tsfb/bdsde.hpp"

using namespace tsfb;

namespace {

LevelField terminal_walk(const TwoSidedLattice& lat) {
    // eta = W_T: at step N the index packs all N W coins in the low bits
    LevelField eta(lat, lat.N(), 1);
    for (std::size_t i = 0; i < lat.level_size(lat.N()); ++i) {
        double w = 0.0;
        for (int j = 0; j < lat.N(); ++j) w += ((i >> j) & 1) ? lat.coin() : -lat.coin();
        eta.node(i)[0] = w;
    }
    return eta;
}

}  // namespace

TEST_CASE("terminal W_T reproduces the walk with unit integrand") {
    TwoSidedLattice lat(1.0, 6);
    BdsdeSpec spec;
    spec.dim = 1;
    spec.terminal = terminal_walk(lat);
    spec.f = [](double, const double*, const double*, double* o) { o[0] = 0.0; };
    spec.g = [](double, const double*, const double*, double* o) { o[0] = 0.0; };
    BdsdeSolution sol = solve_bdsde(spec, lat);
    for (int k = 0; k <= lat.N(); ++k)
        for (std::size_t i = 0; i < lat.level_size(k); ++i) {
            double w = 0.0;
            for (int j = 0; j < k; ++j) w += ((i >> j) & 1) ? lat.coin() : -lat.coin();
            CHECK(sol.y.node(k, i)[0] == doctest::Approx(w).epsilon(1e-12));
            if (k < lat.N()) CHECK(sol.q.node(k, i)[0] == doctest::Approx(1.0).epsilon(1e-12));
        }
    CHECK(sol.q.node(lat.N(), 0)[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(bdsde_residual(sol.y, sol.q, spec) <= 1e-13);
}

TEST_CASE("constant backward integrand shifts by the remaining B increments") {
    TwoSidedLattice lat(1.0, 6);
    const double c = 0.7;
    BdsdeSpec spec;
    spec.dim = 1;
    spec.terminal = LevelField(lat, lat.N(), 1, 1.0);
    spec.f = [](double, const double*, const double*, double* o) { o[0] = 0.0; };
    spec.g = [c](double, const double*, const double*, double* o) { o[0] = c; };
    BdsdeSolution sol = solve_bdsde(spec, lat);
    for (int k = 0; k <= lat.N(); ++k)
        for (std::size_t i = 0; i < lat.level_size(k); ++i) {
            // B coins of steps k..N-1 sit above the k W bits
            double btail = 0.0;
            for (int j = 0; j < lat.N() - k; ++j)
                btail += ((i >> (k + j)) & 1) ? lat.coin() : -lat.coin();
            CHECK(sol.y.node(k, i)[0] == doctest::Approx(1.0 + c * btail).epsilon(1e-12));
            CHECK(sol.q.node(k, i)[0] == doctest::Approx(0.0));
        }
}

TEST_CASE("deterministic driver reproduces the exponential within 2 dt") {
    TwoSidedLattice lat(1.0, 16);
    BdsdeSpec spec;
    spec.dim = 1;
    spec.terminal = LevelField(lat, lat.N(), 1, 1.0);
    spec.f = [](double, const double* y, const double*, double* o) { o[0] = -y[0]; };
    spec.g = [](double, const double*, const double*, double* o) { o[0] = 0.0; };
    BdsdeSolution sol = solve_bdsde(spec, lat);
    const double y0 = sol.y.node(0, 0)[0];
    CHECK(std::abs(y0 - std::exp(-1.0)) <= 2.0 * lat.dt());
    // every level-0 node agrees (the solution is deterministic)
    for (std::size_t i = 0; i < lat.level_size(0); ++i)
        CHECK(sol.y.node(0, i)[0] == doctest::Approx(y0));
}

TEST_CASE("q-dependent driver converges and satisfies the recursion") {
    TwoSidedLattice lat(1.0, 5);
    BdsdeSpec spec;
    spec.dim = 1;
    spec.terminal = terminal_walk(lat);
    spec.f = [](double, const double* y, const double* q, double* o) {
        o[0] = 0.5 * y[0] + 0.2 * q[0];
    };
    spec.g = [](double, const double* y, const double*, double* o) { o[0] = 0.1 * y[0]; };
    spec.lipschitz_C = 0.5;
    spec.lipschitz_alpha = 0.04;
    BdsdeSolution sol = solve_bdsde(spec, lat);
    CHECK(bdsde_residual(sol.y, sol.q, spec) <= 1e-12);
}

TEST_CASE("residual detects tampered fields") {
    TwoSidedLattice lat(1.0, 4);
    BdsdeSpec spec;
    spec.dim = 1;
    spec.terminal = LevelField(lat, lat.N(), 1, 1.0);
    spec.f = [](double, const double* y, const double*, double* o) { o[0] = -y[0]; };
    spec.g = [](double, const double*, const double*, double* o) { o[0] = 0.0; };
    BdsdeSolution sol = solve_bdsde(spec, lat);
    sol.y.node(2, 1)[0] += 0.05;
    CHECK(bdsde_residual(sol.y, sol.q, spec) > 1e-3);
}
