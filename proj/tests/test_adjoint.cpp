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

double sup_abs(const AdaptedField& f) {
    double s = 0.0;
    for (const auto& lv : f.level)
        for (double v : lv) s = std::max(s, std::abs(v));
    return s;
}

}  // namespace

TEST_CASE("costate vanishes along the zero trajectory of the bilinear example") {
    TwoSidedLattice lat(1.0, 8);
    Preset p = get_preset("paper-3.12", lat);
    FbdsdeSolution sol = solve_fbdsde(make_state_problem(p.spec, p.base));
    FrozenCoefficients frozen = freeze(p.spec, sol, p.base.u, true);
    BoundaryWeights w{1.0, 1.0, {0.0}, {0.0}};
    AdjointSolution adj = solve_adjoint(frozen, w, p.spec, sol, true);
    CHECK(adj.converged);
    CHECK(sup_abs(adj.m) <= 1e-12);
    CHECK(sup_abs(adj.p) <= 1e-12);
    CHECK(sup_abs(adj.n) <= 1e-12);
    CHECK(sup_abs(adj.delta) <= 1e-12);
    AdaptedField hu = assemble_hamiltonian_u(frozen, adj);
    CHECK(sup_abs(hu) <= 1e-12);
}

TEST_CASE("pointwise Hamiltonian agrees with the assembled u-gradient") {
    TwoSidedLattice lat(1.0, 4);
    Preset p = get_preset("nonlinear-scalar", lat);
    FbdsdeSolution sol = solve_fbdsde(make_state_problem(p.spec, p.base));
    FrozenCoefficients frozen = freeze(p.spec, sol, p.base.u, true);
    BoundaryWeights w{1.0, 1.0, {0.0}, {0.0}};
    AdjointSolution adj = solve_adjoint(frozen, w, p.spec, sol, true);
    AdaptedField hu = assemble_hamiltonian_u(frozen, adj);
    const int k = 2;
    const std::size_t i = 3;
    double direct;
    hamiltonian_u(p.spec, lat.t(k), sol.x.node(k, i), sol.z.node(k, i), sol.y.node(k, i),
                  sol.q.node(k, i), p.base.u.node(k, i), adj.m.node(k, i), adj.p.node(k, i),
                  adj.n.node(k, i), adj.delta.node(k, i), true, &direct);
    CHECK(hu.node(k, i)[0] == doctest::Approx(direct).epsilon(1e-12));

    // the scalar Hamiltonian is finite and differentiable in u: check by FD
    double u0 = p.base.u.node(k, i)[0], h = 1e-6, up = u0 + h, um = u0 - h;
    const double Hp = hamiltonian(p.spec, lat.t(k), sol.x.node(k, i), sol.z.node(k, i),
                                  sol.y.node(k, i), sol.q.node(k, i), &up, adj.m.node(k, i),
                                  adj.p.node(k, i), adj.n.node(k, i), adj.delta.node(k, i), true);
    const double Hm = hamiltonian(p.spec, lat.t(k), sol.x.node(k, i), sol.z.node(k, i),
                                  sol.y.node(k, i), sol.q.node(k, i), &um, adj.m.node(k, i),
                                  adj.p.node(k, i), adj.n.node(k, i), adj.delta.node(k, i), true);
    CHECK((Hp - Hm) / (2.0 * h) == doctest::Approx(direct).epsilon(1e-6));
}

TEST_CASE("duality identity: exact vanishing cases") {
    TwoSidedLattice lat(1.0, 5);
    Preset p = get_preset("nonlinear-scalar", lat);
    FbdsdeSolution sol = solve_fbdsde(make_state_problem(p.spec, p.base));
    FrozenCoefficients frozen = freeze(p.spec, sol, p.base.u, false);
    BoundaryWeights w{0.3, -0.4, {0.2}, {0.5}};
    AdjointSolution adj = solve_adjoint(frozen, w, p.spec, sol, false);
    Direction dir = mixed_direction(lat, p.dims);
    FbdsdeSolution var = solve_variational(frozen, dir);

    Direction zd = zero_direction(lat, p.dims);
    FbdsdeSolution zv = solve_variational(frozen, zd);
    CHECK(std::abs(duality_gap(p.spec, sol, frozen, w, adj, zd, zv)) <= 1e-10);

    BoundaryWeights zw{0.0, 0.0, {0.0}, {0.0}};
    AdjointSolution za = solve_adjoint(frozen, zw, p.spec, sol, false);
    CHECK(std::abs(duality_gap(p.spec, sol, frozen, zw, za, dir, var)) <= 1e-10);
}

TEST_CASE("duality gap decays at first order in dt") {
    BoundaryWeights w{0.3, -0.4, {0.2}, {0.5}};
    std::vector<double> gap;
    for (int N : {4, 8, 16}) {
        TwoSidedLattice lat(1.0, N);
        Preset p = get_preset("nonlinear-scalar", lat);
        FbdsdeSolution sol = solve_fbdsde(make_state_problem(p.spec, p.base));
        FrozenCoefficients frozen = freeze(p.spec, sol, p.base.u, false);
        AdjointSolution adj = solve_adjoint(frozen, w, p.spec, sol, false);
        Direction dir = mixed_direction(lat, p.dims);
        FbdsdeSolution var = solve_variational(frozen, dir);
        gap.push_back(std::abs(duality_gap(p.spec, sol, frozen, w, adj, dir, var)));
    }
    const double order = std::log2(gap[0] / gap[2]) / 2.0;
    CHECK(order >= 0.7);
    CHECK(gap[2] < gap[0]);
}

TEST_CASE("maximum-principle residuals pass at the LQ optimum") {
    TwoSidedLattice lat(1.0, 4);
    Preset p = get_preset("lq-scalar", lat);
    LqResult r = lq_solve(*p.lq, lat);
    REQUIRE(r.converged);
    ControlTriple opt = lq_base_triple(*p.lq, lat, r.u);
    FrozenCoefficients frozen = freeze(p.spec, r.state, r.u, true);
    MpResiduals res = mp_residuals(p.spec, opt, r.state, r.costate, frozen, 24, 17);
    CHECK(res.pass(1e-6));
    CHECK(res.boundary_ok);
}

TEST_CASE("a suboptimal control fails the Hamiltonian minimality check") {
    TwoSidedLattice lat(1.0, 4);
    Preset p = get_preset("lq-scalar-suboptimal", lat);
    FbdsdeSolution sol = solve_fbdsde(make_state_problem(p.spec, p.base));
    FrozenCoefficients frozen = freeze(p.spec, sol, p.base.u, true);
    BoundaryWeights w{1.0, 1.0, {0.0}, {0.0}};
    AdjointSolution adj = solve_adjoint(frozen, w, p.spec, sol, true);
    MpResiduals res = mp_residuals(p.spec, p.base, sol, adj, frozen, 24, 17);
    CHECK(res.r_u <= -1e-3);
    CHECK_FALSE(res.pass(1e-6));
}
