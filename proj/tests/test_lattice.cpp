#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "tsfb/lattice.hpp"

using namespace tsfb;

TEST_CASE("lattice sizes and bit layout") {
    TwoSidedLattice lat(1.0, 3);
    CHECK(lat.N() == 3);
    CHECK(lat.dt() == doctest::Approx(1.0 / 3.0));
    CHECK(lat.coin() == doctest::Approx(std::sqrt(1.0 / 3.0)));
    for (int k = 0; k <= 3; ++k) CHECK(lat.level_bits(k) == 3);
    CHECK(lat.junction_bits(1) == 4);
    CHECK(lat.total_bits() == 6);

    TwoSidedLattice wide(2.0, 2, 2, 1);
    CHECK(wide.level_bits(0) == 2);   // B coins of both steps
    CHECK(wide.level_bits(2) == 4);   // W coins of both steps
    CHECK(wide.junction_bits(0) == 4);

    CHECK_THROWS_AS(TwoSidedLattice(1.0, 19), ConfigError);
    CHECK_THROWS_AS(TwoSidedLattice(-1.0, 4), ConfigError);
}

TEST_CASE("junction index projections") {
    TwoSidedLattice lat(1.0, 2);
    // junction at k=0: bit0 = W0, bit1 = B0, bit2 = B1
    const std::size_t j = 0b101;
    CHECK(lat.junction_to_level(0, j) == 0b10);       // drop W0
    CHECK(lat.junction_to_level_next(0, j) == 0b11);  // drop B0: W0 low, B1 high
    CHECK(lat.dW(0, j, 0) == doctest::Approx(lat.coin()));
    CHECK(lat.dB(0, j, 0) == doctest::Approx(-lat.coin()));

    // junction at k=1: bit0 = W0, bit1 = W1, bit2 = B1
    const std::size_t j1 = 0b110;
    CHECK(lat.junction_to_level(1, j1) == 0b10);      // drop W1: W0 low, B1 high
    CHECK(lat.junction_to_level_next(1, j1) == 0b10); // drop B1, W bits only remain
    CHECK(lat.dW(1, j1, 0) == doctest::Approx(lat.coin()));
    CHECK(lat.dB(1, j1, 0) == doctest::Approx(lat.coin()));
}

TEST_CASE("expectations and conditional expectations") {
    TwoSidedLattice lat(1.0, 3);
    LevelField f(lat, 1, 1);
    for (std::size_t i = 0; i < lat.level_size(1); ++i) f.node(i)[0] = 2.5;
    CHECK(expectation(f)[0] == doctest::Approx(2.5));

    // a table holding the step-k W increment averages to zero under drop_w
    JunctionTable jt(lat, 1, 1);
    for (std::size_t j = 0; j < lat.junction_size(1); ++j) jt.node(j)[0] = lat.dW(1, j, 0);
    LevelField e = condexp_drop_w(jt);
    for (std::size_t i = 0; i < lat.level_size(1); ++i)
        CHECK(e.node(i)[0] == doctest::Approx(0.0));

    // E[dW * dW | F_k] = dt
    JunctionTable jt2(lat, 1, 1);
    for (std::size_t j = 0; j < lat.junction_size(1); ++j) jt2.node(j)[0] = lat.dW(1, j, 0);
    LevelField m = condexp_drop_w_weighted(jt2, 0);
    for (std::size_t i = 0; i < lat.level_size(1); ++i)
        CHECK(m.node(i)[0] == doctest::Approx(lat.dt()));

    // drop_b leaves a B-independent table unchanged
    JunctionTable jt3(lat, 1, 1);
    for (std::size_t j = 0; j < lat.junction_size(1); ++j)
        jt3.node(j)[0] = lat.dW(1, j, 0) * 3.0;
    LevelField n = condexp_drop_b(jt3);
    for (std::size_t i = 0; i < lat.level_size(2); ++i) {
        const double w1 = ((i >> 1) & 1) ? lat.coin() : -lat.coin();
        CHECK(n.node(i)[0] == doctest::Approx(3.0 * w1));
    }
}

TEST_CASE("measurability brute force") {
    TwoSidedLattice lat(1.0, 3);
    LevelField f(lat, 1, 1);
    for (std::size_t i = 0; i < lat.level_size(1); ++i)
        f.node(i)[0] = static_cast<double>(i);
    FullField emb = embed(f);
    CHECK(is_measurable_at(emb, 1));
    CHECK_FALSE(is_measurable_at(emb, 0));  // depends on the step-0 W coin

    // a field reading a future W coin is not adapted at step 1
    FullField bad(lat, 1);
    for (std::size_t o = 0; o < bad.data.size(); ++o) bad.node(o)[0] = lat.full_dW(2, o, 0);
    CHECK_FALSE(is_measurable_at(bad, 1));
    CHECK(is_measurable_at(bad, 3));
}

TEST_CASE("Ito integrals: mean zero and isometry") {
    TwoSidedLattice lat(1.0, 4);
    AdaptedField one(lat, 1, 1.0);
    auto fwd = forward_ito_integral(one);
    auto bwd = backward_ito_integral(one);
    for (int k = 0; k <= lat.N(); ++k) {
        CHECK(expectation(fwd[k])[0] == doctest::Approx(0.0));
        CHECK(expectation(bwd[k])[0] == doctest::Approx(0.0));
        double sq_f = 0.0, sq_b = 0.0;
        const std::size_t n = std::size_t{1} << lat.total_bits();
        for (std::size_t o = 0; o < n; ++o) {
            sq_f += fwd[k].node(o)[0] * fwd[k].node(o)[0];
            sq_b += bwd[k].node(o)[0] * bwd[k].node(o)[0];
        }
        CHECK(sq_f / n == doctest::Approx(lat.t(k)));          // E W_t^2 = t
        CHECK(sq_b / n == doctest::Approx(lat.T() - lat.t(k)));
    }
}

TEST_CASE("increment decomposition is exact for scalar coins") {
    TwoSidedLattice lat(1.0, 4);
    AdaptedField a(lat, 1);
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int k = 0; k <= lat.N(); ++k)
        for (auto& v : a.level[k]) v = u(rng);
    IncrementParts parts = decompose_increments(a);
    EnergyReport rep = ito_energy_check(a, parts.beta, parts.gamma, parts.delta);
    CHECK(rep.dynamics_ok);
    CHECK(rep.max_dynamics_violation <= 1e-12);
}

TEST_CASE("energy identity exact for the random walk") {
    TwoSidedLattice lat(1.0, 5);
    // alpha_k = W_{t_k}: beta = 0, gamma = 0, delta = 1
    AdaptedField a(lat, 1);
    for (int k = 0; k <= lat.N(); ++k)
        for (std::size_t i = 0; i < lat.level_size(k); ++i) {
            double w = 0.0;
            for (int j = 0; j < k; ++j) w += ((i >> j) & 1) ? lat.coin() : -lat.coin();
            a.node(k, i)[0] = w;
        }
    AdaptedField beta(lat, 1, 0.0), gamma(lat, 1, 0.0), delta(lat, 1, 1.0);
    EnergyReport rep = ito_energy_check(a, beta, gamma, delta);
    CHECK(rep.dynamics_ok);
    CHECK(rep.max_residual <= 1e-12);
}

TEST_CASE("energy check rejects inconsistent dynamics") {
    TwoSidedLattice lat(1.0, 3);
    AdaptedField a(lat, 1, 1.0);
    AdaptedField beta(lat, 1, 2.0), gamma(lat, 1, 0.0), delta(lat, 1, 0.0);
    EnergyReport rep = ito_energy_check(a, beta, gamma, delta);
    CHECK_FALSE(rep.dynamics_ok);
    CHECK(rep.max_dynamics_violation > 0.1);
}
