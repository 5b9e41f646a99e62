#pragma once

#include <functional>

#include "tsfb/lattice.hpp"
#include "tsfb/sweep.hpp"

namespace tsfb {

// Lipschitz regime a spec claims for its drivers: a standalone equation only
// needs alpha < 1, the coupled system needs alpha < 1/2.
enum class LipschitzRegime { Single, Coupled };

// Terminal-value equation y_t = eta + int f ds + int g dB - int q dW.
struct BdsdeSpec {
    int dim = 1;  // k
    LevelField terminal;  // at step N, W-only dependence
    // (t, y (k), q (k*d)) -> f (k)
    std::function<void(double, const double*, const double*, double*)> f;
    // (t, y, q) -> g (k*lB)
    std::function<void(double, const double*, const double*, double*)> g;
    double lipschitz_C = 0.0;
    double lipschitz_alpha = 0.0;
    LipschitzRegime regime = LipschitzRegime::Single;
};

struct BdsdeSolution {
    AdaptedField y;  // k
    AdaptedField q;  // k*d
};

BdsdeSolution solve_bdsde(const BdsdeSpec& spec, const TwoSidedLattice& lat);

// Max one-step recursion violation of fixed (y, q) fields under the spec's
// drivers; the q_N convention is excluded.
double bdsde_residual(const AdaptedField& y, const AdaptedField& q, const BdsdeSpec& spec);

}  // namespace tsfb
