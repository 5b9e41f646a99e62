#pragma once

#include "tsfb/control.hpp"
#include "tsfb/fbdsde.hpp"

namespace tsfb {

// Coefficient and running-cost Jacobians evaluated along a base trajectory,
// one table per level. Jacobians are row-major (out_dim x var_dim) per node.
struct FrozenCoefficients {
    const TwoSidedLattice* lat = nullptr;
    Dims dims;
    std::array<AdaptedField, 5> dF, dG, df, dg;  // indexed by Var
    std::array<AdaptedField, 5> dl;              // gradients of the running cost
    bool has_l = false;
};

FrozenCoefficients freeze(const ProblemSpec& spec, const FbdsdeSolution& base,
                          const AdaptedField& u, bool with_l);

struct Direction {
    LevelField dxi;   // step 0, dim n
    LevelField deta;  // step N, dim k
    AdaptedField du;  // dim n*d
};

Direction zero_direction(const TwoSidedLattice& lat, const Dims& dims);
Direction scale_direction(const Direction& dir, double rho);
ControlTriple shift_triple(const ControlTriple& base, const Direction& dir, double rho);
Direction triple_difference(const ControlTriple& to, const ControlTriple& from);

// Linearized state system along the frozen trajectory in the given direction.
FbdsdeSolution solve_variational(const FrozenCoefficients& frozen, const Direction& dir,
                                 const SolveOptions& opts = {});

// Difference-quotient diagnostics: for each rho, the perturbed system is
// solved at base + rho * dir and compared against the variational prediction.
struct QuotientGap {
    double rho = 0.0;
    double x_gap = 0.0;  // sup_k E |x_tilde(k)|^2
    double z_gap = 0.0;  // E sum ||z_tilde||^2 dt
    double y_gap = 0.0;  // sup_k E |y_tilde(k)|^2
    double q_gap = 0.0;  // E sum ||q_tilde||^2 dt
};
std::vector<QuotientGap> difference_quotient_gap(const ProblemSpec& spec,
                                                 const ControlTriple& base,
                                                 const Direction& dir,
                                                 const std::vector<double>& rhos,
                                                 const SolveOptions& opts = {});

// First derivative of the cost along the direction, via the variational
// solution.
double directional_cost_derivative(const ProblemSpec& spec, const ControlTriple& base,
                                   const FbdsdeSolution& base_sol,
                                   const FrozenCoefficients& frozen, const Direction& dir,
                                   const FbdsdeSolution& var_sol);
double directional_cost_derivative(const ProblemSpec& spec, const ControlTriple& base,
                                   const Direction& dir, const SolveOptions& opts = {});

}  // namespace tsfb
