#pragma once

#include <functional>

#include "tsfb/lattice.hpp"

namespace tsfb {

// One-step recursion engines.
//
// Backward template (terminal condition at step N, state dim sk):
//   Y = y_{k+1} + f(t_{k+1}, .) dt + g(t_{k+1}, .) dB_k
//   y_k = E[Y | F_k],  q_k = E[Y dW_k | F_k] / dt
// The driver is evaluated once per step-(k+1) node; it receives the current
// (y, q) values at that node. q at step N is not fixed by the recursion; it
// is set to E[q_{N-1} | F_N] via a small fixed-point loop at the last step so
// that drivers reading q at t_N see a consistent value.
//
// Forward template (initial condition at step 0, state dim sn):
//   X = x_k - F(t_k, .) dt - G(t_k, .) dW_k
//   x_{k+1} = E[X | F_{k+1}],  z_{k+1} = -E[X dB_k | F_{k+1}] / dt
// z at step 0 is set to E[z_1 | F_0] by the mirrored fixed-point loop.

// (kNext, node at level kNext, y (sk), q (sk*d)) -> f (sk), g (sk*lB)
using BackwardDriver =
    std::function<void(int, std::size_t, const double*, const double*, double*, double*)>;
// (k, node at level k, x (sn), z (sn*lB)) -> F (sn), G (sn*d)
using ForwardDriver =
    std::function<void(int, std::size_t, const double*, const double*, double*, double*)>;

struct BackwardSweepResult {
    AdaptedField y;  // dim sk
    AdaptedField q;  // dim sk * d
    int boundary_iterations = 0;
    bool boundary_converged = true;
};

struct ForwardSweepResult {
    AdaptedField x;  // dim sn
    AdaptedField z;  // dim sn * lB
    int boundary_iterations = 0;
    bool boundary_converged = true;
};

BackwardSweepResult backward_sweep(const TwoSidedLattice& lat, int sk,
                                   const LevelField& terminal, const BackwardDriver& drv);
ForwardSweepResult forward_sweep(const TwoSidedLattice& lat, int sn,
                                 const LevelField& initial, const ForwardDriver& drv);

// Max nodewise violation of the recursions given fixed fields (boundary
// conventions excluded).
double backward_recursion_residual(const AdaptedField& y, const AdaptedField& q,
                                   const BackwardDriver& drv);
double forward_recursion_residual(const AdaptedField& x, const AdaptedField& z,
                                  const ForwardDriver& drv);

// Damped Picard coupling of the two templates. The forward driver closes over
// the current backward pair through the extra (y_k, q_k) arguments and vice
// versa, so drivers do not capture iterate storage themselves.
//
// forward: (k, node, x, z, y_at_node, q_at_node) -> F, G
// backward: (kNext, node, y, q, x_at_node, z_at_node) -> f, g
using CoupledForwardDriver = std::function<void(int, std::size_t, const double*, const double*,
                                                const double*, const double*, double*, double*)>;
using CoupledBackwardDriver = std::function<void(int, std::size_t, const double*, const double*,
                                                 const double*, const double*, double*, double*)>;

struct CoupledSolution {
    AdaptedField x, z;  // forward pair, dims sn / sn*lB
    AdaptedField y, q;  // backward pair, dims sk / sk*d
    int iterations = 0;
    double residual = 0.0;
    bool converged = false;
    std::vector<double> history;  // sup-norm change per Picard iteration
    double theta_used = 1.0;
};

struct PicardOptions {
    double theta = 1.0;
    double tol = 1e-12;
    int max_iter = 200;
    bool backward_first = false;
};

CoupledSolution solve_coupled(const TwoSidedLattice& lat, int sn, int sk,
                              const LevelField& initial, const LevelField& terminal,
                              const CoupledForwardDriver& fdrv, const CoupledBackwardDriver& bdrv,
                              const PicardOptions& opts);

}  // namespace tsfb
