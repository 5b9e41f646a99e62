#pragma once

#include "tsfb/control.hpp"
#include "tsfb/variation.hpp"

namespace tsfb {

// Boundary weights entering the adjoint terminal/initial conditions:
//   m_N = -(h3^T psi_x(x*_N) + h1 * phi_x(x*_N))
//   n_0 =   h2^T h_y(y*_0)   + h0 * gamma_y(y*_0)
struct BoundaryWeights {
    double h0 = 0.0;
    double h1 = 0.0;
    std::vector<double> h2;  // dim n_h
    std::vector<double> h3;  // dim n_psi
};

// Multiplier vector with the sign and normalization guarantees of the
// penalized search; constructed by the ekeland module.
struct Multipliers {
    double h0 = 0.0;  // <= 0
    double h1 = 0.0;  // <= 0
    std::vector<double> h2, h3;
    double norm() const;
    BoundaryWeights weights() const { return BoundaryWeights{h0, h1, h2, h3}; }
};

struct AdjointSolution {
    AdaptedField m;      // n
    AdaptedField p;      // n*d
    AdaptedField n;      // k
    AdaptedField delta;  // k*lB
    int iterations = 0;
    double residual = 0.0;
    bool converged = false;
    std::vector<double> history;
};

// Solves the coupled adjoint pair: m by the backward template with dt-driver
// -H_x and dB-driver H_z, n by the forward template with dt/dW drivers -H_y,
// -H_q and delta recovered as the negated dB-integrand. include_l adds the
// running-cost gradients to the drivers.
AdjointSolution solve_adjoint(const FrozenCoefficients& frozen, const BoundaryWeights& w,
                              const ProblemSpec& spec, const FbdsdeSolution& base,
                              bool include_l, const SolveOptions& opts = {});

// H = <F, m> + <G, p> + <f, n> + <g, delta> + l at one point.
double hamiltonian(const ProblemSpec& spec, double t, const double* x, const double* z,
                   const double* y, const double* q, const double* u, const double* m,
                   const double* p, const double* n, const double* delta, bool include_l);
// u-gradient of H (dim n*d).
void hamiltonian_u(const ProblemSpec& spec, double t, const double* x, const double* z,
                   const double* y, const double* q, const double* u, const double* m,
                   const double* p, const double* n, const double* delta, bool include_l,
                   double* out);

// H_u along the whole trajectory, assembled from frozen u-Jacobians.
AdaptedField assemble_hamiltonian_u(const FrozenCoefficients& frozen, const AdjointSolution& adj);

struct MpResiduals {
    double r_xi = 0.0;   // max <m_0 - chi_x, v - xi*>; optimality wants <= tol
    double r_eta = 0.0;  // min <n_N + lambda_y, v - eta*>; wants >= -tol
    double r_u = 0.0;    // min <H_u, v - u*>; wants >= -tol
    int boundary_nodes = 0;            // level-0 nodes with xi* on the K1 boundary
    double max_boundary_violation = 0.0;
    bool boundary_ok = true;
    bool pass(double tol) const {
        return r_xi <= tol && r_eta >= -tol && r_u >= -tol && boundary_ok;
    }
};
MpResiduals mp_residuals(const ProblemSpec& spec, const ControlTriple& base,
                         const FbdsdeSolution& base_sol, const AdjointSolution& adj,
                         const FrozenCoefficients& frozen, int sample_count, std::uint64_t seed,
                         double boundary_tol = 1e-6);

// Residual of the duality identity relating the variational solution, the
// adjoint solution, and the boundary-weight pairings.
double duality_gap(const ProblemSpec& spec, const FbdsdeSolution& base_sol,
                   const FrozenCoefficients& frozen, const BoundaryWeights& w,
                   const AdjointSolution& adj, const Direction& dir,
                   const FbdsdeSolution& var_sol);

}  // namespace tsfb
