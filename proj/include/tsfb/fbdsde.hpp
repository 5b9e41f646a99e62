#pragma once

#include <array>
#include <functional>
#include <vector>

#include "tsfb/lattice.hpp"
#include "tsfb/sweep.hpp"

namespace tsfb {

struct Dims {
    int n = 1;   // forward state x
    int k = 1;   // backward state y
    int d = 1;   // forward driver W
    int lB = 1;  // backward driver B

    int x_dim() const { return n; }
    int z_dim() const { return n * lB; }
    int y_dim() const { return k; }
    int q_dim() const { return k * d; }
    int u_dim() const { return n * d; }
    int state_dim() const { return x_dim() + z_dim() + y_dim() + q_dim(); }
};

// Coefficient callable: (t, x, z, y, q, u) -> out. Matrix-valued slots (z, q,
// u, G, g and all Jacobians) are flattened row-major.
using Coeff = std::function<void(double, const double*, const double*, const double*,
                                 const double*, const double*, double*)>;

enum class Var { x = 0, z = 1, y = 2, q = 3, u = 4 };

// System coefficients of the coupled pair
//   dx = -F dt - G dW + z dB   (x(0) given)
//   dy = -f dt - g dB + q dW   (y(T) given)
// plus one Jacobian callable per (coefficient, variable).
struct CoefficientSet {
    Dims dims;
    Coeff F;  // out n
    Coeff G;  // out n*d
    Coeff f;  // out k
    Coeff g;  // out k*lB
    std::array<Coeff, 5> dF, dG, df, dg;  // indexed by Var; out = outdim x vardim
    bool has_partials = false;
};

int var_dim(const Dims& dims, Var v);

// Max deviation between declared Jacobians and central finite differences of
// the primitives over sampled points in [-1,1] (t in [0, t_max]).
double validate_partials(const CoefficientSet& coeffs, int samples, std::uint64_t seed,
                         double t_max = 1.0);

struct FbdsdeProblem {
    CoefficientSet coeffs;
    LevelField xi;    // step 0, dim n
    LevelField eta;   // step N, dim k
    AdaptedField u;   // dim n*d, levels 0..N (level k is read at t_k)
};

struct FbdsdeSolution {
    AdaptedField x, z, y, q;
    int iterations = 0;
    double residual = 0.0;
    bool converged = false;
    std::vector<double> history;
    double theta_used = 1.0;
};

struct SolveOptions {
    double theta = 1.0;
    double tol = 1e-12;
    int max_iter = 200;
};

FbdsdeSolution solve_fbdsde(const FbdsdeProblem& problem, const SolveOptions& opts = {});

// A posteriori recursion residuals of a solution under the problem's
// coefficients (boundary conventions excluded).
double fbdsde_backward_residual(const FbdsdeProblem& problem, const FbdsdeSolution& sol);
double fbdsde_forward_residual(const FbdsdeProblem& problem, const FbdsdeSolution& sol);

// Monotonicity estimate for A(t, zeta) = (-F, -G, -f, -g): over sampled pairs
// computes r = <A(z1) - A(z2), z1 - z2> / |z1 - z2|^2 and returns -max r.
// Certified when the estimate is positive. Requires d == lB so that the G/z
// and g/q pairings are well typed.
struct MonotonicityReport {
    double mu_hat = 0.0;
    bool certified = false;
};
MonotonicityReport certify_monotonicity(const CoefficientSet& coeffs, const double* u,
                                        int sample_count, std::uint64_t seed, double t_max = 1.0);

// Sampled Lipschitz constants: C_hat from pairs varying (x, y) only, and the
// squared (z, q) gain alpha_hat of (G, g) from pairs varying (z, q) only.
// Certified (coupled regime) when alpha_hat < 1/2.
struct LipschitzReport {
    double C_hat = 0.0;
    double alpha_hat = 0.0;
    bool certified = false;
};
LipschitzReport certify_lipschitz(const CoefficientSet& coeffs, const double* u, int sample_count,
                                  std::uint64_t seed, double t_max = 1.0);

}  // namespace tsfb
