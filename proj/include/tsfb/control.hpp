#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "tsfb/fbdsde.hpp"
#include "tsfb/lattice.hpp"

namespace tsfb {

// Box or Euclidean-ball constraint set.
struct ConvexSet {
    enum class Kind { Box, Ball };
    Kind kind = Kind::Box;
    std::vector<double> lo, hi;   // box bounds
    std::vector<double> center;   // ball center
    double radius = 0.0;

    static ConvexSet box(std::vector<double> lo, std::vector<double> hi);
    static ConvexSet ball(std::vector<double> center, double radius);
    static ConvexSet point(std::vector<double> value);  // degenerate box
    static ConvexSet scalar_box(double lo, double hi) { return box({lo}, {hi}); }

    int dim() const;
    void project(const double* p, double* out) const;
    bool contains(const double* p, double tol = 1e-12) const;
    bool on_boundary(const double* p, double tol = 1e-9) const;
    double diameter() const;
};

// Scalar cost piece with gradient: v(point), grad(point, out).
struct ScalarMap {
    std::function<double(const double*)> value;
    std::function<void(const double*, double*)> grad;
    static ScalarMap zero(int dim);
};

// Vector constraint map with Jacobian (out_dim x in_dim, row-major).
struct VectorMap {
    int out_dim = 1;
    std::function<void(const double*, double*)> value;
    std::function<void(const double*, double*)> jacobian;
    static VectorMap identity(int dim);
};

struct ProblemSpec {
    CoefficientSet coeffs;
    Coeff l;                      // running cost, out dim 1
    std::array<Coeff, 5> dl;      // l-partials by Var
    bool has_l = false;
    ScalarMap chi;      // of xi (R^n)
    ScalarMap lambda;   // of eta (R^k)
    ScalarMap phi;      // of x_N (R^n)
    ScalarMap gamma;    // of y_0 (R^k)
    VectorMap psi;      // of x_N -> R^{n_psi}
    VectorMap h;        // of y_0 -> R^{n_h}
    std::vector<double> a, b;     // targets for E psi(x_N), E h(y_0)
    ConvexSet K1, K2, K;          // admissible sets for xi, eta, u
};

ProblemSpec make_problem_shell(const Dims& dims);  // zero cost pieces, unit boxes

struct ControlTriple {
    LevelField xi;   // step 0, dim n
    LevelField eta;  // step N, dim k
    AdaptedField u;  // dim n*d
};

// Nodewise admissibility check against K1 / K2 / K.
bool is_admissible(const ControlTriple& triple, const ProblemSpec& spec, double tol = 1e-9);

FbdsdeProblem make_state_problem(const ProblemSpec& spec, const ControlTriple& triple);

// J = E[ sum_k l(x_k, z_k, y_k, q_k, u_k, t_k) dt + chi + lambda + phi + gamma ]
// with left-endpoint quadrature.
double evaluate_cost(const ControlTriple& triple, const ProblemSpec& spec,
                     const FbdsdeSolution& sol);

struct ConstraintResiduals {
    double psi_residual = 0.0;  // |E psi(x_N) - a|
    double h_residual = 0.0;    // |E h(y_0) - b|
    std::vector<double> psi_gap, h_gap;  // signed expectation gaps
    bool feasible(double tol = 1e-8) const {
        return psi_residual <= tol && h_residual <= tol;
    }
};
ConstraintResiduals constraint_residuals(const ProblemSpec& spec, const FbdsdeSolution& sol);

// Uniform controls built from a time function (constant across nodes).
AdaptedField control_from_time_function(const TwoSidedLattice& lat, int dim,
                                        const std::function<void(double, double*)>& fn);
AdaptedField constant_control(const TwoSidedLattice& lat, int dim, double value);

}  // namespace tsfb
