#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>

#include "tsfb/adjoint.hpp"
#include "tsfb/control.hpp"
#include "tsfb/ekeland.hpp"

namespace tsfb {

// ---------------------------------------------------------------------------
// Classical formulation: a forward equation for y controlled through its
// diffusion, coupled with a doubly stochastic forward equation for x.
//   dy = bbar(t, y, u) dt + sigma(t, y, u) dW,      y(0) = b
//   dx = -fbar(t, x, z, y, u) dt - gbar(.) dW + z dB,  x(0) = xi
// sigma must be affine in u: sigma = Sigma(t, y) u + sigma0(t, y).
struct ClassicalSpec {
    Dims dims;  // n = dim x, k = dim y; control dim is k*d (shape of sigma)
    std::function<void(double, const double*, const double*, double*)> bbar;  // (t,y,u) -> k
    std::function<void(double, const double*, double*)> Sigma;   // (t,y) -> (k*d)x(k*d)
    std::function<void(double, const double*, double*)> sigma0;  // (t,y) -> k*d
    // (t, x, z, y, u) -> n and n*d
    std::function<void(double, const double*, const double*, const double*, const double*,
                       double*)> fbar, gbar;
    std::function<double(double, const double*, const double*, const double*, const double*)>
        lbar;  // running cost
    ScalarMap chi;     // of xi
    ScalarMap lambda;  // of y_T
    ScalarMap phi;     // of x_T
    std::vector<double> b;  // initial y
    ConvexSet K1, K2;
    double bijection_margin = 0.0;  // declared (H4) margin for Sigma
};

// u with sigma(t, y, u) = q; exact for the affine family, errors on singular
// Sigma.
std::vector<double> sigma_invert(const ClassicalSpec& spec, double t, const double* y,
                                 const double* q);

// ProblemSpec over (xi, eta) in which q plays the role of the control and the
// y(0) = b requirement is carried by the constraint map h(y_0) = y_0 with
// target b. Coefficient partials are supplied by central finite differences.
ProblemSpec to_backward_formulation(const ClassicalSpec& spec);

// Forward Euler for y plus the doubly stochastic sweep for x under an
// explicit control; used to cross-check the reformulation.
struct ClassicalSolution {
    AdaptedField y;  // k
    AdaptedField x;  // n
    AdaptedField z;  // n*lB
    double cost = 0.0;
};
ClassicalSolution solve_classical(const ClassicalSpec& spec, const TwoSidedLattice& lat,
                                  const LevelField& xi, const AdaptedField& u);

// Max nodewise |y_0 - b| of a reformulated solution (the initial condition is
// an identity, not an expectation).
double pathwise_initial_residual(const ClassicalSpec& spec, const FbdsdeSolution& sol);

// ---------------------------------------------------------------------------
// Specialized adjoints for the two application families.
enum class ApplicationKind { ClassicalReformulated, BdsdeOnly };

struct ApplicationAdjointReport {
    AdjointSolution adjoint;
    double m_block_norm = 0.0;  // sup |(m, p)|; zero for the BDSDE-only family
    MpResiduals residuals;
};
ApplicationAdjointReport solve_application_adjoints(ApplicationKind kind,
                                                    const ProblemSpec& spec,
                                                    const ControlTriple& base,
                                                    const FbdsdeSolution& base_sol,
                                                    const BoundaryWeights& weights,
                                                    int sample_count, std::uint64_t seed,
                                                    const SolveOptions& opts = {});

// ---------------------------------------------------------------------------
// Linear-quadratic problem: linear dynamics in (x, z, y, q, u), quadratic
// cost
//   J = E[ int 1/2 (<Wx x,x> + <Wz z,z> + <Wy y,y> + <Wq q,q> + <Wu u,u>) dt
//          + 1/2 <U x_T, x_T> + 1/2 <Q y_0, y_0> ]
// with deterministic initial x and terminal y.
struct LqSpec {
    Dims dims;
    using MatFn = std::function<Eigen::MatrixXd(double)>;
    // coefficient matrices of F (n rows), G (n*d rows), f (k rows), g (k*lB
    // rows) with respect to x, z, y, q, u (flattened row-major state slots)
    std::array<MatFn, 5> Fc, Gc, fc, gc;
    std::array<MatFn, 5> W;  // running-cost weights on x, z, y, q, u
    Eigen::MatrixXd U, Q;
    Eigen::VectorXd x0, yT;
    ConvexSet K;  // control set used by the verification sampler
};

// Checks symmetry, positive definiteness of Wu/U/Q and nonnegativity of the
// state weights; throws ConfigError on violation.
void validate_lq(const LqSpec& spec, int time_samples = 5);

ProblemSpec lq_problem_spec(const LqSpec& spec);
ControlTriple lq_base_triple(const LqSpec& spec, const TwoSidedLattice& lat,
                             const AdaptedField& u);

// u = s * Wu(t)^{-1} (Fu^T m + Gu^T p + fu^T n + gu^T delta); s = -1 is the
// root of H_u = 0.
AdaptedField lq_optimal_control(const AdjointSolution& adj, const LqSpec& spec,
                                const TwoSidedLattice& lat, int sign);

struct LqResult {
    FbdsdeSolution state;
    AdjointSolution costate;
    AdaptedField u;
    double cost = 0.0;
    double stationarity = 0.0;  // sup ||H_u(u*)||
    int sign = -1;              // adjudicated sign convention
    int iterations = 0;
    bool converged = false;
};
// Damped fixed point on (state -> costate -> control); both sign conventions
// are evaluated and the one with smaller cost is returned.
LqResult lq_solve(const LqSpec& spec, const TwoSidedLattice& lat, const SolveOptions& opts = {},
                  int force_sign = 0, const AdaptedField* start_u = nullptr);

struct LqVerifyReport {
    double sufficiency_margin = 0.0;  // min sampled J(v) - J(u*)
    double uniqueness_distance = 0.0; // metric between u* from two starts
    double grid_best_cost = 0.0;      // min over constant-control grid
};
LqVerifyReport lq_verify(const LqSpec& spec, const TwoSidedLattice& lat, const LqResult& result,
                         int sample_count, std::uint64_t seed, const SolveOptions& opts = {});

double lq_cost(const LqSpec& spec, const TwoSidedLattice& lat, const AdaptedField& u,
               const SolveOptions& opts = {});

// ---------------------------------------------------------------------------
// Least-squares fit J_N = Jinf + c * dt^p over a grid of orders.
struct PowerFit {
    double Jinf = 0.0, c = 0.0, p = 0.0, rss = 0.0;
};
PowerFit power_fit(const std::vector<double>& dts, const std::vector<double>& values);

// Scalar example with bilinear drivers, indefinite running cost and the
// control box [-1, 1]; the zero triple solves it exactly.
ProblemSpec worked_example_spec();

// Structured report for the worked example (state/costate exactness at the
// zero control, cost refinement tables for u = 1 and u = t).
struct PaperExampleReport {
    int steps = 8;
    double cost_at_zero = 0.0;
    double state_sup_at_zero = 0.0;
    double costate_sup_at_zero = 0.0;
    double hu_sup_at_zero = 0.0;
    std::vector<int> refinement_steps;
    std::vector<double> cost_u_one;   // J(u == 1) per N
    std::vector<double> cost_u_ramp;  // J(u(t) = t) per N
    PowerFit fit_u_one, fit_u_ramp;
};
PaperExampleReport paper_example(int steps = 8,
                                 std::vector<int> refinement = {4, 6, 8, 10, 12, 14},
                                 const SolveOptions& opts = {});

}  // namespace tsfb
