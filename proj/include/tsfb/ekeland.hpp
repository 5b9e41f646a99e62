#pragma once

#include "tsfb/adjoint.hpp"
#include "tsfb/control.hpp"
#include "tsfb/variation.hpp"

namespace tsfb {

// d = (E|xi1-xi2|^2)^1/2 + (E|eta1-eta2|^2)^1/2 + (E sum ||u1-u2||^2 dt)^1/2
double metric_d(const ControlTriple& a, const ControlTriple& b);

struct PenaltyReport {
    double F_eps = 0.0;
    // components: |E psi - a|, |E h - b|, max(0, E[phi*-phi]+eps), max(0, E[gamma*-gamma]+eps)
    std::array<double, 4> components{};
    std::vector<double> psi_gap, h_gap;  // signed expectation gaps
    bool phi_active = false, gamma_active = false;
    double eps = 0.0;
    ControlTriple candidate;
    FbdsdeSolution solution;  // state solve at the candidate
};

// Reference values E[phi(x*_N)] and E[gamma(y*_0)] at the incumbent optimum.
struct OptimalReference {
    double e_phi = 0.0;
    double e_gamma = 0.0;
};

PenaltyReport penalty(const ControlTriple& candidate, const OptimalReference& ref,
                      const ProblemSpec& spec, double eps, const SolveOptions& opts = {});

// Multiplier formulas at a near-minimizer: h3 = (E psi - a)/F_eps,
// h2 = (E h - b)/F_eps, h1 = -c_phi/F_eps, h0 = -c_gamma/F_eps, with inactive
// hinge components zeroed. Unit norm follows from the definition of F_eps.
Multipliers extract_multipliers(const PenaltyReport& report);

struct DescentOptions {
    int max_iter = 30;
    double initial_step_scale = 0.1;  // times the K-set diameter
    double min_step = 1e-6;
    SolveOptions solver;
};

struct DescentResult {
    ControlTriple candidate;
    PenaltyReport report;            // at the returned candidate
    std::vector<double> history;     // F_eps per accepted iterate (non-increasing)
    double distance_from_start = 0.0;
    double sqrt_2eps_ball = 0.0;     // diagnostic radius from the abstract principle
    bool no_descent_at_start = false;
    bool hit_zero = false;           // F_eps reached 0 (cannot normalize further)
};

// Projected backtracking descent on F_eps against the given optimal reference
// values; gradients are assembled from one adjoint solve with the extracted
// multipliers as boundary weights.
DescentResult penalized_descent(const ProblemSpec& spec, double eps, const ControlTriple& start,
                                const OptimalReference& ref, const DescentOptions& opts = {});

// Min over sampled admissible directions of
// h3 E<psi_x, xhat_N> + h2 E<h_y, yhat_0> + h1 E<phi_x, xhat_N> + h0 E<gamma_y, yhat_0>.
double variational_inequality_residual(const Multipliers& mult, const ProblemSpec& spec,
                                       const ControlTriple& base, const FbdsdeSolution& base_sol,
                                       int direction_count, std::uint64_t seed,
                                       const SolveOptions& opts = {});

}  // namespace tsfb
