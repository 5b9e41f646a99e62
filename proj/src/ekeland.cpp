#include "tsfb/ekeland.hpp"

#include <cmath>
#include <random>

namespace tsfb {

namespace {

double level_rms(const std::vector<double>& a, const std::vector<double>& b, int dim,
                 std::size_t nodes) {
    double acc = 0.0;
    for (std::size_t i = 0; i < nodes * static_cast<std::size_t>(dim); ++i)
        acc += (a[i] - b[i]) * (a[i] - b[i]);
    return acc / static_cast<double>(nodes);
}

// h3 E<psi_x, xhat_N> + h2 E<h_y, yhat_0> + h1 E<phi_x, xhat_N> + h0 E<gamma_y, yhat_0>
double boundary_pairing(const ProblemSpec& spec, const FbdsdeSolution& base_sol,
                        const BoundaryWeights& w, const FbdsdeSolution& var_sol) {
    const TwoSidedLattice& lat = *base_sol.x.lat;
    const Dims& dims = spec.coeffs.dims;
    const int N = lat.N();
    const int nPsi = spec.psi.out_dim, nH = spec.h.out_dim;
    double total = 0.0;
    {
        std::vector<double> jac(nPsi * dims.n), grad(dims.n);
        double acc = 0.0;
        const std::size_t n = lat.level_size(N);
        for (std::size_t i = 0; i < n; ++i) {
            const double* xN = base_sol.x.node(N, i);
            spec.psi.jacobian(xN, jac.data());
            spec.phi.grad(xN, grad.data());
            const double* xhat = var_sol.x.node(N, i);
            for (int r = 0; r < nPsi; ++r)
                for (int c = 0; c < dims.n; ++c) acc += w.h3[r] * jac[r * dims.n + c] * xhat[c];
            for (int c = 0; c < dims.n; ++c) acc += w.h1 * grad[c] * xhat[c];
        }
        total += acc / static_cast<double>(n);
    }
    {
        std::vector<double> jac(nH * dims.k), grad(dims.k);
        double acc = 0.0;
        const std::size_t n = lat.level_size(0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* y0 = base_sol.y.node(0, i);
            spec.h.jacobian(y0, jac.data());
            spec.gamma.grad(y0, grad.data());
            const double* yhat = var_sol.y.node(0, i);
            for (int r = 0; r < nH; ++r)
                for (int c = 0; c < dims.k; ++c) acc += w.h2[r] * jac[r * dims.k + c] * yhat[c];
            for (int c = 0; c < dims.k; ++c) acc += w.h0 * grad[c] * yhat[c];
        }
        total += acc / static_cast<double>(n);
    }
    return total;
}

double mean_scalar(const ScalarMap& m, const LevelField& f) {
    const std::size_t n = f.lat->level_size(f.step);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += m.value(f.node(i));
    return acc / static_cast<double>(n);
}

}  // namespace

double metric_d(const ControlTriple& a, const ControlTriple& b) {
    if (a.xi.lat != b.xi.lat) throw ShapeError("triples live on different lattices");
    const TwoSidedLattice& lat = *a.xi.lat;
    const double xi_term =
        std::sqrt(level_rms(a.xi.data, b.xi.data, a.xi.dim, lat.level_size(0)));
    const double eta_term =
        std::sqrt(level_rms(a.eta.data, b.eta.data, a.eta.dim, lat.level_size(lat.N())));
    double u_acc = 0.0;
    for (int k = 0; k < lat.N(); ++k)
        u_acc += lat.dt() * level_rms(a.u.level[k], b.u.level[k], a.u.dim, lat.level_size(k));
    return xi_term + eta_term + std::sqrt(u_acc);
}

PenaltyReport penalty(const ControlTriple& candidate, const OptimalReference& ref,
                      const ProblemSpec& spec, double eps, const SolveOptions& opts) {
    if (!(eps > 0.0)) throw ConfigError("penalty requires eps > 0");
    const TwoSidedLattice& lat = *candidate.xi.lat;
    PenaltyReport rep;
    rep.eps = eps;
    rep.candidate = candidate;
    rep.solution = solve_fbdsde(make_state_problem(spec, candidate), opts);
    if (!rep.solution.converged) throw std::runtime_error("penalty: state solve did not converge");

    ConstraintResiduals cr = constraint_residuals(spec, rep.solution);
    rep.psi_gap = cr.psi_gap;
    rep.h_gap = cr.h_gap;
    rep.components[0] = cr.psi_residual;
    rep.components[1] = cr.h_residual;
    const double e_phi = mean_scalar(spec.phi, rep.solution.x.at(lat.N()));
    const double e_gamma = mean_scalar(spec.gamma, rep.solution.y.at(0));
    rep.components[2] = std::max(0.0, ref.e_phi - e_phi + eps);
    rep.components[3] = std::max(0.0, ref.e_gamma - e_gamma + eps);
    rep.phi_active = rep.components[2] > 0.0;
    rep.gamma_active = rep.components[3] > 0.0;
    rep.F_eps = std::sqrt(rep.components[0] * rep.components[0] +
                          rep.components[1] * rep.components[1] +
                          rep.components[2] * rep.components[2] +
                          rep.components[3] * rep.components[3]);
    return rep;
}

Multipliers extract_multipliers(const PenaltyReport& report) {
    if (!(report.F_eps > 0.0))
        throw std::runtime_error("extract_multipliers: F_eps = 0, cannot normalize");
    Multipliers m;
    m.h1 = report.phi_active ? -report.components[2] / report.F_eps : 0.0;
    m.h0 = report.gamma_active ? -report.components[3] / report.F_eps : 0.0;
    m.h3.resize(report.psi_gap.size());
    for (std::size_t i = 0; i < report.psi_gap.size(); ++i)
        m.h3[i] = report.psi_gap[i] / report.F_eps;
    m.h2.resize(report.h_gap.size());
    for (std::size_t i = 0; i < report.h_gap.size(); ++i)
        m.h2[i] = report.h_gap[i] / report.F_eps;
    return m;
}

DescentResult penalized_descent(const ProblemSpec& spec, double eps, const ControlTriple& start,
                                const OptimalReference& ref, const DescentOptions& opts) {
    if (!is_admissible(start, spec)) throw ConfigError("descent start is not admissible");
    const TwoSidedLattice& lat = *start.xi.lat;
    const Dims& dims = spec.coeffs.dims;

    DescentResult out;
    out.candidate = start;
    out.report = penalty(start, ref, spec, eps, opts.solver);
    out.history.push_back(out.report.F_eps);
    out.sqrt_2eps_ball = std::sqrt(2.0 * eps);

    const double diam = std::max({spec.K1.diameter(), spec.K2.diameter(), spec.K.diameter()});
    for (int iter = 0; iter < opts.max_iter; ++iter) {
        if (out.report.F_eps <= 0.0) {
            out.hit_zero = true;
            break;
        }
        Multipliers mult = extract_multipliers(out.report);
        FrozenCoefficients frozen =
            freeze(spec, out.report.solution, out.candidate.u, false);
        AdjointSolution adj =
            solve_adjoint(frozen, mult.weights(), spec, out.report.solution, false, opts.solver);
        AdaptedField gu = assemble_hamiltonian_u(frozen, adj);  // gradient wrt u

        double step = opts.initial_step_scale * diam;
        bool improved = false;
        while (step >= opts.min_step) {
            ControlTriple trial = out.candidate;
            std::vector<double> buf(std::max({dims.n, dims.k, dims.u_dim()}));
            for (std::size_t i = 0; i < lat.level_size(0); ++i) {
                for (int c = 0; c < dims.n; ++c)
                    buf[c] = trial.xi.node(i)[c] - step * (-adj.m.node(0, i)[c]);
                spec.K1.project(buf.data(), trial.xi.node(i));
            }
            for (std::size_t i = 0; i < lat.level_size(lat.N()); ++i) {
                for (int c = 0; c < dims.k; ++c)
                    buf[c] = trial.eta.node(i)[c] - step * adj.n.node(lat.N(), i)[c];
                spec.K2.project(buf.data(), trial.eta.node(i));
            }
            for (int k = 0; k <= lat.N(); ++k)
                for (std::size_t i = 0; i < lat.level_size(k); ++i) {
                    for (int c = 0; c < dims.u_dim(); ++c)
                        buf[c] = trial.u.node(k, i)[c] - step * gu.node(k, i)[c];
                    spec.K.project(buf.data(), trial.u.node(k, i));
                }
            PenaltyReport trial_rep = penalty(trial, ref, spec, eps, opts.solver);
            if (trial_rep.F_eps < out.report.F_eps - 1e-12) {
                out.candidate = std::move(trial);
                out.report = std::move(trial_rep);
                out.history.push_back(out.report.F_eps);
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if (!improved) {
            if (iter == 0) out.no_descent_at_start = true;
            break;
        }
    }
    out.distance_from_start = metric_d(out.candidate, start);
    return out;
}

double variational_inequality_residual(const Multipliers& mult, const ProblemSpec& spec,
                                       const ControlTriple& base, const FbdsdeSolution& base_sol,
                                       int direction_count, std::uint64_t seed,
                                       const SolveOptions& opts) {
    if (direction_count < 1) throw ConfigError("direction set must be nonempty");
    const TwoSidedLattice& lat = *base.xi.lat;
    const Dims& dims = spec.coeffs.dims;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    auto sample_point = [&](const ConvexSet& set, std::vector<double>& v) {
        const int m = set.dim();
        v.resize(m);
        if (set.kind == ConvexSet::Kind::Box) {
            for (int i = 0; i < m; ++i) v[i] = set.lo[i] + unit(rng) * (set.hi[i] - set.lo[i]);
        } else {
            std::normal_distribution<double> gauss(0.0, 1.0);
            double nrm = 0.0;
            for (int i = 0; i < m; ++i) {
                v[i] = gauss(rng);
                nrm += v[i] * v[i];
            }
            nrm = std::sqrt(std::max(nrm, 1e-300));
            const double r = set.radius * std::pow(unit(rng), 1.0 / m);
            for (int i = 0; i < m; ++i) v[i] = set.center[i] + r * v[i] / nrm;
        }
    };

    FrozenCoefficients frozen = freeze(spec, base_sol, base.u, false);
    BoundaryWeights w = mult.weights();

    double best = 1e300;
    std::vector<double> v1, v2, vu;
    for (int s = 0; s < direction_count; ++s) {
        sample_point(spec.K1, v1);
        sample_point(spec.K2, v2);
        sample_point(spec.K, vu);
        Direction dir = zero_direction(lat, dims);
        for (std::size_t i = 0; i < lat.level_size(0); ++i)
            for (int c = 0; c < dims.n; ++c)
                dir.dxi.node(i)[c] = v1[c] - base.xi.node(i)[c];
        for (std::size_t i = 0; i < lat.level_size(lat.N()); ++i)
            for (int c = 0; c < dims.k; ++c)
                dir.deta.node(i)[c] = v2[c] - base.eta.node(i)[c];
        for (int k = 0; k <= lat.N(); ++k)
            for (std::size_t i = 0; i < lat.level_size(k); ++i)
                for (int c = 0; c < dims.u_dim(); ++c)
                    dir.du.node(k, i)[c] = vu[c] - base.u.node(k, i)[c];
        FbdsdeSolution var_sol = solve_variational(frozen, dir, opts);
        best = std::min(best, boundary_pairing(spec, base_sol, w, var_sol));
    }
    return best;
}

}  // namespace tsfb
