#include "tsfb/variation.hpp"

#include <cmath>

namespace tsfb {

namespace {

// out += J * v with row-major J (rows x cols)
inline void gemv_add(const double* J, const double* v, int rows, int cols, double* out) {
    for (int r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (int c = 0; c < cols; ++c) acc += J[r * cols + c] * v[c];
        out[r] += acc;
    }
}

}  // namespace

FrozenCoefficients freeze(const ProblemSpec& spec, const FbdsdeSolution& base,
                          const AdaptedField& u, bool with_l) {
    const TwoSidedLattice& lat = *base.x.lat;
    const Dims& dims = spec.coeffs.dims;
    if (!spec.coeffs.has_partials) throw ConfigError("coefficient set declares no partials");
    FrozenCoefficients fr;
    fr.lat = &lat;
    fr.dims = dims;
    fr.has_l = with_l;
    const int nF = dims.x_dim(), nG = dims.n * dims.d, nf = dims.y_dim(), ng = dims.k * dims.lB;
    for (Var v : {Var::x, Var::z, Var::y, Var::q, Var::u}) {
        const int vi = static_cast<int>(v);
        const int vd = var_dim(dims, v);
        fr.dF[vi] = AdaptedField(lat, nF * vd);
        fr.dG[vi] = AdaptedField(lat, nG * vd);
        fr.df[vi] = AdaptedField(lat, nf * vd);
        fr.dg[vi] = AdaptedField(lat, ng * vd);
        if (with_l) fr.dl[vi] = AdaptedField(lat, vd);
    }
    for (int k = 0; k <= lat.N(); ++k) {
        const double t = lat.t(k);
        const std::size_t n = lat.level_size(k);
        for (std::size_t i = 0; i < n; ++i) {
            const double* x = base.x.node(k, i);
            const double* z = base.z.node(k, i);
            const double* y = base.y.node(k, i);
            const double* q = base.q.node(k, i);
            const double* uv = u.node(k, i);
            for (int vi = 0; vi < 5; ++vi) {
                spec.coeffs.dF[vi](t, x, z, y, q, uv, fr.dF[vi].node(k, i));
                spec.coeffs.dG[vi](t, x, z, y, q, uv, fr.dG[vi].node(k, i));
                spec.coeffs.df[vi](t, x, z, y, q, uv, fr.df[vi].node(k, i));
                spec.coeffs.dg[vi](t, x, z, y, q, uv, fr.dg[vi].node(k, i));
                if (with_l) spec.dl[vi](t, x, z, y, q, uv, fr.dl[vi].node(k, i));
            }
        }
    }
    return fr;
}

Direction zero_direction(const TwoSidedLattice& lat, const Dims& dims) {
    return Direction{LevelField(lat, 0, dims.n), LevelField(lat, lat.N(), dims.k),
                     AdaptedField(lat, dims.u_dim())};
}

Direction scale_direction(const Direction& dir, double rho) {
    Direction out = dir;
    for (double& v : out.dxi.data) v *= rho;
    for (double& v : out.deta.data) v *= rho;
    for (auto& lvl : out.du.level)
        for (double& v : lvl) v *= rho;
    return out;
}

ControlTriple shift_triple(const ControlTriple& base, const Direction& dir, double rho) {
    ControlTriple out = base;
    for (std::size_t i = 0; i < out.xi.data.size(); ++i) out.xi.data[i] += rho * dir.dxi.data[i];
    for (std::size_t i = 0; i < out.eta.data.size(); ++i)
        out.eta.data[i] += rho * dir.deta.data[i];
    for (std::size_t k = 0; k < out.u.level.size(); ++k)
        for (std::size_t i = 0; i < out.u.level[k].size(); ++i)
            out.u.level[k][i] += rho * dir.du.level[k][i];
    return out;
}

Direction triple_difference(const ControlTriple& to, const ControlTriple& from) {
    Direction d{to.xi, to.eta, to.u};
    for (std::size_t i = 0; i < d.dxi.data.size(); ++i) d.dxi.data[i] -= from.xi.data[i];
    for (std::size_t i = 0; i < d.deta.data.size(); ++i) d.deta.data[i] -= from.eta.data[i];
    for (std::size_t k = 0; k < d.du.level.size(); ++k)
        for (std::size_t i = 0; i < d.du.level[k].size(); ++i)
            d.du.level[k][i] -= from.u.level[k][i];
    return d;
}

FbdsdeSolution solve_variational(const FrozenCoefficients& frozen, const Direction& dir,
                                 const SolveOptions& opts) {
    const TwoSidedLattice& lat = *frozen.lat;
    const Dims& dims = frozen.dims;
    const int n = dims.x_dim(), zd = dims.z_dim(), kd = dims.y_dim(), qd = dims.q_dim(),
              ud = dims.u_dim();
    const int nG = dims.n * dims.d, ng = dims.k * dims.lB;

    CoupledForwardDriver fdrv = [&, n, zd, kd, qd, ud, nG](int k, std::size_t i, const double* xh,
                                                           const double* zh, const double* yh,
                                                           const double* qh, double* F,
                                                           double* G) {
        std::fill(F, F + n, 0.0);
        std::fill(G, G + nG, 0.0);
        const double* uh = dir.du.node(k, i);
        gemv_add(frozen.dF[0].node(k, i), xh, n, n, F);
        gemv_add(frozen.dF[1].node(k, i), zh, n, zd, F);
        gemv_add(frozen.dF[2].node(k, i), yh, n, kd, F);
        gemv_add(frozen.dF[3].node(k, i), qh, n, qd, F);
        gemv_add(frozen.dF[4].node(k, i), uh, n, ud, F);
        gemv_add(frozen.dG[0].node(k, i), xh, nG, n, G);
        gemv_add(frozen.dG[1].node(k, i), zh, nG, zd, G);
        gemv_add(frozen.dG[2].node(k, i), yh, nG, kd, G);
        gemv_add(frozen.dG[3].node(k, i), qh, nG, qd, G);
        gemv_add(frozen.dG[4].node(k, i), uh, nG, ud, G);
    };
    CoupledBackwardDriver bdrv = [&, n, zd, kd, qd, ud, ng](int kn, std::size_t i,
                                                            const double* yh, const double* qh,
                                                            const double* xh, const double* zh,
                                                            double* f, double* g) {
        std::fill(f, f + kd, 0.0);
        std::fill(g, g + ng, 0.0);
        const double* uh = dir.du.node(kn, i);
        gemv_add(frozen.df[0].node(kn, i), xh, kd, n, f);
        gemv_add(frozen.df[1].node(kn, i), zh, kd, zd, f);
        gemv_add(frozen.df[2].node(kn, i), yh, kd, kd, f);
        gemv_add(frozen.df[3].node(kn, i), qh, kd, qd, f);
        gemv_add(frozen.df[4].node(kn, i), uh, kd, ud, f);
        gemv_add(frozen.dg[0].node(kn, i), xh, ng, n, g);
        gemv_add(frozen.dg[1].node(kn, i), zh, ng, zd, g);
        gemv_add(frozen.dg[2].node(kn, i), yh, ng, kd, g);
        gemv_add(frozen.dg[3].node(kn, i), qh, ng, qd, g);
        gemv_add(frozen.dg[4].node(kn, i), uh, ng, ud, g);
    };

    PicardOptions popts;
    popts.theta = opts.theta;
    popts.tol = opts.tol;
    popts.max_iter = opts.max_iter;
    CoupledSolution cs =
        solve_coupled(lat, dims.n, dims.k, dir.dxi, dir.deta, fdrv, bdrv, popts);
    if (!cs.converged)
        throw std::runtime_error("variational solve did not converge (linear system)");

    FbdsdeSolution sol;
    sol.x = std::move(cs.x);
    sol.z = std::move(cs.z);
    sol.y = std::move(cs.y);
    sol.q = std::move(cs.q);
    sol.iterations = cs.iterations;
    sol.residual = cs.residual;
    sol.converged = cs.converged;
    sol.history = std::move(cs.history);
    sol.theta_used = cs.theta_used;
    return sol;
}

std::vector<QuotientGap> difference_quotient_gap(const ProblemSpec& spec,
                                                 const ControlTriple& base, const Direction& dir,
                                                 const std::vector<double>& rhos,
                                                 const SolveOptions& opts) {
    const TwoSidedLattice& lat = *base.xi.lat;
    for (double rho : rhos)
        if (!(rho > 0.0 && rho <= 1.0)) throw ConfigError("rho values must lie in (0, 1]");

    FbdsdeSolution base_sol = solve_fbdsde(make_state_problem(spec, base), opts);
    if (!base_sol.converged) throw std::runtime_error("base solve did not converge");
    FrozenCoefficients frozen = freeze(spec, base_sol, base.u, false);
    FbdsdeSolution hat = solve_variational(frozen, dir, opts);

    auto sup_mean_sq = [&](const AdaptedField& a, const AdaptedField& b, double rho,
                           const AdaptedField& h) {
        double worst = 0.0;
        for (int k = 0; k <= lat.N(); ++k) {
            double acc = 0.0;
            const std::size_t n = lat.level_size(k);
            for (std::size_t i = 0; i < n * static_cast<std::size_t>(a.dim); ++i) {
                const double v = (a.level[k][i] - b.level[k][i]) / rho - h.level[k][i];
                acc += v * v;
            }
            worst = std::max(worst, acc / static_cast<double>(n));
        }
        return worst;
    };
    auto sum_mean_sq_dt = [&](const AdaptedField& a, const AdaptedField& b, double rho,
                              const AdaptedField& h) {
        double total = 0.0;
        for (int k = 0; k <= lat.N(); ++k) {
            double acc = 0.0;
            const std::size_t n = lat.level_size(k);
            for (std::size_t i = 0; i < n * static_cast<std::size_t>(a.dim); ++i) {
                const double v = (a.level[k][i] - b.level[k][i]) / rho - h.level[k][i];
                acc += v * v;
            }
            total += lat.dt() * acc / static_cast<double>(n);
        }
        return total;
    };

    std::vector<QuotientGap> out;
    for (double rho : rhos) {
        ControlTriple shifted = shift_triple(base, dir, rho);
        FbdsdeSolution pert = solve_fbdsde(make_state_problem(spec, shifted), opts);
        if (!pert.converged) throw std::runtime_error("perturbed solve did not converge");
        QuotientGap gap;
        gap.rho = rho;
        gap.x_gap = sup_mean_sq(pert.x, base_sol.x, rho, hat.x);
        gap.z_gap = sum_mean_sq_dt(pert.z, base_sol.z, rho, hat.z);
        gap.y_gap = sup_mean_sq(pert.y, base_sol.y, rho, hat.y);
        gap.q_gap = sum_mean_sq_dt(pert.q, base_sol.q, rho, hat.q);
        out.push_back(gap);
    }
    return out;
}

double directional_cost_derivative(const ProblemSpec& spec, const ControlTriple& base,
                                   const FbdsdeSolution& base_sol,
                                   const FrozenCoefficients& frozen, const Direction& dir,
                                   const FbdsdeSolution& var_sol) {
    const TwoSidedLattice& lat = *base.xi.lat;
    const Dims& dims = spec.coeffs.dims;
    const double dt = lat.dt();
    double dJ = 0.0;
    if (spec.has_l) {
        if (!frozen.has_l) throw ConfigError("frozen coefficients lack running-cost gradients");
        for (int k = 0; k < lat.N(); ++k) {
            const std::size_t n = lat.level_size(k);
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double v = 0.0;
                const double* hats[5] = {var_sol.x.node(k, i), var_sol.z.node(k, i),
                                         var_sol.y.node(k, i), var_sol.q.node(k, i),
                                         dir.du.node(k, i)};
                for (int vi = 0; vi < 5; ++vi) {
                    const int vd = var_dim(dims, static_cast<Var>(vi));
                    const double* grad = frozen.dl[vi].node(k, i);
                    for (int c = 0; c < vd; ++c) v += grad[c] * hats[vi][c];
                }
                acc += v;
            }
            dJ += dt * acc / static_cast<double>(n);
        }
    }
    auto grad_pairing = [&](const ScalarMap& m, const LevelField& point, const double* hat_base,
                            int hat_dim, int level) {
        const std::size_t n = lat.level_size(level);
        std::vector<double> g(hat_dim);
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            m.grad(point.node(i), g.data());
            for (int c = 0; c < hat_dim; ++c) acc += g[c] * hat_base[i * hat_dim + c];
        }
        return acc / static_cast<double>(n);
    };
    dJ += grad_pairing(spec.chi, base.xi, dir.dxi.data.data(), dims.n, 0);
    dJ += grad_pairing(spec.lambda, base.eta, dir.deta.data.data(), dims.k, lat.N());
    LevelField xN = base_sol.x.at(lat.N());
    dJ += grad_pairing(spec.phi, xN, var_sol.x.level[lat.N()].data(), dims.n, lat.N());
    LevelField y0 = base_sol.y.at(0);
    dJ += grad_pairing(spec.gamma, y0, var_sol.y.level[0].data(), dims.k, 0);
    return dJ;
}

double directional_cost_derivative(const ProblemSpec& spec, const ControlTriple& base,
                                   const Direction& dir, const SolveOptions& opts) {
    FbdsdeSolution base_sol = solve_fbdsde(make_state_problem(spec, base), opts);
    if (!base_sol.converged) throw std::runtime_error("base solve did not converge");
    FrozenCoefficients frozen = freeze(spec, base_sol, base.u, spec.has_l);
    FbdsdeSolution var_sol = solve_variational(frozen, dir, opts);
    return directional_cost_derivative(spec, base, base_sol, frozen, dir, var_sol);
}

}  // namespace tsfb
