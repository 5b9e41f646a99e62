#include "tsfb/adjoint.hpp"

#include <cmath>
#include <random>

namespace tsfb {

namespace {

// out += J^T * w with row-major J (rows x cols), w of length rows
inline void gemv_t_add(const double* J, const double* w, int rows, int cols, double* out) {
    for (int r = 0; r < rows; ++r) {
        const double wr = w[r];
        for (int c = 0; c < cols; ++c) out[c] += J[r * cols + c] * wr;
    }
}

std::vector<double> sample_in_set(const ConvexSet& set, std::mt19937_64& rng) {
    const int m = set.dim();
    std::vector<double> v(m);
    if (set.kind == ConvexSet::Kind::Box) {
        std::uniform_real_distribution<double> dist(0.0, 1.0);
        for (int i = 0; i < m; ++i) v[i] = set.lo[i] + dist(rng) * (set.hi[i] - set.lo[i]);
    } else {
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::uniform_real_distribution<double> dist(0.0, 1.0);
        double nrm = 0.0;
        for (int i = 0; i < m; ++i) {
            v[i] = gauss(rng);
            nrm += v[i] * v[i];
        }
        nrm = std::sqrt(std::max(nrm, 1e-300));
        const double r = set.radius * std::pow(dist(rng), 1.0 / m);
        for (int i = 0; i < m; ++i) v[i] = set.center[i] + r * v[i] / nrm;
    }
    return v;
}

}  // namespace

double Multipliers::norm() const {
    double s = h0 * h0 + h1 * h1;
    for (double v : h2) s += v * v;
    for (double v : h3) s += v * v;
    return std::sqrt(s);
}

AdjointSolution solve_adjoint(const FrozenCoefficients& frozen, const BoundaryWeights& w,
                              const ProblemSpec& spec, const FbdsdeSolution& base,
                              bool include_l, const SolveOptions& opts) {
    const TwoSidedLattice& lat = *frozen.lat;
    const Dims& dims = frozen.dims;
    if (include_l && !frozen.has_l)
        throw ConfigError("running-cost gradients requested but not frozen");
    const int n = dims.n, kk = dims.k;
    const int nPsi = spec.psi.out_dim, nH = spec.h.out_dim;
    if (static_cast<int>(w.h3.size()) != nPsi || static_cast<int>(w.h2.size()) != nH)
        throw ShapeError("boundary weight dimensions mismatch");

    // m_N = -(h3^T psi_x + h1 phi_x), from the base terminal state
    LevelField mN(lat, lat.N(), n);
    {
        std::vector<double> jac(nPsi * n), grad(n);
        for (std::size_t i = 0; i < lat.level_size(lat.N()); ++i) {
            const double* xN = base.x.node(lat.N(), i);
            spec.psi.jacobian(xN, jac.data());
            spec.phi.grad(xN, grad.data());
            double* dst = mN.node(i);
            for (int c = 0; c < n; ++c) {
                double acc = w.h1 * grad[c];
                for (int r = 0; r < nPsi; ++r) acc += w.h3[r] * jac[r * n + c];
                dst[c] = -acc;
            }
        }
    }
    // n_0 = h2^T h_y + h0 gamma_y, from the base initial backward state
    LevelField n0(lat, 0, kk);
    {
        std::vector<double> jac(nH * kk), grad(kk);
        for (std::size_t i = 0; i < lat.level_size(0); ++i) {
            const double* y0 = base.y.node(0, i);
            spec.h.jacobian(y0, jac.data());
            spec.gamma.grad(y0, grad.data());
            double* dst = n0.node(i);
            for (int c = 0; c < kk; ++c) {
                double acc = w.h0 * grad[c];
                for (int r = 0; r < nH; ++r) acc += w.h2[r] * jac[r * kk + c];
                dst[c] = acc;
            }
        }
    }

    const int nF = dims.x_dim(), nG = dims.n * dims.d, nf = dims.y_dim(), ng = dims.k * dims.lB;
    // H_var = dF_var^T m + dG_var^T p + df_var^T n + dg_var^T delta (+ l_var)
    auto h_var = [&, include_l](int k, std::size_t i, Var v, const double* m, const double* p,
                                const double* nn, const double* delta, double* out) {
        const int vi = static_cast<int>(v);
        const int vd = var_dim(dims, v);
        std::fill(out, out + vd, 0.0);
        gemv_t_add(frozen.dF[vi].node(k, i), m, nF, vd, out);
        gemv_t_add(frozen.dG[vi].node(k, i), p, nG, vd, out);
        gemv_t_add(frozen.df[vi].node(k, i), nn, nf, vd, out);
        gemv_t_add(frozen.dg[vi].node(k, i), delta, ng, vd, out);
        if (include_l) {
            const double* lg = frozen.dl[vi].node(k, i);
            for (int c = 0; c < vd; ++c) out[c] += lg[c];
        }
    };

    // forward pair carries (n, ztilde) with delta = -ztilde
    std::vector<double> deltabuf(ng);
    CoupledForwardDriver fdrv = [&](int k, std::size_t i, const double* nn, const double* zt,
                                    const double* m, const double* p, double* Ft, double* Gt) {
        for (int c = 0; c < ng; ++c) deltabuf[c] = -zt[c];
        h_var(k, i, Var::y, m, p, nn, deltabuf.data(), Ft);
        for (int c = 0; c < dims.y_dim(); ++c) Ft[c] = -Ft[c];
        h_var(k, i, Var::q, m, p, nn, deltabuf.data(), Gt);
        for (int c = 0; c < dims.q_dim(); ++c) Gt[c] = -Gt[c];
    };
    std::vector<double> deltabuf2(ng);
    CoupledBackwardDriver bdrv = [&](int kn, std::size_t i, const double* m, const double* p,
                                     const double* nn, const double* zt, double* fm, double* gm) {
        for (int c = 0; c < ng; ++c) deltabuf2[c] = -zt[c];
        h_var(kn, i, Var::x, m, p, nn, deltabuf2.data(), fm);
        for (int c = 0; c < dims.x_dim(); ++c) fm[c] = -fm[c];
        h_var(kn, i, Var::z, m, p, nn, deltabuf2.data(), gm);
    };

    PicardOptions popts;
    popts.theta = opts.theta;
    popts.tol = opts.tol;
    popts.max_iter = opts.max_iter;
    popts.backward_first = true;
    CoupledSolution cs = solve_coupled(lat, kk, n, n0, mN, fdrv, bdrv, popts);

    AdjointSolution adj;
    adj.m = std::move(cs.y);
    adj.p = std::move(cs.q);
    adj.n = std::move(cs.x);
    adj.delta = std::move(cs.z);
    for (auto& lvl : adj.delta.level)
        for (double& v : lvl) v = -v;
    adj.iterations = cs.iterations;
    adj.residual = cs.residual;
    adj.converged = cs.converged;
    adj.history = std::move(cs.history);
    return adj;
}

double hamiltonian(const ProblemSpec& spec, double t, const double* x, const double* z,
                   const double* y, const double* q, const double* u, const double* m,
                   const double* p, const double* n, const double* delta, bool include_l) {
    const Dims& dims = spec.coeffs.dims;
    std::vector<double> F(dims.x_dim()), G(dims.n * dims.d), f(dims.y_dim()),
        g(dims.k * dims.lB);
    spec.coeffs.F(t, x, z, y, q, u, F.data());
    spec.coeffs.G(t, x, z, y, q, u, G.data());
    spec.coeffs.f(t, x, z, y, q, u, f.data());
    spec.coeffs.g(t, x, z, y, q, u, g.data());
    double H = 0.0;
    for (std::size_t i = 0; i < F.size(); ++i) H += F[i] * m[i];
    for (std::size_t i = 0; i < G.size(); ++i) H += G[i] * p[i];
    for (std::size_t i = 0; i < f.size(); ++i) H += f[i] * n[i];
    for (std::size_t i = 0; i < g.size(); ++i) H += g[i] * delta[i];
    if (include_l && spec.has_l) {
        double lv = 0.0;
        spec.l(t, x, z, y, q, u, &lv);
        H += lv;
    }
    return H;
}

void hamiltonian_u(const ProblemSpec& spec, double t, const double* x, const double* z,
                   const double* y, const double* q, const double* u, const double* m,
                   const double* p, const double* n, const double* delta, bool include_l,
                   double* out) {
    const Dims& dims = spec.coeffs.dims;
    const int ud = dims.u_dim();
    const int nF = dims.x_dim(), nG = dims.n * dims.d, nf = dims.y_dim(), ng = dims.k * dims.lB;
    std::vector<double> J;
    std::fill(out, out + ud, 0.0);
    J.resize(nF * ud);
    spec.coeffs.dF[static_cast<int>(Var::u)](t, x, z, y, q, u, J.data());
    gemv_t_add(J.data(), m, nF, ud, out);
    J.resize(nG * ud);
    spec.coeffs.dG[static_cast<int>(Var::u)](t, x, z, y, q, u, J.data());
    gemv_t_add(J.data(), p, nG, ud, out);
    J.resize(nf * ud);
    spec.coeffs.df[static_cast<int>(Var::u)](t, x, z, y, q, u, J.data());
    gemv_t_add(J.data(), n, nf, ud, out);
    J.resize(ng * ud);
    spec.coeffs.dg[static_cast<int>(Var::u)](t, x, z, y, q, u, J.data());
    gemv_t_add(J.data(), delta, ng, ud, out);
    if (include_l && spec.has_l) {
        J.resize(ud);
        spec.dl[static_cast<int>(Var::u)](t, x, z, y, q, u, J.data());
        for (int c = 0; c < ud; ++c) out[c] += J[c];
    }
}

AdaptedField assemble_hamiltonian_u(const FrozenCoefficients& frozen,
                                    const AdjointSolution& adj) {
    const TwoSidedLattice& lat = *frozen.lat;
    const Dims& dims = frozen.dims;
    const int ud = dims.u_dim();
    const int nF = dims.x_dim(), nG = dims.n * dims.d, nf = dims.y_dim(), ng = dims.k * dims.lB;
    const int ui = static_cast<int>(Var::u);
    AdaptedField Hu(lat, ud, 0.0);
    for (int k = 0; k <= lat.N(); ++k) {
        for (std::size_t i = 0; i < lat.level_size(k); ++i) {
            double* out = Hu.node(k, i);
            gemv_t_add(frozen.dF[ui].node(k, i), adj.m.node(k, i), nF, ud, out);
            gemv_t_add(frozen.dG[ui].node(k, i), adj.p.node(k, i), nG, ud, out);
            gemv_t_add(frozen.df[ui].node(k, i), adj.n.node(k, i), nf, ud, out);
            gemv_t_add(frozen.dg[ui].node(k, i), adj.delta.node(k, i), ng, ud, out);
            if (frozen.has_l) {
                const double* lg = frozen.dl[ui].node(k, i);
                for (int c = 0; c < ud; ++c) out[c] += lg[c];
            }
        }
    }
    return Hu;
}

MpResiduals mp_residuals(const ProblemSpec& spec, const ControlTriple& base,
                         const FbdsdeSolution& base_sol, const AdjointSolution& adj,
                         const FrozenCoefficients& frozen, int sample_count, std::uint64_t seed,
                         double boundary_tol) {
    if (sample_count < 1) throw ConfigError("sample_count must be >= 1");
    const TwoSidedLattice& lat = *base.xi.lat;
    const Dims& dims = spec.coeffs.dims;
    std::mt19937_64 rng(seed);

    std::vector<std::vector<double>> xi_samples, eta_samples, u_samples;
    for (int s = 0; s < sample_count; ++s) {
        xi_samples.push_back(sample_in_set(spec.K1, rng));
        eta_samples.push_back(sample_in_set(spec.K2, rng));
        u_samples.push_back(sample_in_set(spec.K, rng));
    }

    MpResiduals res;
    res.r_xi = -1e300;
    res.r_eta = 1e300;
    res.r_u = 1e300;

    // initial transversality and boundary classification at level 0
    std::vector<double> chix(dims.n);
    for (std::size_t i = 0; i < lat.level_size(0); ++i) {
        const double* xi = base.xi.node(i);
        spec.chi.grad(xi, chix.data());
        std::vector<double> gap(dims.n);
        for (int c = 0; c < dims.n; ++c) gap[c] = adj.m.node(0, i)[c] - chix[c];
        for (const auto& v : xi_samples) {
            double dot = 0.0;
            for (int c = 0; c < dims.n; ++c) dot += gap[c] * (v[c] - xi[c]);
            res.r_xi = std::max(res.r_xi, dot);
        }
        if (spec.K1.on_boundary(xi)) {
            ++res.boundary_nodes;
            for (int c = 0; c < dims.n; ++c)
                res.max_boundary_violation =
                    std::max(res.max_boundary_violation, gap[c]);  // require <= 0 on M
        } else {
            for (int c = 0; c < dims.n; ++c)
                res.max_boundary_violation = std::max(res.max_boundary_violation,
                                                      std::abs(gap[c]));  // require = 0 off M
        }
    }
    res.boundary_ok = res.max_boundary_violation <= boundary_tol;

    // terminal transversality at level N
    std::vector<double> lamy(dims.k);
    for (std::size_t i = 0; i < lat.level_size(lat.N()); ++i) {
        const double* eta = base.eta.node(i);
        spec.lambda.grad(eta, lamy.data());
        for (const auto& v : eta_samples) {
            double dot = 0.0;
            for (int c = 0; c < dims.k; ++c)
                dot += (adj.n.node(lat.N(), i)[c] + lamy[c]) * (v[c] - eta[c]);
            res.r_eta = std::min(res.r_eta, dot);
        }
    }

    // Hamiltonian minimality in u
    AdaptedField Hu = assemble_hamiltonian_u(frozen, adj);
    for (int k = 0; k < lat.N(); ++k)
        for (std::size_t i = 0; i < lat.level_size(k); ++i)
            for (const auto& v : u_samples) {
                double dot = 0.0;
                for (int c = 0; c < dims.u_dim(); ++c)
                    dot += Hu.node(k, i)[c] * (v[c] - base.u.node(k, i)[c]);
                res.r_u = std::min(res.r_u, dot);
            }
    return res;
}

double duality_gap(const ProblemSpec& spec, const FbdsdeSolution& base_sol,
                   const FrozenCoefficients& frozen, const BoundaryWeights& w,
                   const AdjointSolution& adj, const Direction& dir,
                   const FbdsdeSolution& var_sol) {
    const TwoSidedLattice& lat = *frozen.lat;
    const Dims& dims = frozen.dims;
    const int N = lat.N();
    const int nPsi = spec.psi.out_dim, nH = spec.h.out_dim;

    auto mean_dot = [&](const AdaptedField& a, int ka, const AdaptedField& b, int kb) {
        double acc = 0.0;
        const std::size_t n = lat.level_size(ka);
        for (std::size_t i = 0; i < n * static_cast<std::size_t>(a.dim); ++i)
            acc += a.level[ka][i] * b.level[kb][i];
        return acc / static_cast<double>(n);
    };

    double lhs = mean_dot(adj.n, N, var_sol.y, N) - mean_dot(adj.m, 0, var_sol.x, 0);

    // E sum <m F_u + p G_u + n f_u + delta g_u, u_hat> dt
    const int ud = dims.u_dim();
    const int nF = dims.x_dim(), nG = dims.n * dims.d, nf = dims.y_dim(), ng = dims.k * dims.lB;
    const int ui = static_cast<int>(Var::u);
    std::vector<double> combo(ud);
    for (int k = 0; k < N; ++k) {
        double acc = 0.0;
        const std::size_t n = lat.level_size(k);
        for (std::size_t i = 0; i < n; ++i) {
            std::fill(combo.begin(), combo.end(), 0.0);
            gemv_t_add(frozen.dF[ui].node(k, i), adj.m.node(k, i), nF, ud, combo.data());
            gemv_t_add(frozen.dG[ui].node(k, i), adj.p.node(k, i), nG, ud, combo.data());
            gemv_t_add(frozen.df[ui].node(k, i), adj.n.node(k, i), nf, ud, combo.data());
            gemv_t_add(frozen.dg[ui].node(k, i), adj.delta.node(k, i), ng, ud, combo.data());
            const double* uh = dir.du.node(k, i);
            for (int c = 0; c < ud; ++c) acc += combo[c] * uh[c];
        }
        lhs += lat.dt() * acc / static_cast<double>(n);
    }

    // boundary pairings with the weights
    double rhs = 0.0;
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
                for (int c = 0; c < dims.n; ++c)
                    acc += w.h3[r] * jac[r * dims.n + c] * xhat[c];
            for (int c = 0; c < dims.n; ++c) acc += w.h1 * grad[c] * xhat[c];
        }
        rhs += acc / static_cast<double>(n);
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
                for (int c = 0; c < dims.k; ++c)
                    acc += w.h2[r] * jac[r * dims.k + c] * yhat[c];
            for (int c = 0; c < dims.k; ++c) acc += w.h0 * grad[c] * yhat[c];
        }
        rhs += acc / static_cast<double>(n);
    }
    return std::abs(lhs - rhs);
}

}  // namespace tsfb
