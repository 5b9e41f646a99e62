#include "tsfb/applications.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace tsfb {

namespace {

VectorMap trivial_constraint(int in_dim) {
    VectorMap m;
    m.out_dim = 1;
    m.value = [](const double*, double* out) { out[0] = 0.0; };
    m.jacobian = [in_dim](const double*, double* out) {
        std::fill(out, out + in_dim, 0.0);
    };
    return m;
}

// Central finite-difference Jacobian of a coefficient with respect to one
// variable slot.
Coeff fd_partial(const Coeff& fn, const Dims& dims, Var v, int out_dim, double h = 1e-6) {
    const int vd = var_dim(dims, v);
    return [fn, dims, v, out_dim, vd, h](double t, const double* x, const double* z,
                                         const double* y, const double* q, const double* u,
                                         double* out) {
        std::vector<double> slot;
        const double* ptr[5] = {x, z, y, q, u};
        std::vector<double> plus(out_dim), minus(out_dim);
        slot.assign(ptr[static_cast<int>(v)], ptr[static_cast<int>(v)] + vd);
        for (int j = 0; j < vd; ++j) {
            const double save = slot[j];
            const double* arg[5] = {x, z, y, q, u};
            arg[static_cast<int>(v)] = slot.data();
            slot[j] = save + h;
            fn(t, arg[0], arg[1], arg[2], arg[3], arg[4], plus.data());
            slot[j] = save - h;
            fn(t, arg[0], arg[1], arg[2], arg[3], arg[4], minus.data());
            slot[j] = save;
            for (int r = 0; r < out_dim; ++r)
                out[r * vd + j] = (plus[r] - minus[r]) / (2.0 * h);
        }
    };
}

void fill_fd_partials(CoefficientSet& cs) {
    const Dims& dims = cs.dims;
    for (int v = 0; v < 5; ++v) {
        const Var var = static_cast<Var>(v);
        cs.dF[v] = fd_partial(cs.F, dims, var, dims.n);
        cs.dG[v] = fd_partial(cs.G, dims, var, dims.n * dims.d);
        cs.df[v] = fd_partial(cs.f, dims, var, dims.k);
        cs.dg[v] = fd_partial(cs.g, dims, var, dims.k * dims.lB);
    }
    cs.has_partials = true;
}

double sup_abs(const AdaptedField& f, int last_level) {
    double s = 0.0;
    for (int k = 0; k <= last_level; ++k)
        for (double v : f.level[k]) s = std::max(s, std::abs(v));
    return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// classical formulation

std::vector<double> sigma_invert(const ClassicalSpec& spec, double t, const double* y,
                                 const double* q) {
    const int m = spec.dims.k * spec.dims.d;
    Eigen::MatrixXd S(m, m);
    {
        std::vector<double> buf(m * m);
        spec.Sigma(t, y, buf.data());
        for (int r = 0; r < m; ++r)
            for (int c = 0; c < m; ++c) S(r, c) = buf[r * m + c];
    }
    Eigen::VectorXd rhs(m);
    {
        std::vector<double> s0(m);
        spec.sigma0(t, y, s0.data());
        for (int r = 0; r < m; ++r) rhs(r) = q[r] - s0[r];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(S);
    if (!lu.isInvertible())
        throw ConfigError("sigma_invert: diffusion coefficient matrix is singular");
    Eigen::VectorXd u = lu.solve(rhs);
    return std::vector<double>(u.data(), u.data() + m);
}

ProblemSpec to_backward_formulation(const ClassicalSpec& spec) {
    Dims dims = spec.dims;
    ProblemSpec out = make_problem_shell(dims);
    const ClassicalSpec cs = spec;  // captured by value below

    auto control_of = [cs](double t, const double* y, const double* q) {
        return sigma_invert(cs, t, y, q);
    };

    out.coeffs.dims = dims;
    out.coeffs.F = [cs, control_of](double t, const double* x, const double* z, const double* y,
                                    const double* q, const double*, double* o) {
        std::vector<double> u = control_of(t, y, q);
        cs.fbar(t, x, z, y, u.data(), o);
    };
    out.coeffs.G = [cs, control_of](double t, const double* x, const double* z, const double* y,
                                    const double* q, const double*, double* o) {
        std::vector<double> u = control_of(t, y, q);
        cs.gbar(t, x, z, y, u.data(), o);
    };
    out.coeffs.f = [cs, control_of, dims](double t, const double*, const double*, const double* y,
                                          const double* q, const double*, double* o) {
        std::vector<double> u = control_of(t, y, q);
        std::vector<double> b(dims.k);
        cs.bbar(t, y, u.data(), b.data());
        for (int i = 0; i < dims.k; ++i) o[i] = -b[i];
    };
    out.coeffs.g = [dims](double, const double*, const double*, const double*, const double*,
                          const double*, double* o) {
        std::fill(o, o + dims.k * dims.lB, 0.0);
    };
    fill_fd_partials(out.coeffs);

    out.l = [cs, control_of](double t, const double* x, const double* z, const double* y,
                             const double* q, const double*, double* o) {
        std::vector<double> u = control_of(t, y, q);
        o[0] = cs.lbar(t, x, z, y, u.data());
    };
    for (int v = 0; v < 5; ++v) out.dl[v] = fd_partial(out.l, dims, static_cast<Var>(v), 1);
    out.has_l = true;

    out.chi = cs.chi;
    out.lambda = cs.lambda;
    out.phi = cs.phi;
    out.gamma = ScalarMap::zero(dims.k);
    out.psi = trivial_constraint(dims.n);
    out.a = {0.0};
    out.h = VectorMap::identity(dims.k);
    out.b = cs.b;
    out.K1 = cs.K1;
    out.K2 = cs.K2;
    out.K = ConvexSet::point(std::vector<double>(dims.u_dim(), 0.0));
    return out;
}

ClassicalSolution solve_classical(const ClassicalSpec& spec, const TwoSidedLattice& lat,
                                  const LevelField& xi, const AdaptedField& u) {
    const Dims& dims = spec.dims;
    if (static_cast<int>(spec.b.size()) != dims.k)
        throw ShapeError("initial y has wrong dimension");
    if (u.dim != dims.k * dims.d) throw ShapeError("classical control has dim k*d");

    ClassicalSolution out;
    out.y = AdaptedField(lat, dims.k);
    for (std::size_t i = 0; i < lat.level_size(0); ++i)
        for (int c = 0; c < dims.k; ++c) out.y.node(0, i)[c] = spec.b[c];

    const int m = dims.k * dims.d;
    std::vector<double> bb(dims.k), Sg(m * m), s0(m), sig(m);
    for (int k = 0; k < lat.N(); ++k) {
        JunctionTable jt(lat, k, dims.k);
        const double t = lat.t(k);
        for (std::size_t j = 0; j < lat.junction_size(k); ++j) {
            const std::size_t i0 = lat.junction_to_level(k, j);
            const double* y0 = out.y.node(k, i0);
            const double* uk = u.node(k, i0);
            spec.bbar(t, y0, uk, bb.data());
            spec.Sigma(t, y0, Sg.data());
            spec.sigma0(t, y0, s0.data());
            for (int r = 0; r < m; ++r) {
                sig[r] = s0[r];
                for (int c = 0; c < m; ++c) sig[r] += Sg[r * m + c] * uk[c];
            }
            double* Y = jt.node(j);
            for (int c = 0; c < dims.k; ++c) {
                Y[c] = y0[c] + bb[c] * lat.dt();
                for (int w = 0; w < dims.d; ++w) Y[c] += sig[c * dims.d + w] * lat.dW(k, j, w);
            }
        }
        out.y.set(condexp_drop_b(jt));
    }

    ForwardDriver drv = [&](int k, std::size_t i, const double* x, const double* z, double* F,
                            double* G) {
        spec.fbar(lat.t(k), x, z, out.y.node(k, i), u.node(k, i), F);
        spec.gbar(lat.t(k), x, z, out.y.node(k, i), u.node(k, i), G);
    };
    ForwardSweepResult fw = forward_sweep(lat, dims.n, xi, drv);
    out.x = std::move(fw.x);
    out.z = std::move(fw.z);

    double J = 0.0;
    for (int k = 0; k < lat.N(); ++k) {
        double acc = 0.0;
        const std::size_t nodes = lat.level_size(k);
        for (std::size_t i = 0; i < nodes; ++i)
            acc += spec.lbar(lat.t(k), out.x.node(k, i), out.z.node(k, i), out.y.node(k, i),
                             u.node(k, i));
        J += lat.dt() * acc / static_cast<double>(nodes);
    }
    auto mean_of = [&](const ScalarMap& sm, const AdaptedField& f, int k) {
        if (!sm.value) return 0.0;
        double acc = 0.0;
        const std::size_t nodes = lat.level_size(k);
        for (std::size_t i = 0; i < nodes; ++i) acc += sm.value(f.node(k, i));
        return acc / static_cast<double>(nodes);
    };
    if (spec.chi.value) {
        double acc = 0.0;
        for (std::size_t i = 0; i < lat.level_size(0); ++i) acc += spec.chi.value(xi.node(i));
        J += acc / static_cast<double>(lat.level_size(0));
    }
    J += mean_of(spec.lambda, out.y, lat.N());
    J += mean_of(spec.phi, out.x, lat.N());
    out.cost = J;
    return out;
}

double pathwise_initial_residual(const ClassicalSpec& spec, const FbdsdeSolution& sol) {
    const TwoSidedLattice& lat = *sol.y.lat;
    double r = 0.0;
    for (std::size_t i = 0; i < lat.level_size(0); ++i)
        for (int c = 0; c < spec.dims.k; ++c)
            r = std::max(r, std::abs(sol.y.node(0, i)[c] - spec.b[c]));
    return r;
}

ApplicationAdjointReport solve_application_adjoints(ApplicationKind kind, const ProblemSpec& spec,
                                                    const ControlTriple& base,
                                                    const FbdsdeSolution& base_sol,
                                                    const BoundaryWeights& weights,
                                                    int sample_count, std::uint64_t seed,
                                                    const SolveOptions& opts) {
    ApplicationAdjointReport rep;
    FrozenCoefficients frozen = freeze(spec, base_sol, base.u, spec.has_l);
    rep.adjoint = solve_adjoint(frozen, weights, spec, base_sol, spec.has_l, opts);
    if (kind == ApplicationKind::BdsdeOnly) {
        const int N = base_sol.x.lat->N();
        rep.m_block_norm =
            std::max(sup_abs(rep.adjoint.m, N), sup_abs(rep.adjoint.p, N));
    }
    rep.residuals =
        mp_residuals(spec, base, base_sol, rep.adjoint, frozen, sample_count, seed);
    return rep;
}

// ---------------------------------------------------------------------------
// linear-quadratic machinery

namespace {

// out = sum_v C[v](t) * slot_v, rows x (per-slot cols), matrices row-major
Coeff linear_coeff(const std::array<LqSpec::MatFn, 5>& C, const Dims& dims, int rows) {
    return [C, dims, rows](double t, const double* x, const double* z, const double* y,
                           const double* q, const double* u, double* out) {
        const double* slot[5] = {x, z, y, q, u};
        std::fill(out, out + rows, 0.0);
        for (int v = 0; v < 5; ++v) {
            if (!C[v]) continue;
            Eigen::MatrixXd M = C[v](t);
            const int cols = var_dim(dims, static_cast<Var>(v));
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < cols; ++c) out[r] += M(r, c) * slot[v][c];
        }
    };
}

Coeff linear_partial(const LqSpec::MatFn& M, int rows, int cols) {
    return [M, rows, cols](double t, const double*, const double*, const double*, const double*,
                           const double*, double* out) {
        if (!M) {
            std::fill(out, out + rows * cols, 0.0);
            return;
        }
        Eigen::MatrixXd A = M(t);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) out[r * cols + c] = A(r, c);
    };
}

void require_symmetric(const Eigen::MatrixXd& M, const char* what) {
    if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw ConfigError(std::string(what) + " must be symmetric");
}

double min_eig(const Eigen::MatrixXd& M) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    return es.eigenvalues().minCoeff();
}

}  // namespace

void validate_lq(const LqSpec& spec, int time_samples) {
    const char* names[5] = {"Wx", "Wz", "Wy", "Wq", "Wu"};
    for (int s = 0; s <= time_samples; ++s) {
        const double t = static_cast<double>(s) / std::max(1, time_samples);
        for (int v = 0; v < 5; ++v) {
            if (!spec.W[v]) continue;
            Eigen::MatrixXd M = spec.W[v](t);
            require_symmetric(M, names[v]);
            const double lo = min_eig(M);
            if (v == 4) {
                if (lo <= 0.0) throw ConfigError("Wu must be positive definite");
            } else if (lo < -1e-12) {
                throw ConfigError(std::string(names[v]) + " must be nonnegative definite");
            }
        }
    }
    require_symmetric(spec.U, "U");
    require_symmetric(spec.Q, "Q");
    if (min_eig(spec.U) <= 0.0) throw ConfigError("U must be positive definite");
    if (min_eig(spec.Q) <= 0.0) throw ConfigError("Q must be positive definite");
    if (spec.x0.size() != spec.dims.n || spec.yT.size() != spec.dims.k)
        throw ShapeError("lq boundary data has wrong dimension");
}

ProblemSpec lq_problem_spec(const LqSpec& spec) {
    validate_lq(spec);
    const Dims dims = spec.dims;
    ProblemSpec out = make_problem_shell(dims);

    out.coeffs.F = linear_coeff(spec.Fc, dims, dims.n);
    out.coeffs.G = linear_coeff(spec.Gc, dims, dims.n * dims.d);
    out.coeffs.f = linear_coeff(spec.fc, dims, dims.k);
    out.coeffs.g = linear_coeff(spec.gc, dims, dims.k * dims.lB);
    for (int v = 0; v < 5; ++v) {
        const int cols = var_dim(dims, static_cast<Var>(v));
        out.coeffs.dF[v] = linear_partial(spec.Fc[v], dims.n, cols);
        out.coeffs.dG[v] = linear_partial(spec.Gc[v], dims.n * dims.d, cols);
        out.coeffs.df[v] = linear_partial(spec.fc[v], dims.k, cols);
        out.coeffs.dg[v] = linear_partial(spec.gc[v], dims.k * dims.lB, cols);
    }
    out.coeffs.has_partials = true;

    const std::array<LqSpec::MatFn, 5> W = spec.W;
    out.l = [W, dims](double t, const double* x, const double* z, const double* y,
                      const double* q, const double* u, double* o) {
        const double* slot[5] = {x, z, y, q, u};
        double acc = 0.0;
        for (int v = 0; v < 5; ++v) {
            if (!W[v]) continue;
            Eigen::MatrixXd M = W[v](t);
            const int m = var_dim(dims, static_cast<Var>(v));
            for (int r = 0; r < m; ++r)
                for (int c = 0; c < m; ++c) acc += slot[v][r] * M(r, c) * slot[v][c];
        }
        o[0] = 0.5 * acc;
    };
    for (int v = 0; v < 5; ++v) {
        const LqSpec::MatFn M = spec.W[v];
        const int m = var_dim(dims, static_cast<Var>(v));
        out.dl[v] = [M, m, v](double t, const double* x, const double* z, const double* y,
                              const double* q, const double* u, double* o) {
            std::fill(o, o + m, 0.0);
            if (!M) return;
            const double* slot[5] = {x, z, y, q, u};
            Eigen::MatrixXd A = M(t);
            for (int r = 0; r < m; ++r)
                for (int c = 0; c < m; ++c) o[r] += A(r, c) * slot[v][c];
        };
    }
    out.has_l = true;

    const Eigen::MatrixXd U = spec.U, Q = spec.Q;
    out.phi.value = [U](const double* x) {
        Eigen::Map<const Eigen::VectorXd> v(x, U.rows());
        return 0.5 * v.dot(U * v);
    };
    out.phi.grad = [U](const double* x, double* g) {
        Eigen::Map<const Eigen::VectorXd> v(x, U.rows());
        Eigen::Map<Eigen::VectorXd>(g, U.rows()) = U * v;
    };
    out.gamma.value = [Q](const double* y) {
        Eigen::Map<const Eigen::VectorXd> v(y, Q.rows());
        return 0.5 * v.dot(Q * v);
    };
    out.gamma.grad = [Q](const double* y, double* g) {
        Eigen::Map<const Eigen::VectorXd> v(y, Q.rows());
        Eigen::Map<Eigen::VectorXd>(g, Q.rows()) = Q * v;
    };
    out.chi = ScalarMap::zero(dims.n);
    out.lambda = ScalarMap::zero(dims.k);
    out.psi = trivial_constraint(dims.n);
    out.a = {0.0};
    out.h = trivial_constraint(dims.k);
    out.b = {0.0};
    out.K1 = ConvexSet::point(std::vector<double>(spec.x0.data(), spec.x0.data() + dims.n));
    out.K2 = ConvexSet::point(std::vector<double>(spec.yT.data(), spec.yT.data() + dims.k));
    out.K = spec.K;
    return out;
}

ControlTriple lq_base_triple(const LqSpec& spec, const TwoSidedLattice& lat,
                             const AdaptedField& u) {
    ControlTriple triple;
    triple.xi = LevelField(lat, 0, spec.dims.n);
    for (std::size_t i = 0; i < lat.level_size(0); ++i)
        for (int c = 0; c < spec.dims.n; ++c) triple.xi.node(i)[c] = spec.x0(c);
    triple.eta = LevelField(lat, lat.N(), spec.dims.k);
    for (std::size_t i = 0; i < lat.level_size(lat.N()); ++i)
        for (int c = 0; c < spec.dims.k; ++c) triple.eta.node(i)[c] = spec.yT(c);
    triple.u = u;
    return triple;
}

AdaptedField lq_optimal_control(const AdjointSolution& adj, const LqSpec& spec,
                                const TwoSidedLattice& lat, int sign) {
    const Dims& dims = spec.dims;
    const int nu = dims.u_dim();
    AdaptedField u(lat, nu);
    auto mat = [](const LqSpec::MatFn& M, int rows, int cols, double t) {
        return M ? M(t) : Eigen::MatrixXd::Zero(rows, cols).eval();
    };
    for (int k = 0; k <= lat.N(); ++k) {
        const double t = lat.t(k);
        Eigen::MatrixXd Fu = mat(spec.Fc[4], dims.n, nu, t);
        Eigen::MatrixXd Gu = mat(spec.Gc[4], dims.n * dims.d, nu, t);
        Eigen::MatrixXd fu = mat(spec.fc[4], dims.k, nu, t);
        Eigen::MatrixXd gu = mat(spec.gc[4], dims.k * dims.lB, nu, t);
        Eigen::LLT<Eigen::MatrixXd> Wu(spec.W[4](t));
        for (std::size_t i = 0; i < lat.level_size(k); ++i) {
            Eigen::Map<const Eigen::VectorXd> m(adj.m.node(k, i), dims.n);
            Eigen::Map<const Eigen::VectorXd> p(adj.p.node(k, i), dims.n * dims.d);
            Eigen::Map<const Eigen::VectorXd> n(adj.n.node(k, i), dims.k);
            Eigen::Map<const Eigen::VectorXd> dl(adj.delta.node(k, i), dims.k * dims.lB);
            Eigen::VectorXd combo = Fu.transpose() * m + Gu.transpose() * p +
                                    fu.transpose() * n + gu.transpose() * dl;
            Eigen::Map<Eigen::VectorXd>(u.node(k, i), nu) =
                static_cast<double>(sign) * Wu.solve(combo);
        }
    }
    return u;
}

double lq_cost(const LqSpec& spec, const TwoSidedLattice& lat, const AdaptedField& u,
               const SolveOptions& opts) {
    ProblemSpec pspec = lq_problem_spec(spec);
    ControlTriple triple = lq_base_triple(spec, lat, u);
    FbdsdeSolution sol = solve_fbdsde(make_state_problem(pspec, triple), opts);
    if (!sol.converged) throw std::runtime_error("lq_cost: state solve did not converge");
    return evaluate_cost(triple, pspec, sol);
}

LqResult lq_solve(const LqSpec& spec, const TwoSidedLattice& lat, const SolveOptions& opts,
                  int force_sign, const AdaptedField* start_u) {
    ProblemSpec pspec = lq_problem_spec(spec);
    BoundaryWeights w{1.0, 1.0, {0.0}, {0.0}};
    const double tol = std::max(opts.tol, 1e-11);

    auto run_sign = [&](int sign) {
        LqResult res;
        res.sign = sign;
        AdaptedField u =
            start_u ? *start_u : AdaptedField(lat, spec.dims.u_dim(), 0.0);
        double mix = 1.0;
        double prev_change = -1.0;
        for (int iter = 0; iter < opts.max_iter; ++iter) {
            ControlTriple triple = lq_base_triple(spec, lat, u);
            FbdsdeSolution sol = solve_fbdsde(make_state_problem(pspec, triple), opts);
            if (!sol.converged) return res;
            FrozenCoefficients frozen = freeze(pspec, sol, u, true);
            AdjointSolution adj = solve_adjoint(frozen, w, pspec, sol, true, opts);
            if (!adj.converged) return res;
            AdaptedField unew = lq_optimal_control(adj, spec, lat, sign);
            double change = 0.0;
            for (int k = 0; k <= lat.N(); ++k)
                for (std::size_t j = 0; j < u.level[k].size(); ++j)
                    change = std::max(change, std::abs(unew.level[k][j] - u.level[k][j]));
            if (prev_change >= 0.0 && change > prev_change)
                mix = std::max(0.5 * mix, 1.0 / 128.0);
            prev_change = change;
            for (int k = 0; k <= lat.N(); ++k)
                for (std::size_t j = 0; j < u.level[k].size(); ++j)
                    u.level[k][j] += mix * (unew.level[k][j] - u.level[k][j]);
            res.iterations = iter + 1;
            if (change <= tol) {
                ControlTriple final_triple = lq_base_triple(spec, lat, u);
                res.state = solve_fbdsde(make_state_problem(pspec, final_triple), opts);
                FrozenCoefficients ffin = freeze(pspec, res.state, u, true);
                res.costate = solve_adjoint(ffin, w, pspec, res.state, true, opts);
                res.u = std::move(u);
                res.cost = evaluate_cost(final_triple, pspec, res.state);
                AdaptedField hu = assemble_hamiltonian_u(ffin, res.costate);
                res.stationarity = sup_abs(hu, lat.N() - 1);
                res.converged = true;
                return res;
            }
        }
        return res;
    };

    if (force_sign != 0) return run_sign(force_sign);
    LqResult minus = run_sign(-1);
    LqResult plus = run_sign(+1);
    if (minus.converged && (!plus.converged || minus.cost <= plus.cost)) return minus;
    return plus;
}

LqVerifyReport lq_verify(const LqSpec& spec, const TwoSidedLattice& lat, const LqResult& result,
                         int sample_count, std::uint64_t seed, const SolveOptions& opts) {
    if (!result.converged) throw std::runtime_error("lq_verify needs a converged result");
    LqVerifyReport rep;
    const int nu = spec.dims.u_dim();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    double worst = 1e300;
    std::vector<double> v(nu), proj(nu);
    for (int s = 0; s < sample_count; ++s) {
        if (spec.K.kind == ConvexSet::Kind::Box) {
            for (int c = 0; c < nu; ++c)
                v[c] = spec.K.lo[c] + unit(rng) * (spec.K.hi[c] - spec.K.lo[c]);
        } else {
            for (int c = 0; c < nu; ++c)
                v[c] = spec.K.center[c] + spec.K.radius * (2.0 * unit(rng) - 1.0);
            spec.K.project(v.data(), v.data());
        }
        AdaptedField uc(lat, nu);
        for (int k = 0; k <= lat.N(); ++k)
            for (std::size_t i = 0; i < lat.level_size(k); ++i)
                std::copy(v.begin(), v.end(), uc.node(k, i));
        worst = std::min(worst, lq_cost(spec, lat, uc, opts) - result.cost);
    }
    rep.sufficiency_margin = worst;

    // constant-control grid (9 points per coordinate)
    const int pts = 9;
    std::vector<int> idx(nu, 0);
    double best = 1e300;
    for (;;) {
        for (int c = 0; c < nu; ++c) {
            if (spec.K.kind == ConvexSet::Kind::Box) {
                v[c] = spec.K.lo[c] + idx[c] * (spec.K.hi[c] - spec.K.lo[c]) / (pts - 1);
            } else {
                v[c] = spec.K.center[c] + spec.K.radius * (2.0 * idx[c] / (pts - 1.0) - 1.0);
            }
        }
        if (spec.K.kind == ConvexSet::Kind::Ball) spec.K.project(v.data(), v.data());
        AdaptedField uc(lat, nu);
        for (int k = 0; k <= lat.N(); ++k)
            for (std::size_t i = 0; i < lat.level_size(k); ++i)
                std::copy(v.begin(), v.end(), uc.node(k, i));
        best = std::min(best, lq_cost(spec, lat, uc, opts));
        int c = 0;
        while (c < nu && ++idx[c] == pts) idx[c++] = 0;
        if (c == nu) break;
    }
    rep.grid_best_cost = best;

    // restart from a different admissible control
    for (int c = 0; c < nu; ++c) v[c] = 0.5;
    spec.K.project(v.data(), proj.data());
    AdaptedField start2(lat, nu);
    for (int k = 0; k <= lat.N(); ++k)
        for (std::size_t i = 0; i < lat.level_size(k); ++i)
            std::copy(proj.begin(), proj.end(), start2.node(k, i));
    LqResult second = lq_solve(spec, lat, opts, result.sign, &start2);
    if (second.converged) {
        ControlTriple a = lq_base_triple(spec, lat, result.u);
        ControlTriple b = lq_base_triple(spec, lat, second.u);
        rep.uniqueness_distance = metric_d(a, b);
    } else {
        rep.uniqueness_distance = 1e300;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// refinement fit and the worked example

PowerFit power_fit(const std::vector<double>& dts, const std::vector<double>& values) {
    if (dts.size() != values.size() || dts.size() < 3)
        throw ConfigError("power_fit needs at least three refinement points");
    PowerFit best;
    best.rss = 1e300;
    const std::size_t n = dts.size();
    for (double p = 0.1; p <= 3.0 + 1e-9; p += 0.005) {
        double s1 = 0, sx = 0, sxx = 0, sy = 0, sxy = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double xi = std::pow(dts[i], p);
            s1 += 1.0;
            sx += xi;
            sxx += xi * xi;
            sy += values[i];
            sxy += xi * values[i];
        }
        const double det = s1 * sxx - sx * sx;
        if (std::abs(det) < 1e-14) continue;
        const double a = (sxx * sy - sx * sxy) / det;  // Jinf
        const double c = (s1 * sxy - sx * sy) / det;
        double rss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = values[i] - a - c * std::pow(dts[i], p);
            rss += r * r;
        }
        if (rss < best.rss) best = PowerFit{a, c, p, rss};
    }
    return best;
}

ProblemSpec worked_example_spec() {
    Dims dims;  // all scalar
    ProblemSpec spec = make_problem_shell(dims);
    auto zero1 = [](double, const double*, const double*, const double*, const double*,
                    const double*, double* o) { o[0] = 0.0; };
    auto constv = [](double v) {
        return Coeff([v](double, const double*, const double*, const double*, const double*,
                         const double*, double* o) { o[0] = v; });
    };
    spec.coeffs.F = zero1;
    spec.coeffs.G = [](double, const double*, const double*, const double* y, const double*,
                       const double* u, double* o) { o[0] = 0.5 * y[0] + u[0]; };
    spec.coeffs.f = zero1;
    spec.coeffs.g = [](double, const double* x, const double*, const double*, const double*,
                       const double* u, double* o) { o[0] = 0.5 * x[0] + 0.5 * u[0]; };
    for (int v = 0; v < 5; ++v) {
        spec.coeffs.dF[v] = constv(0.0);
        spec.coeffs.dG[v] = constv(0.0);
        spec.coeffs.df[v] = constv(0.0);
        spec.coeffs.dg[v] = constv(0.0);
    }
    spec.coeffs.dG[static_cast<int>(Var::y)] = constv(0.5);
    spec.coeffs.dG[static_cast<int>(Var::u)] = constv(1.0);
    spec.coeffs.dg[static_cast<int>(Var::x)] = constv(0.5);
    spec.coeffs.dg[static_cast<int>(Var::u)] = constv(0.5);
    spec.coeffs.has_partials = true;

    spec.l = [](double, const double* x, const double* z, const double* y, const double* q,
                const double* u, double* o) {
        o[0] = x[0] * x[0] - y[0] * y[0] + z[0] * z[0] - q[0] * q[0] + 2.0 * x[0] * u[0] -
               4.0 * y[0] * u[0];
    };
    spec.dl[static_cast<int>(Var::x)] = [](double, const double* x, const double*, const double*,
                                           const double*, const double* u, double* o) {
        o[0] = 2.0 * x[0] + 2.0 * u[0];
    };
    spec.dl[static_cast<int>(Var::z)] = [](double, const double*, const double* z, const double*,
                                           const double*, const double*, double* o) {
        o[0] = 2.0 * z[0];
    };
    spec.dl[static_cast<int>(Var::y)] = [](double, const double*, const double*, const double* y,
                                           const double*, const double* u, double* o) {
        o[0] = -2.0 * y[0] - 4.0 * u[0];
    };
    spec.dl[static_cast<int>(Var::q)] = [](double, const double*, const double*, const double*,
                                           const double* q, const double*, double* o) {
        o[0] = -2.0 * q[0];
    };
    spec.dl[static_cast<int>(Var::u)] = [](double, const double* x, const double*, const double* y,
                                           const double*, const double*, double* o) {
        o[0] = 2.0 * x[0] - 4.0 * y[0];
    };
    spec.has_l = true;

    spec.phi.value = [](const double* x) { return x[0] * x[0]; };
    spec.phi.grad = [](const double* x, double* g) { g[0] = 2.0 * x[0]; };
    spec.gamma.value = [](const double* y) { return y[0] * y[0]; };
    spec.gamma.grad = [](const double* y, double* g) { g[0] = 2.0 * y[0]; };
    spec.chi = ScalarMap::zero(1);
    spec.lambda = ScalarMap::zero(1);
    spec.psi = VectorMap::identity(1);
    spec.a = {0.0};
    spec.h = VectorMap::identity(1);
    spec.b = {0.0};
    spec.K = ConvexSet::scalar_box(-1.0, 1.0);
    spec.K1 = ConvexSet::point({0.0});
    spec.K2 = ConvexSet::point({0.0});
    return spec;
}

PaperExampleReport paper_example(int steps, std::vector<int> refinement,
                                 const SolveOptions& opts) {
    ProblemSpec spec = worked_example_spec();
    PaperExampleReport rep;
    rep.steps = steps;

    auto triple_for = [&](const TwoSidedLattice& lat, const AdaptedField& u) {
        ControlTriple t;
        t.xi = LevelField(lat, 0, 1, 0.0);
        t.eta = LevelField(lat, lat.N(), 1, 0.0);
        t.u = u;
        return t;
    };
    auto cost_at = [&](const TwoSidedLattice& lat, const AdaptedField& u) {
        ControlTriple t = triple_for(lat, u);
        FbdsdeSolution sol = solve_fbdsde(make_state_problem(spec, t), opts);
        if (!sol.converged)
            throw std::runtime_error("paper_example: state solve did not converge");
        return evaluate_cost(t, spec, sol);
    };

    {
        TwoSidedLattice lat(1.0, steps);
        AdaptedField u0(lat, 1, 0.0);
        ControlTriple t = triple_for(lat, u0);
        FbdsdeSolution sol = solve_fbdsde(make_state_problem(spec, t), opts);
        rep.cost_at_zero = evaluate_cost(t, spec, sol);
        rep.state_sup_at_zero = std::max(
            std::max(sup_abs(sol.x, lat.N()), sup_abs(sol.z, lat.N())),
            std::max(sup_abs(sol.y, lat.N()), sup_abs(sol.q, lat.N())));
        FrozenCoefficients frozen = freeze(spec, sol, u0, true);
        BoundaryWeights w{1.0, 1.0, {0.0}, {0.0}};
        AdjointSolution adj = solve_adjoint(frozen, w, spec, sol, true, opts);
        rep.costate_sup_at_zero = std::max(
            std::max(sup_abs(adj.m, lat.N()), sup_abs(adj.p, lat.N())),
            std::max(sup_abs(adj.n, lat.N()), sup_abs(adj.delta, lat.N())));
        AdaptedField hu = assemble_hamiltonian_u(frozen, adj);
        rep.hu_sup_at_zero = sup_abs(hu, lat.N() - 1);
    }

    rep.refinement_steps = refinement;
    std::vector<double> dts;
    for (int N : refinement) {
        TwoSidedLattice lat(1.0, N);
        dts.push_back(lat.dt());
        rep.cost_u_one.push_back(cost_at(lat, constant_control(lat, 1, 1.0)));
        rep.cost_u_ramp.push_back(cost_at(
            lat, control_from_time_function(lat, 1, [](double t, double* o) { o[0] = t; })));
    }
    rep.fit_u_one = power_fit(dts, rep.cost_u_one);
    rep.fit_u_ramp = power_fit(dts, rep.cost_u_ramp);
    return rep;
}

}  // namespace tsfb
