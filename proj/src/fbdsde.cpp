#include "tsfb/fbdsde.hpp"

#include <cmath>
#include <random>

namespace tsfb {

int var_dim(const Dims& dims, Var v) {
    switch (v) {
        case Var::x: return dims.x_dim();
        case Var::z: return dims.z_dim();
        case Var::y: return dims.y_dim();
        case Var::q: return dims.q_dim();
        case Var::u: return dims.u_dim();
    }
    return 0;
}

namespace {

struct Point {
    std::vector<double> x, z, y, q, u;
    explicit Point(const Dims& d)
        : x(d.x_dim()), z(d.z_dim()), y(d.y_dim()), q(d.q_dim()), u(d.u_dim()) {}
    double* slot(Var v) {
        switch (v) {
            case Var::x: return x.data();
            case Var::z: return z.data();
            case Var::y: return y.data();
            case Var::q: return q.data();
            case Var::u: return u.data();
        }
        return nullptr;
    }
};

void fill_uniform(std::vector<double>& v, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (double& e : v) e = dist(rng);
}

double sq_norm(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

double dot_diff(const std::vector<double>& a1, const std::vector<double>& a2,
                const std::vector<double>& b1, const std::vector<double>& b2) {
    double s = 0.0;
    for (std::size_t i = 0; i < a1.size(); ++i) s += (a1[i] - a2[i]) * (b1[i] - b2[i]);
    return s;
}

}  // namespace

double validate_partials(const CoefficientSet& coeffs, int samples, std::uint64_t seed,
                         double t_max) {
    if (!coeffs.has_partials) throw ConfigError("coefficient set declares no partials");
    const Dims& dims = coeffs.dims;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> tdist(0.0, t_max);
    const double h = 1e-6;
    double worst = 0.0;

    struct Entry {
        const Coeff* fn;
        const std::array<Coeff, 5>* jac;
        int out;
    };
    const std::array<Entry, 4> entries = {
        Entry{&coeffs.F, &coeffs.dF, dims.x_dim()}, Entry{&coeffs.G, &coeffs.dG, dims.n * dims.d},
        Entry{&coeffs.f, &coeffs.df, dims.y_dim()}, Entry{&coeffs.g, &coeffs.dg, dims.k * dims.lB}};

    for (int s = 0; s < samples; ++s) {
        Point p(dims);
        fill_uniform(p.x, rng);
        fill_uniform(p.z, rng);
        fill_uniform(p.y, rng);
        fill_uniform(p.q, rng);
        fill_uniform(p.u, rng);
        const double t = tdist(rng);
        for (const Entry& e : entries) {
            for (Var v : {Var::x, Var::z, Var::y, Var::q, Var::u}) {
                const int vd = var_dim(dims, v);
                std::vector<double> jac(e.out * vd);
                (*e.jac)[static_cast<int>(v)](t, p.x.data(), p.z.data(), p.y.data(), p.q.data(),
                                              p.u.data(), jac.data());
                std::vector<double> lo(e.out), hi(e.out);
                for (int i = 0; i < vd; ++i) {
                    double* slot = p.slot(v);
                    const double save = slot[i];
                    slot[i] = save + h;
                    (*e.fn)(t, p.x.data(), p.z.data(), p.y.data(), p.q.data(), p.u.data(),
                            hi.data());
                    slot[i] = save - h;
                    (*e.fn)(t, p.x.data(), p.z.data(), p.y.data(), p.q.data(), p.u.data(),
                            lo.data());
                    slot[i] = save;
                    for (int r = 0; r < e.out; ++r) {
                        const double fd = (hi[r] - lo[r]) / (2.0 * h);
                        worst = std::max(worst, std::abs(fd - jac[r * vd + i]));
                    }
                }
            }
        }
    }
    return worst;
}

FbdsdeSolution solve_fbdsde(const FbdsdeProblem& problem, const SolveOptions& opts) {
    const TwoSidedLattice& lat = *problem.xi.lat;
    const Dims& dims = problem.coeffs.dims;
    if (problem.xi.dim != dims.n || problem.eta.dim != dims.k)
        throw ShapeError("boundary data dimension mismatch");
    if (problem.u.dim != dims.u_dim()) throw ShapeError("control dimension mismatch");
    if (lat.dim_w() != dims.d || lat.dim_b() != dims.lB)
        throw ShapeError("driver dimensions do not match the lattice");

    CoupledForwardDriver fdrv = [&](int k, std::size_t i, const double* x, const double* z,
                                    const double* y, const double* q, double* F, double* G) {
        const double t = lat.t(k);
        const double* u = problem.u.node(k, i);
        problem.coeffs.F(t, x, z, y, q, u, F);
        problem.coeffs.G(t, x, z, y, q, u, G);
    };
    CoupledBackwardDriver bdrv = [&](int kn, std::size_t i, const double* y, const double* q,
                                     const double* x, const double* z, double* f, double* g) {
        const double t = lat.t(kn);
        const double* u = problem.u.node(kn, i);
        problem.coeffs.f(t, x, z, y, q, u, f);
        problem.coeffs.g(t, x, z, y, q, u, g);
    };

    PicardOptions popts;
    popts.theta = opts.theta;
    popts.tol = opts.tol;
    popts.max_iter = opts.max_iter;
    CoupledSolution cs =
        solve_coupled(lat, dims.n, dims.k, problem.xi, problem.eta, fdrv, bdrv, popts);

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

double fbdsde_backward_residual(const FbdsdeProblem& problem, const FbdsdeSolution& sol) {
    const TwoSidedLattice& lat = *problem.xi.lat;
    BackwardDriver drv = [&](int kn, std::size_t i, const double* y, const double* q, double* f,
                             double* g) {
        const double t = lat.t(kn);
        const double* u = problem.u.node(kn, i);
        problem.coeffs.f(t, sol.x.node(kn, i), sol.z.node(kn, i), y, q, u, f);
        problem.coeffs.g(t, sol.x.node(kn, i), sol.z.node(kn, i), y, q, u, g);
    };
    return backward_recursion_residual(sol.y, sol.q, drv);
}

double fbdsde_forward_residual(const FbdsdeProblem& problem, const FbdsdeSolution& sol) {
    const TwoSidedLattice& lat = *problem.xi.lat;
    ForwardDriver drv = [&](int k, std::size_t i, const double* x, const double* z, double* F,
                            double* G) {
        const double t = lat.t(k);
        const double* u = problem.u.node(k, i);
        problem.coeffs.F(t, x, z, sol.y.node(k, i), sol.q.node(k, i), u, F);
        problem.coeffs.G(t, x, z, sol.y.node(k, i), sol.q.node(k, i), u, G);
    };
    return forward_recursion_residual(sol.x, sol.z, drv);
}

MonotonicityReport certify_monotonicity(const CoefficientSet& coeffs, const double* u,
                                        int sample_count, std::uint64_t seed, double t_max) {
    const Dims& dims = coeffs.dims;
    if (dims.d != dims.lB)
        throw ShapeError("monotonicity pairing requires dim_w == dim_b");
    if (sample_count < 1) throw ConfigError("sample_count must be >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> tdist(0.0, t_max);

    auto eval = [&](double t, const Point& p, std::vector<double>& F, std::vector<double>& G,
                    std::vector<double>& f, std::vector<double>& g) {
        coeffs.F(t, p.x.data(), p.z.data(), p.y.data(), p.q.data(), u, F.data());
        coeffs.G(t, p.x.data(), p.z.data(), p.y.data(), p.q.data(), u, G.data());
        coeffs.f(t, p.x.data(), p.z.data(), p.y.data(), p.q.data(), u, f.data());
        coeffs.g(t, p.x.data(), p.z.data(), p.y.data(), p.q.data(), u, g.data());
    };

    double max_r = -1e300;
    std::vector<double> F1(dims.n), F2(dims.n), G1(dims.n * dims.d), G2(dims.n * dims.d);
    std::vector<double> f1(dims.k), f2(dims.k), g1(dims.k * dims.lB), g2(dims.k * dims.lB);
    for (int s = 0; s < sample_count; ++s) {
        Point p1(dims), p2(dims);
        fill_uniform(p1.x, rng); fill_uniform(p1.z, rng); fill_uniform(p1.y, rng);
        fill_uniform(p1.q, rng);
        fill_uniform(p2.x, rng); fill_uniform(p2.z, rng); fill_uniform(p2.y, rng);
        fill_uniform(p2.q, rng);
        const double t = tdist(rng);
        const double nrm = sq_norm(p1.x, p2.x) + sq_norm(p1.z, p2.z) + sq_norm(p1.y, p2.y) +
                           sq_norm(p1.q, p2.q);
        if (nrm < 1e-14) continue;
        eval(t, p1, F1, G1, f1, g1);
        eval(t, p2, F2, G2, f2, g2);
        // <A(z1) - A(z2), z1 - z2> with A = (-F, -G, -f, -g)
        const double r = -(dot_diff(F1, F2, p1.x, p2.x) + dot_diff(G1, G2, p1.z, p2.z) +
                           dot_diff(f1, f2, p1.y, p2.y) + dot_diff(g1, g2, p1.q, p2.q)) /
                         nrm;
        max_r = std::max(max_r, r);
    }
    MonotonicityReport rep;
    rep.mu_hat = -max_r;
    rep.certified = rep.mu_hat > 0.0;
    return rep;
}

LipschitzReport certify_lipschitz(const CoefficientSet& coeffs, const double* u, int sample_count,
                                  std::uint64_t seed, double t_max) {
    const Dims& dims = coeffs.dims;
    if (sample_count < 1) throw ConfigError("sample_count must be >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> tdist(0.0, t_max);

    auto eval = [&](double t, const Point& p, std::vector<double>& F, std::vector<double>& G,
                    std::vector<double>& f, std::vector<double>& g) {
        coeffs.F(t, p.x.data(), p.z.data(), p.y.data(), p.q.data(), u, F.data());
        coeffs.G(t, p.x.data(), p.z.data(), p.y.data(), p.q.data(), u, G.data());
        coeffs.f(t, p.x.data(), p.z.data(), p.y.data(), p.q.data(), u, f.data());
        coeffs.g(t, p.x.data(), p.z.data(), p.y.data(), p.q.data(), u, g.data());
    };

    LipschitzReport rep;
    std::vector<double> F1(dims.n), F2(dims.n), G1(dims.n * dims.d), G2(dims.n * dims.d);
    std::vector<double> f1(dims.k), f2(dims.k), g1(dims.k * dims.lB), g2(dims.k * dims.lB);
    for (int s = 0; s < sample_count; ++s) {
        const double t = tdist(rng);
        // vary (x, y) only
        Point p1(dims), p2(dims);
        fill_uniform(p1.x, rng); fill_uniform(p1.z, rng); fill_uniform(p1.y, rng);
        fill_uniform(p1.q, rng);
        p2 = p1;
        fill_uniform(p2.x, rng);
        fill_uniform(p2.y, rng);
        double den = sq_norm(p1.x, p2.x) + sq_norm(p1.y, p2.y);
        if (den > 1e-14) {
            eval(t, p1, F1, G1, f1, g1);
            eval(t, p2, F2, G2, f2, g2);
            const double num = sq_norm(F1, F2) + sq_norm(f1, f2) + sq_norm(G1, G2) +
                               sq_norm(g1, g2);
            rep.C_hat = std::max(rep.C_hat, num / den);
        }
        // vary (z, q) only
        p2 = p1;
        fill_uniform(p2.z, rng);
        fill_uniform(p2.q, rng);
        den = sq_norm(p1.z, p2.z) + sq_norm(p1.q, p2.q);
        if (den > 1e-14) {
            eval(t, p1, F1, G1, f1, g1);
            eval(t, p2, F2, G2, f2, g2);
            const double num = sq_norm(G1, G2) + sq_norm(g1, g2);
            rep.alpha_hat = std::max(rep.alpha_hat, num / den);
        }
    }
    rep.certified = rep.alpha_hat < 0.5;
    return rep;
}

}  // namespace tsfb
