#include "tsfb/sweep.hpp"

#include <algorithm>
#include <cmath>

namespace tsfb {

namespace {

constexpr int kBoundaryMaxIter = 64;
constexpr double kBoundaryTol = 1e-13;

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

// One backward step k: consume (y,q) at level k+1, produce (y,q) at level k.
void backward_step(const TwoSidedLattice& lat, int sk, int k, const AdaptedField& y,
                   const AdaptedField& q, const BackwardDriver& drv, std::vector<double>& yk,
                   std::vector<double>& qk, std::vector<double>& fbuf, std::vector<double>& gbuf) {
    const int d = lat.dim_w(), lB = lat.dim_b();
    const double dt = lat.dt();
    const std::size_t n1 = lat.level_size(k + 1);
    fbuf.assign(n1 * sk, 0.0);
    gbuf.assign(n1 * sk * lB, 0.0);
    for (std::size_t i = 0; i < n1; ++i)
        drv(k + 1, i, y.node(k + 1, i), q.node(k + 1, i), fbuf.data() + i * sk,
            gbuf.data() + i * sk * lB);

    yk.assign(lat.level_size(k) * sk, 0.0);
    qk.assign(lat.level_size(k) * sk * d, 0.0);
    const double w = 1.0 / static_cast<double>(std::size_t{1} << d);
    const std::size_t jn = lat.junction_size(k);
    for (std::size_t j = 0; j < jn; ++j) {
        const std::size_t i1 = lat.junction_to_level_next(k, j);
        const std::size_t i0 = lat.junction_to_level(k, j);
        const double* y1 = y.node(k + 1, i1);
        const double* f = fbuf.data() + i1 * sk;
        const double* g = gbuf.data() + i1 * sk * lB;
        for (int r = 0; r < sk; ++r) {
            double Y = y1[r] + f[r] * dt;
            for (int c = 0; c < lB; ++c) Y += g[r * lB + c] * lat.dB(k, j, c);
            yk[i0 * sk + r] += w * Y;
            for (int c = 0; c < d; ++c)
                qk[(i0 * sk + r) * d + c] += w * Y * lat.dW(k, j, c) / dt;
        }
    }
    if (!std::all_of(yk.begin(), yk.end(), [](double v) { return std::isfinite(v); }))
        throw std::runtime_error("backward sweep produced non-finite values");
}

void forward_step(const TwoSidedLattice& lat, int sn, int k, const AdaptedField& x,
                  const AdaptedField& z, const ForwardDriver& drv, std::vector<double>& xk1,
                  std::vector<double>& zk1, std::vector<double>& Fbuf, std::vector<double>& Gbuf) {
    const int d = lat.dim_w(), lB = lat.dim_b();
    const double dt = lat.dt();
    const std::size_t n0 = lat.level_size(k);
    Fbuf.assign(n0 * sn, 0.0);
    Gbuf.assign(n0 * sn * d, 0.0);
    for (std::size_t i = 0; i < n0; ++i)
        drv(k, i, x.node(k, i), z.node(k, i), Fbuf.data() + i * sn, Gbuf.data() + i * sn * d);

    xk1.assign(lat.level_size(k + 1) * sn, 0.0);
    zk1.assign(lat.level_size(k + 1) * sn * lB, 0.0);
    const double w = 1.0 / static_cast<double>(std::size_t{1} << lB);
    const std::size_t jn = lat.junction_size(k);
    for (std::size_t j = 0; j < jn; ++j) {
        const std::size_t i1 = lat.junction_to_level_next(k, j);
        const std::size_t i0 = lat.junction_to_level(k, j);
        const double* x0 = x.node(k, i0);
        const double* F = Fbuf.data() + i0 * sn;
        const double* G = Gbuf.data() + i0 * sn * d;
        for (int r = 0; r < sn; ++r) {
            double X = x0[r] - F[r] * dt;
            for (int c = 0; c < d; ++c) X -= G[r * d + c] * lat.dW(k, j, c);
            xk1[i1 * sn + r] += w * X;
            for (int c = 0; c < lB; ++c)
                zk1[(i1 * sn + r) * lB + c] -= w * X * lat.dB(k, j, c) / dt;
        }
    }
    if (!std::all_of(xk1.begin(), xk1.end(), [](double v) { return std::isfinite(v); }))
        throw std::runtime_error("forward sweep produced non-finite values");
}

// E[q_{N-1} | F_N]: average over the step-(N-1) B coin group.
std::vector<double> project_q_terminal(const TwoSidedLattice& lat, int qdim,
                                       const std::vector<double>& qlast) {
    const int N = lat.N();
    const int wbits = (N - 1) * lat.dim_w();
    const std::size_t bcount = std::size_t{1} << lat.dim_b();
    const double w = 1.0 / static_cast<double>(bcount);
    std::vector<double> out(lat.level_size(N) * qdim, 0.0);
    const std::size_t nN = lat.level_size(N);
    const std::size_t mask = (std::size_t{1} << wbits) - 1;
    for (std::size_t i = 0; i < nN; ++i) {
        const std::size_t lo = i & mask;
        for (std::size_t b = 0; b < bcount; ++b) {
            const std::size_t src = lo | (b << wbits);
            for (int c = 0; c < qdim; ++c) out[i * qdim + c] += w * qlast[src * qdim + c];
        }
    }
    return out;
}

// E[z_1 | F_0]: average over the step-0 W coin group.
std::vector<double> project_z_initial(const TwoSidedLattice& lat, int zdim,
                                      const std::vector<double>& z1) {
    const std::size_t wcount = std::size_t{1} << lat.dim_w();
    const double w = 1.0 / static_cast<double>(wcount);
    std::vector<double> out(lat.level_size(0) * zdim, 0.0);
    const std::size_t n0 = lat.level_size(0);
    for (std::size_t i = 0; i < n0; ++i) {
        const std::size_t hi = (i >> lat.dim_b()) << lat.dim_w();
        for (std::size_t wv = 0; wv < wcount; ++wv) {
            const std::size_t src = wv | hi;
            for (int c = 0; c < zdim; ++c) out[i * zdim + c] += w * z1[src * zdim + c];
        }
    }
    return out;
}

}  // namespace

BackwardSweepResult backward_sweep(const TwoSidedLattice& lat, int sk,
                                   const LevelField& terminal, const BackwardDriver& drv) {
    if (terminal.step != lat.N() || terminal.dim != sk)
        throw ShapeError("terminal field has wrong step or dimension");
    const int N = lat.N();
    const int d = lat.dim_w();
    BackwardSweepResult res{AdaptedField(lat, sk), AdaptedField(lat, sk * d)};
    res.y.level[N] = terminal.data;

    std::vector<double> fbuf, gbuf;
    // fixed point for the q_N convention at the last step
    res.boundary_converged = false;
    for (int it = 0; it < kBoundaryMaxIter; ++it) {
        backward_step(lat, sk, N - 1, res.y, res.q, drv, res.y.level[N - 1], res.q.level[N - 1],
                      fbuf, gbuf);
        std::vector<double> qN = project_q_terminal(lat, sk * d, res.q.level[N - 1]);
        const double change = max_abs_diff(qN, res.q.level[N]);
        res.q.level[N] = std::move(qN);
        res.boundary_iterations = it + 1;
        if (change <= kBoundaryTol) {
            res.boundary_converged = true;
            break;
        }
    }
    // re-run the last step so it is consistent with the settled q_N
    backward_step(lat, sk, N - 1, res.y, res.q, drv, res.y.level[N - 1], res.q.level[N - 1], fbuf,
                  gbuf);
    for (int k = N - 2; k >= 0; --k)
        backward_step(lat, sk, k, res.y, res.q, drv, res.y.level[k], res.q.level[k], fbuf, gbuf);
    return res;
}

ForwardSweepResult forward_sweep(const TwoSidedLattice& lat, int sn, const LevelField& initial,
                                 const ForwardDriver& drv) {
    if (initial.step != 0 || initial.dim != sn)
        throw ShapeError("initial field has wrong step or dimension");
    const int N = lat.N();
    const int lB = lat.dim_b();
    ForwardSweepResult res{AdaptedField(lat, sn), AdaptedField(lat, sn * lB)};
    res.x.level[0] = initial.data;

    std::vector<double> Fbuf, Gbuf;
    res.boundary_converged = false;
    for (int it = 0; it < kBoundaryMaxIter; ++it) {
        forward_step(lat, sn, 0, res.x, res.z, drv, res.x.level[1], res.z.level[1], Fbuf, Gbuf);
        std::vector<double> z0 = project_z_initial(lat, sn * lB, res.z.level[1]);
        const double change = max_abs_diff(z0, res.z.level[0]);
        res.z.level[0] = std::move(z0);
        res.boundary_iterations = it + 1;
        if (change <= kBoundaryTol) {
            res.boundary_converged = true;
            break;
        }
    }
    forward_step(lat, sn, 0, res.x, res.z, drv, res.x.level[1], res.z.level[1], Fbuf, Gbuf);
    for (int k = 1; k < N; ++k)
        forward_step(lat, sn, k, res.x, res.z, drv, res.x.level[k + 1], res.z.level[k + 1], Fbuf,
                     Gbuf);
    return res;
}

double backward_recursion_residual(const AdaptedField& y, const AdaptedField& q,
                                   const BackwardDriver& drv) {
    const TwoSidedLattice& lat = *y.lat;
    const int sk = y.dim;
    std::vector<double> yk, qk, fbuf, gbuf;
    double res = 0.0;
    for (int k = 0; k < lat.N(); ++k) {
        backward_step(lat, sk, k, y, q, drv, yk, qk, fbuf, gbuf);
        for (std::size_t i = 0; i < yk.size(); ++i)
            res = std::max(res, std::abs(yk[i] - y.level[k][i]));
        for (std::size_t i = 0; i < qk.size(); ++i)
            res = std::max(res, std::abs(qk[i] - q.level[k][i]) * lat.dt());
    }
    return res;
}

double forward_recursion_residual(const AdaptedField& x, const AdaptedField& z,
                                  const ForwardDriver& drv) {
    const TwoSidedLattice& lat = *x.lat;
    const int sn = x.dim;
    std::vector<double> xk1, zk1, Fbuf, Gbuf;
    double res = 0.0;
    for (int k = 0; k < lat.N(); ++k) {
        forward_step(lat, sn, k, x, z, drv, xk1, zk1, Fbuf, Gbuf);
        for (std::size_t i = 0; i < xk1.size(); ++i)
            res = std::max(res, std::abs(xk1[i] - x.level[k + 1][i]));
        for (std::size_t i = 0; i < zk1.size(); ++i)
            res = std::max(res, std::abs(zk1[i] - z.level[k + 1][i]) * lat.dt());
    }
    return res;
}

CoupledSolution solve_coupled(const TwoSidedLattice& lat, int sn, int sk,
                              const LevelField& initial, const LevelField& terminal,
                              const CoupledForwardDriver& fdrv, const CoupledBackwardDriver& bdrv,
                              const PicardOptions& opts) {
    const int d = lat.dim_w(), lB = lat.dim_b();
    CoupledSolution sol{AdaptedField(lat, sn), AdaptedField(lat, sn * lB), AdaptedField(lat, sk),
                        AdaptedField(lat, sk * d)};
    sol.x.level[0] = initial.data;
    sol.y.level[lat.N()] = terminal.data;
    double theta = opts.theta;

    // sweeps see the other pair through the current iterate fields
    auto run_forward = [&]() {
        ForwardDriver drv = [&](int k, std::size_t i, const double* x, const double* z, double* F,
                                double* G) { fdrv(k, i, x, z, sol.y.node(k, i), sol.q.node(k, i), F, G); };
        return forward_sweep(lat, sn, initial, drv);
    };
    auto run_backward = [&]() {
        BackwardDriver drv = [&](int kn, std::size_t i, const double* y, const double* q,
                                 double* f, double* g) {
            bdrv(kn, i, y, q, sol.x.node(kn, i), sol.z.node(kn, i), f, g);
        };
        return backward_sweep(lat, sk, terminal, drv);
    };
    auto blend = [&](AdaptedField& cur, const AdaptedField& fresh) {
        double change = 0.0;
        for (int k = 0; k <= lat.N(); ++k)
            for (std::size_t i = 0; i < cur.level[k].size(); ++i) {
                change = std::max(change, std::abs(fresh.level[k][i] - cur.level[k][i]));
                cur.level[k][i] = theta * fresh.level[k][i] + (1.0 - theta) * cur.level[k][i];
            }
        return change;
    };

    for (int it = 0; it < opts.max_iter; ++it) {
        double change = 0.0;
        if (opts.backward_first) {
            BackwardSweepResult b = run_backward();
            change = std::max(blend(sol.y, b.y), blend(sol.q, b.q));
            ForwardSweepResult f = run_forward();
            change = std::max({change, blend(sol.x, f.x), blend(sol.z, f.z)});
        } else {
            ForwardSweepResult f = run_forward();
            change = std::max(blend(sol.x, f.x), blend(sol.z, f.z));
            BackwardSweepResult b = run_backward();
            change = std::max({change, blend(sol.y, b.y), blend(sol.q, b.q)});
        }
        sol.history.push_back(change);
        sol.iterations = it + 1;
        sol.residual = change;
        if (change <= opts.tol) {
            sol.converged = true;
            break;
        }
        const std::size_t h = sol.history.size();
        if (theta > 0.5 && h >= 3 && sol.history[h - 1] > sol.history[h - 2] &&
            sol.history[h - 2] > sol.history[h - 3])
            theta = 0.5;
    }
    sol.theta_used = theta;

    // final unblended pass so the stored fields satisfy the recursions
    if (opts.backward_first) {
        BackwardSweepResult b = run_backward();
        sol.y = std::move(b.y);
        sol.q = std::move(b.q);
        ForwardSweepResult f = run_forward();
        sol.x = std::move(f.x);
        sol.z = std::move(f.z);
    } else {
        ForwardSweepResult f = run_forward();
        sol.x = std::move(f.x);
        sol.z = std::move(f.z);
        BackwardSweepResult b = run_backward();
        sol.y = std::move(b.y);
        sol.q = std::move(b.q);
    }
    return sol;
}

}  // namespace tsfb
