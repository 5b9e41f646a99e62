#include "tsfb/lattice.hpp"

#include <cmath>
#include <cstdlib>

namespace tsfb {

namespace {
constexpr int kMaxLevelBits = 22;   // dense per-level tables
constexpr int kMaxTotalBits = 24;   // full-outcome tables (integral helpers)

void check_same_lattice(const void* a, const void* b) {
    if (a != b) throw ShapeError("fields live on different lattices");
}
}  // namespace

TwoSidedLattice::TwoSidedLattice(double horizon, int steps, int dim_w, int dim_b)
    : T_(horizon), N_(steps), d_(dim_w), lB_(dim_b) {
    if (!(horizon > 0.0)) throw ConfigError("horizon must be positive");
    if (steps < 1) throw ConfigError("steps must be >= 1");
    if (steps > 18) throw ConfigError("steps exceed the N <= 18 cap");
    if (dim_w < 1 || dim_b < 1) throw ConfigError("driver dimensions must be >= 1");
    for (int k = 0; k < steps; ++k) {
        if (junction_bits(k) > kMaxLevelBits)
            throw ConfigError("lattice junction table exceeds the size cap");
    }
    dt_ = horizon / steps;
    s_ = std::sqrt(dt_);
}

std::vector<double> expectation(const LevelField& f) {
    std::vector<double> out(f.dim, 0.0);
    const std::size_t n = f.lat->level_size(f.step);
    for (std::size_t i = 0; i < n; ++i)
        for (int c = 0; c < f.dim; ++c) out[c] += f.node(i)[c];
    const double w = 1.0 / static_cast<double>(n);
    for (double& v : out) v *= w;
    return out;
}

std::vector<double> expectation(const FullField& f) {
    std::vector<double> out(f.dim, 0.0);
    const std::size_t n = std::size_t{1} << f.lat->total_bits();
    for (std::size_t o = 0; o < n; ++o)
        for (int c = 0; c < f.dim; ++c) out[c] += f.node(o)[c];
    const double w = 1.0 / static_cast<double>(n);
    for (double& v : out) v *= w;
    return out;
}

std::vector<double> expectation(const AdaptedField& f, int k) {
    if (k < 0 || k > f.lat->N()) throw ShapeError("step out of range");
    std::vector<double> out(f.dim, 0.0);
    const std::size_t n = f.lat->level_size(k);
    for (std::size_t i = 0; i < n; ++i)
        for (int c = 0; c < f.dim; ++c) out[c] += f.node(k, i)[c];
    const double w = 1.0 / static_cast<double>(n);
    for (double& v : out) v *= w;
    return out;
}

LevelField condexp_drop_w(const JunctionTable& jt) {
    const TwoSidedLattice& lat = *jt.lat;
    const int k = jt.step;
    LevelField out(lat, k, jt.dim, 0.0);
    const std::size_t jn = lat.junction_size(k);
    const double w = 1.0 / static_cast<double>(std::size_t{1} << lat.dim_w());
    for (std::size_t j = 0; j < jn; ++j) {
        double* dst = out.node(lat.junction_to_level(k, j));
        const double* src = jt.node(j);
        for (int c = 0; c < jt.dim; ++c) dst[c] += w * src[c];
    }
    return out;
}

LevelField condexp_drop_b(const JunctionTable& jt) {
    const TwoSidedLattice& lat = *jt.lat;
    const int k = jt.step;
    LevelField out(lat, k + 1, jt.dim, 0.0);
    const std::size_t jn = lat.junction_size(k);
    const double w = 1.0 / static_cast<double>(std::size_t{1} << lat.dim_b());
    for (std::size_t j = 0; j < jn; ++j) {
        double* dst = out.node(lat.junction_to_level_next(k, j));
        const double* src = jt.node(j);
        for (int c = 0; c < jt.dim; ++c) dst[c] += w * src[c];
    }
    return out;
}

LevelField condexp_drop_w_weighted(const JunctionTable& jt, int coord) {
    const TwoSidedLattice& lat = *jt.lat;
    const int k = jt.step;
    if (coord < 0 || coord >= lat.dim_w()) throw ShapeError("dW coordinate out of range");
    LevelField out(lat, k, jt.dim, 0.0);
    const std::size_t jn = lat.junction_size(k);
    const double w = 1.0 / static_cast<double>(std::size_t{1} << lat.dim_w());
    for (std::size_t j = 0; j < jn; ++j) {
        const double m = w * lat.dW(k, j, coord);
        double* dst = out.node(lat.junction_to_level(k, j));
        const double* src = jt.node(j);
        for (int c = 0; c < jt.dim; ++c) dst[c] += m * src[c];
    }
    return out;
}

LevelField condexp_drop_b_weighted(const JunctionTable& jt, int coord) {
    const TwoSidedLattice& lat = *jt.lat;
    const int k = jt.step;
    if (coord < 0 || coord >= lat.dim_b()) throw ShapeError("dB coordinate out of range");
    LevelField out(lat, k + 1, jt.dim, 0.0);
    const std::size_t jn = lat.junction_size(k);
    const double w = 1.0 / static_cast<double>(std::size_t{1} << lat.dim_b());
    for (std::size_t j = 0; j < jn; ++j) {
        const double m = w * lat.dB(k, j, coord);
        double* dst = out.node(lat.junction_to_level_next(k, j));
        const double* src = jt.node(j);
        for (int c = 0; c < jt.dim; ++c) dst[c] += m * src[c];
    }
    return out;
}

FullField embed(const LevelField& f) {
    const TwoSidedLattice& lat = *f.lat;
    if (lat.total_bits() > kMaxTotalBits)
        throw ConfigError("full-outcome table exceeds the size cap");
    FullField out(lat, f.dim);
    const std::size_t n = std::size_t{1} << lat.total_bits();
    for (std::size_t o = 0; o < n; ++o) {
        const double* src = f.node(lat.full_to_level(f.step, o));
        double* dst = out.node(o);
        for (int c = 0; c < f.dim; ++c) dst[c] = src[c];
    }
    return out;
}

bool is_measurable_at(const FullField& f, int k, double tol) {
    const TwoSidedLattice& lat = *f.lat;
    const std::size_t n = std::size_t{1} << lat.total_bits();
    // hidden coins at step k: W coins of steps k..N-1 and B coins of steps 0..k-1
    std::vector<int> hidden;
    for (int j = k * lat.dim_w(); j < lat.N() * lat.dim_w(); ++j) hidden.push_back(j);
    for (int j = 0; j < k * lat.dim_b(); ++j) hidden.push_back(lat.N() * lat.dim_w() + j);
    for (std::size_t o = 0; o < n; ++o) {
        for (int bit : hidden) {
            const std::size_t o2 = o ^ (std::size_t{1} << bit);
            for (int c = 0; c < f.dim; ++c)
                if (std::abs(f.node(o)[c] - f.node(o2)[c]) > tol) return false;
        }
    }
    return true;
}

std::vector<FullField> forward_ito_integral(const AdaptedField& integrand) {
    const TwoSidedLattice& lat = *integrand.lat;
    if (lat.total_bits() > kMaxTotalBits)
        throw ConfigError("full-outcome table exceeds the size cap");
    const int d = lat.dim_w();
    if (integrand.dim % d != 0) throw ShapeError("integrand dim must be a multiple of dim_w");
    const int m = integrand.dim / d;
    const std::size_t n = std::size_t{1} << lat.total_bits();
    std::vector<FullField> out;
    out.reserve(lat.N() + 1);
    out.emplace_back(lat, m, 0.0);
    for (int k = 0; k < lat.N(); ++k) {
        FullField next(lat, m);
        for (std::size_t o = 0; o < n; ++o) {
            const double* g = integrand.node(k, lat.full_to_level(k, o));
            const double* prev = out[k].node(o);
            double* dst = next.node(o);
            for (int r = 0; r < m; ++r) {
                double acc = prev[r];
                for (int c = 0; c < d; ++c) acc += g[r * d + c] * lat.full_dW(k, o, c);
                dst[r] = acc;
            }
        }
        out.push_back(std::move(next));
    }
    return out;
}

std::vector<FullField> backward_ito_integral(const AdaptedField& integrand) {
    const TwoSidedLattice& lat = *integrand.lat;
    if (lat.total_bits() > kMaxTotalBits)
        throw ConfigError("full-outcome table exceeds the size cap");
    const int lB = lat.dim_b();
    if (integrand.dim % lB != 0) throw ShapeError("integrand dim must be a multiple of dim_b");
    const int m = integrand.dim / lB;
    const std::size_t n = std::size_t{1} << lat.total_bits();
    std::vector<FullField> out(lat.N() + 1);
    out[lat.N()] = FullField(lat, m, 0.0);
    for (int k = lat.N() - 1; k >= 0; --k) {
        FullField cur(lat, m);
        for (std::size_t o = 0; o < n; ++o) {
            const double* g = integrand.node(k + 1, lat.full_to_level(k + 1, o));
            const double* nxt = out[k + 1].node(o);
            double* dst = cur.node(o);
            for (int r = 0; r < m; ++r) {
                double acc = nxt[r];
                for (int c = 0; c < lB; ++c) acc += g[r * lB + c] * lat.full_dB(k, o, c);
                dst[r] = acc;
            }
        }
        out[k] = std::move(cur);
    }
    return out;
}

IncrementParts decompose_increments(const AdaptedField& alpha) {
    const TwoSidedLattice& lat = *alpha.lat;
    const int m = alpha.dim;
    const int d = lat.dim_w(), lB = lat.dim_b();
    const double dt = lat.dt();
    IncrementParts parts{AdaptedField(lat, m, 0.0), AdaptedField(lat, m * lB, 0.0),
                         AdaptedField(lat, m * d, 0.0)};
    for (int k = 0; k < lat.N(); ++k) {
        const std::size_t jn = lat.junction_size(k);
        JunctionTable inc(lat, k, m);
        for (std::size_t j = 0; j < jn; ++j) {
            const double* a1 = alpha.node(k + 1, lat.junction_to_level_next(k, j));
            const double* a0 = alpha.node(k, lat.junction_to_level(k, j));
            double* dst = inc.node(j);
            for (int c = 0; c < m; ++c) dst[c] = a1[c] - a0[c];
        }
        // gamma_{k+1}: conditional moment against dB_k given F_{t_{k+1}}
        for (int c = 0; c < lB; ++c) {
            LevelField gc = condexp_drop_b_weighted(inc, c);
            for (std::size_t i = 0; i < lat.level_size(k + 1); ++i)
                for (int r = 0; r < m; ++r)
                    parts.gamma.node(k + 1, i)[r * lB + c] = gc.node(i)[r] / dt;
        }
        // subtract the gamma part, then split the remainder into beta and delta
        JunctionTable rem(lat, k, m);
        for (std::size_t j = 0; j < jn; ++j) {
            const double* g = parts.gamma.node(k + 1, lat.junction_to_level_next(k, j));
            const double* src = inc.node(j);
            double* dst = rem.node(j);
            for (int r = 0; r < m; ++r) {
                double acc = src[r];
                for (int c = 0; c < lB; ++c) acc -= g[r * lB + c] * lat.dB(k, j, c);
                dst[r] = acc;
            }
        }
        for (int c = 0; c < d; ++c) {
            LevelField dc = condexp_drop_w_weighted(rem, c);
            for (std::size_t i = 0; i < lat.level_size(k); ++i)
                for (int r = 0; r < m; ++r)
                    parts.delta.node(k, i)[r * d + c] = dc.node(i)[r] / dt;
        }
        LevelField bc = condexp_drop_w(rem);
        for (std::size_t i = 0; i < lat.level_size(k); ++i)
            for (int r = 0; r < m; ++r) parts.beta.node(k, i)[r] = bc.node(i)[r] / dt;
    }
    return parts;
}

EnergyReport ito_energy_check(const AdaptedField& alpha, const AdaptedField& beta,
                              const AdaptedField& gamma, const AdaptedField& delta,
                              double dynamics_tol) {
    const TwoSidedLattice& lat = *alpha.lat;
    check_same_lattice(alpha.lat, beta.lat);
    check_same_lattice(alpha.lat, gamma.lat);
    check_same_lattice(alpha.lat, delta.lat);
    const int m = alpha.dim;
    const int d = lat.dim_w(), lB = lat.dim_b();
    if (beta.dim != m || gamma.dim != m * lB || delta.dim != m * d)
        throw ShapeError("energy check: field dimensions inconsistent");
    const double dt = lat.dt();

    EnergyReport rep;
    // dynamics precondition at every junction node
    for (int k = 0; k < lat.N(); ++k) {
        const std::size_t jn = lat.junction_size(k);
        for (std::size_t j = 0; j < jn; ++j) {
            const std::size_t i0 = lat.junction_to_level(k, j);
            const std::size_t i1 = lat.junction_to_level_next(k, j);
            for (int r = 0; r < m; ++r) {
                double v = alpha.node(k + 1, i1)[r] - alpha.node(k, i0)[r] -
                           beta.node(k, i0)[r] * dt;
                for (int c = 0; c < lB; ++c)
                    v -= gamma.node(k + 1, i1)[r * lB + c] * lat.dB(k, j, c);
                for (int c = 0; c < d; ++c)
                    v -= delta.node(k, i0)[r * d + c] * lat.dW(k, j, c);
                const double av = std::abs(v);
                if (av > rep.max_dynamics_violation) rep.max_dynamics_violation = av;
            }
        }
    }
    rep.dynamics_ok = rep.max_dynamics_violation <= dynamics_tol;

    auto e_sq = [&](const AdaptedField& f, int k) {
        double acc = 0.0;
        const std::size_t n = lat.level_size(k);
        for (std::size_t i = 0; i < n; ++i)
            for (int c = 0; c < f.dim; ++c) acc += f.node(k, i)[c] * f.node(k, i)[c];
        return acc / static_cast<double>(n);
    };
    auto e_dot_ab = [&](int k) {
        double acc = 0.0;
        const std::size_t n = lat.level_size(k);
        for (std::size_t i = 0; i < n; ++i)
            for (int c = 0; c < m; ++c) acc += alpha.node(k, i)[c] * beta.node(k, i)[c];
        return acc / static_cast<double>(n);
    };

    const double e0 = e_sq(alpha, 0);
    double run = e0;
    rep.residual.resize(lat.N() + 1);
    rep.residual[0] = 0.0;
    for (int k = 0; k < lat.N(); ++k) {
        run += (2.0 * e_dot_ab(k) - e_sq(gamma, k + 1) + e_sq(delta, k)) * dt;
        rep.residual[k + 1] = std::abs(e_sq(alpha, k + 1) - run);
        if (rep.residual[k + 1] > rep.max_residual) rep.max_residual = rep.residual[k + 1];
    }
    return rep;
}

}  // namespace tsfb
