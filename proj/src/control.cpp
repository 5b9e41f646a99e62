#include "tsfb/control.hpp"

#include <algorithm>
#include <cmath>

namespace tsfb {

ConvexSet ConvexSet::box(std::vector<double> lo, std::vector<double> hi) {
    if (lo.size() != hi.size() || lo.empty()) throw ConfigError("malformed box descriptor");
    for (std::size_t i = 0; i < lo.size(); ++i)
        if (lo[i] > hi[i]) throw ConfigError("box has lo > hi");
    ConvexSet s;
    s.kind = Kind::Box;
    s.lo = std::move(lo);
    s.hi = std::move(hi);
    return s;
}

ConvexSet ConvexSet::ball(std::vector<double> center, double radius) {
    if (center.empty() || radius < 0.0) throw ConfigError("malformed ball descriptor");
    ConvexSet s;
    s.kind = Kind::Ball;
    s.center = std::move(center);
    s.radius = radius;
    return s;
}

ConvexSet ConvexSet::point(std::vector<double> value) {
    std::vector<double> hi = value;
    return box(std::move(value), std::move(hi));
}

int ConvexSet::dim() const {
    return kind == Kind::Box ? static_cast<int>(lo.size()) : static_cast<int>(center.size());
}

void ConvexSet::project(const double* p, double* out) const {
    const int m = dim();
    if (kind == Kind::Box) {
        for (int i = 0; i < m; ++i) out[i] = std::clamp(p[i], lo[i], hi[i]);
    } else {
        double nrm = 0.0;
        for (int i = 0; i < m; ++i) nrm += (p[i] - center[i]) * (p[i] - center[i]);
        nrm = std::sqrt(nrm);
        if (nrm <= radius) {
            std::copy(p, p + m, out);
        } else {
            const double scale = radius / nrm;
            for (int i = 0; i < m; ++i) out[i] = center[i] + scale * (p[i] - center[i]);
        }
    }
}

bool ConvexSet::contains(const double* p, double tol) const {
    const int m = dim();
    if (kind == Kind::Box) {
        for (int i = 0; i < m; ++i)
            if (p[i] < lo[i] - tol || p[i] > hi[i] + tol) return false;
        return true;
    }
    double nrm = 0.0;
    for (int i = 0; i < m; ++i) nrm += (p[i] - center[i]) * (p[i] - center[i]);
    return std::sqrt(nrm) <= radius + tol;
}

bool ConvexSet::on_boundary(const double* p, double tol) const {
    const int m = dim();
    if (!contains(p, tol)) return false;
    if (kind == Kind::Box) {
        for (int i = 0; i < m; ++i)
            if (std::abs(p[i] - lo[i]) <= tol || std::abs(p[i] - hi[i]) <= tol) return true;
        return false;
    }
    double nrm = 0.0;
    for (int i = 0; i < m; ++i) nrm += (p[i] - center[i]) * (p[i] - center[i]);
    return std::abs(std::sqrt(nrm) - radius) <= tol;
}

double ConvexSet::diameter() const {
    if (kind == Kind::Ball) return 2.0 * radius;
    double s = 0.0;
    for (std::size_t i = 0; i < lo.size(); ++i) s += (hi[i] - lo[i]) * (hi[i] - lo[i]);
    return std::sqrt(s);
}

ScalarMap ScalarMap::zero(int dim) {
    ScalarMap m;
    m.value = [](const double*) { return 0.0; };
    m.grad = [dim](const double*, double* out) { std::fill(out, out + dim, 0.0); };
    return m;
}

VectorMap VectorMap::identity(int dim) {
    VectorMap m;
    m.out_dim = dim;
    m.value = [dim](const double* p, double* out) { std::copy(p, p + dim, out); };
    m.jacobian = [dim](const double*, double* out) {
        std::fill(out, out + dim * dim, 0.0);
        for (int i = 0; i < dim; ++i) out[i * dim + i] = 1.0;
    };
    return m;
}

ProblemSpec make_problem_shell(const Dims& dims) {
    ProblemSpec spec;
    spec.coeffs.dims = dims;
    auto zero_out = [](int m) {
        return [m](double, const double*, const double*, const double*, const double*,
                   const double*, double* out) { std::fill(out, out + m, 0.0); };
    };
    spec.coeffs.F = zero_out(dims.x_dim());
    spec.coeffs.G = zero_out(dims.n * dims.d);
    spec.coeffs.f = zero_out(dims.y_dim());
    spec.coeffs.g = zero_out(dims.k * dims.lB);
    for (Var v : {Var::x, Var::z, Var::y, Var::q, Var::u}) {
        const int vd = var_dim(dims, v);
        spec.coeffs.dF[static_cast<int>(v)] = zero_out(dims.x_dim() * vd);
        spec.coeffs.dG[static_cast<int>(v)] = zero_out(dims.n * dims.d * vd);
        spec.coeffs.df[static_cast<int>(v)] = zero_out(dims.y_dim() * vd);
        spec.coeffs.dg[static_cast<int>(v)] = zero_out(dims.k * dims.lB * vd);
        spec.dl[static_cast<int>(v)] = zero_out(vd);
    }
    spec.coeffs.has_partials = true;
    spec.l = zero_out(1);
    spec.has_l = false;
    spec.chi = ScalarMap::zero(dims.n);
    spec.lambda = ScalarMap::zero(dims.k);
    spec.phi = ScalarMap::zero(dims.n);
    spec.gamma = ScalarMap::zero(dims.k);
    spec.psi = VectorMap::identity(dims.n);
    spec.h = VectorMap::identity(dims.k);
    spec.a.assign(dims.n, 0.0);
    spec.b.assign(dims.k, 0.0);
    spec.K1 = ConvexSet::box(std::vector<double>(dims.n, -1.0), std::vector<double>(dims.n, 1.0));
    spec.K2 = ConvexSet::box(std::vector<double>(dims.k, -1.0), std::vector<double>(dims.k, 1.0));
    spec.K = ConvexSet::box(std::vector<double>(dims.u_dim(), -1.0),
                            std::vector<double>(dims.u_dim(), 1.0));
    return spec;
}

bool is_admissible(const ControlTriple& triple, const ProblemSpec& spec, double tol) {
    const TwoSidedLattice& lat = *triple.xi.lat;
    for (std::size_t i = 0; i < lat.level_size(0); ++i)
        if (!spec.K1.contains(triple.xi.node(i), tol)) return false;
    for (std::size_t i = 0; i < lat.level_size(lat.N()); ++i)
        if (!spec.K2.contains(triple.eta.node(i), tol)) return false;
    for (int k = 0; k <= lat.N(); ++k)
        for (std::size_t i = 0; i < lat.level_size(k); ++i)
            if (!spec.K.contains(triple.u.node(k, i), tol)) return false;
    return true;
}

FbdsdeProblem make_state_problem(const ProblemSpec& spec, const ControlTriple& triple) {
    FbdsdeProblem p;
    p.coeffs = spec.coeffs;
    p.xi = triple.xi;
    p.eta = triple.eta;
    p.u = triple.u;
    return p;
}

double evaluate_cost(const ControlTriple& triple, const ProblemSpec& spec,
                     const FbdsdeSolution& sol) {
    const TwoSidedLattice& lat = *triple.xi.lat;
    const double dt = lat.dt();
    double J = 0.0;
    if (spec.has_l) {
        for (int k = 0; k < lat.N(); ++k) {
            const std::size_t n = lat.level_size(k);
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double lv = 0.0;
                spec.l(lat.t(k), sol.x.node(k, i), sol.z.node(k, i), sol.y.node(k, i),
                       sol.q.node(k, i), triple.u.node(k, i), &lv);
                acc += lv;
            }
            J += dt * acc / static_cast<double>(n);
        }
    }
    auto mean_of = [&](const ScalarMap& m, const LevelField& f) {
        const std::size_t n = f.lat->level_size(f.step);
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += m.value(f.node(i));
        return acc / static_cast<double>(n);
    };
    J += mean_of(spec.chi, triple.xi);
    J += mean_of(spec.lambda, triple.eta);
    J += mean_of(spec.phi, sol.x.at(lat.N()));
    J += mean_of(spec.gamma, sol.y.at(0));
    return J;
}

ConstraintResiduals constraint_residuals(const ProblemSpec& spec, const FbdsdeSolution& sol) {
    const TwoSidedLattice& lat = *sol.x.lat;
    ConstraintResiduals res;
    res.psi_gap.assign(spec.psi.out_dim, 0.0);
    res.h_gap.assign(spec.h.out_dim, 0.0);

    std::vector<double> buf(std::max(spec.psi.out_dim, spec.h.out_dim));
    const std::size_t nN = lat.level_size(lat.N());
    for (std::size_t i = 0; i < nN; ++i) {
        spec.psi.value(sol.x.node(lat.N(), i), buf.data());
        for (int c = 0; c < spec.psi.out_dim; ++c) res.psi_gap[c] += buf[c];
    }
    const std::size_t n0 = lat.level_size(0);
    for (std::size_t i = 0; i < n0; ++i) {
        spec.h.value(sol.y.node(0, i), buf.data());
        for (int c = 0; c < spec.h.out_dim; ++c) res.h_gap[c] += buf[c];
    }
    double s = 0.0;
    for (int c = 0; c < spec.psi.out_dim; ++c) {
        res.psi_gap[c] = res.psi_gap[c] / static_cast<double>(nN) - spec.a[c];
        s += res.psi_gap[c] * res.psi_gap[c];
    }
    res.psi_residual = std::sqrt(s);
    s = 0.0;
    for (int c = 0; c < spec.h.out_dim; ++c) {
        res.h_gap[c] = res.h_gap[c] / static_cast<double>(n0) - spec.b[c];
        s += res.h_gap[c] * res.h_gap[c];
    }
    res.h_residual = std::sqrt(s);
    return res;
}

AdaptedField control_from_time_function(const TwoSidedLattice& lat, int dim,
                                        const std::function<void(double, double*)>& fn) {
    AdaptedField u(lat, dim);
    std::vector<double> v(dim);
    for (int k = 0; k <= lat.N(); ++k) {
        fn(lat.t(k), v.data());
        for (std::size_t i = 0; i < lat.level_size(k); ++i)
            std::copy(v.begin(), v.end(), u.node(k, i));
    }
    return u;
}

AdaptedField constant_control(const TwoSidedLattice& lat, int dim, double value) {
    return AdaptedField(lat, dim, value);
}

}  // namespace tsfb
