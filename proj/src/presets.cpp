#include "tsfb/presets.hpp"

#include <cmath>

namespace tsfb {

namespace {

LevelField const_level(const TwoSidedLattice& lat, int step, std::vector<double> v) {
    LevelField f(lat, step, static_cast<int>(v.size()));
    for (std::size_t i = 0; i < lat.level_size(step); ++i)
        std::copy(v.begin(), v.end(), f.node(i));
    return f;
}

ControlTriple const_triple(const TwoSidedLattice& lat, const Dims& dims, std::vector<double> xi,
                           std::vector<double> eta, double u) {
    ControlTriple t;
    t.xi = const_level(lat, 0, std::move(xi));
    t.eta = const_level(lat, lat.N(), std::move(eta));
    t.u = constant_control(lat, dims.u_dim(), u);
    return t;
}

LqSpec::MatFn const_mat(Eigen::MatrixXd M) {
    return [M](double) { return M; };
}
LqSpec::MatFn scalar_mat(double v) {
    return const_mat(Eigen::MatrixXd::Constant(1, 1, v));
}

LqSpec lq_scalar_spec() {
    LqSpec lq;
    lq.dims = Dims{1, 1, 1, 1};
    lq.Fc = {scalar_mat(-0.5), nullptr, scalar_mat(0.2), nullptr, scalar_mat(1.0)};
    lq.Gc = {nullptr, nullptr, scalar_mat(0.3), nullptr, scalar_mat(0.5)};
    lq.fc = {scalar_mat(0.2), nullptr, scalar_mat(-0.4), nullptr, scalar_mat(0.4)};
    lq.gc = {scalar_mat(0.25), nullptr, nullptr, nullptr, scalar_mat(0.25)};
    lq.W = {scalar_mat(1.0), scalar_mat(0.5), scalar_mat(1.0), scalar_mat(0.5), scalar_mat(1.0)};
    lq.U = Eigen::MatrixXd::Constant(1, 1, 1.0);
    lq.Q = Eigen::MatrixXd::Constant(1, 1, 1.0);
    lq.x0 = Eigen::VectorXd::Constant(1, 0.5);
    lq.yT = Eigen::VectorXd::Constant(1, 0.3);
    lq.K = ConvexSet::scalar_box(-2.0, 2.0);
    return lq;
}

LqSpec lq_2d_spec() {
    LqSpec lq;
    lq.dims = Dims{2, 2, 1, 1};
    Eigen::MatrixXd A(2, 2), fy(2, 2), Gy(2, 2), Uq(2, 2);
    A << -0.4, 0.1, 0.05, -0.5;
    fy << -0.3, 0.08, 0.04, -0.35;
    Gy << 0.2, 0.05, 0.05, 0.2;
    Uq << 1.0, 0.2, 0.2, 1.0;
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(2, 2);
    lq.Fc = {const_mat(A), nullptr, const_mat(0.15 * I), nullptr, const_mat(I)};
    lq.Gc = {nullptr, nullptr, const_mat(Gy), nullptr, const_mat(0.4 * I)};
    lq.fc = {const_mat(0.15 * I), nullptr, const_mat(fy), nullptr, const_mat(0.3 * I)};
    lq.gc = {const_mat(0.2 * I), nullptr, nullptr, nullptr, const_mat(0.2 * I)};
    lq.W = {const_mat(I), const_mat(0.5 * I), const_mat(I), const_mat(0.5 * I), const_mat(I)};
    lq.U = Uq;
    lq.Q = I;
    lq.x0 = Eigen::VectorXd(2);
    lq.x0 << 0.5, -0.3;
    lq.yT = Eigen::VectorXd(2);
    lq.yT << 0.2, 0.1;
    lq.K = ConvexSet::box({-2.0, -2.0}, {2.0, 2.0});
    return lq;
}

ProblemSpec nonlinear_scalar_spec() {
    Dims dims;
    ProblemSpec spec = make_problem_shell(dims);
    auto constv = [](double v) {
        return Coeff([v](double, const double*, const double*, const double*, const double*,
                         const double*, double* o) { o[0] = v; });
    };
    spec.coeffs.F = [](double, const double* x, const double*, const double* y, const double*,
                       const double* u, double* o) {
        o[0] = -0.5 * x[0] + 0.2 * std::tanh(y[0]) + u[0];
    };
    spec.coeffs.G = [](double, const double* x, const double*, const double* y, const double*,
                       const double* u, double* o) {
        o[0] = 0.3 * y[0] + 0.5 * u[0] + 0.1 * std::sin(x[0]);
    };
    spec.coeffs.f = [](double, const double* x, const double*, const double* y, const double*,
                       const double*, double* o) {
        o[0] = 0.2 * x[0] + 0.05 * y[0] * y[0] * y[0];
    };
    spec.coeffs.g = [](double, const double* x, const double*, const double*, const double*,
                       const double* u, double* o) { o[0] = 0.25 * x[0] + 0.2 * u[0]; };
    for (int v = 0; v < 5; ++v) {
        spec.coeffs.dF[v] = constv(0.0);
        spec.coeffs.dG[v] = constv(0.0);
        spec.coeffs.df[v] = constv(0.0);
        spec.coeffs.dg[v] = constv(0.0);
    }
    spec.coeffs.dF[static_cast<int>(Var::x)] = constv(-0.5);
    spec.coeffs.dF[static_cast<int>(Var::y)] =
        [](double, const double*, const double*, const double* y, const double*, const double*,
           double* o) {
            const double th = std::tanh(y[0]);
            o[0] = 0.2 * (1.0 - th * th);
        };
    spec.coeffs.dF[static_cast<int>(Var::u)] = constv(1.0);
    spec.coeffs.dG[static_cast<int>(Var::x)] =
        [](double, const double* x, const double*, const double*, const double*, const double*,
           double* o) { o[0] = 0.1 * std::cos(x[0]); };
    spec.coeffs.dG[static_cast<int>(Var::y)] = constv(0.3);
    spec.coeffs.dG[static_cast<int>(Var::u)] = constv(0.5);
    spec.coeffs.df[static_cast<int>(Var::x)] = constv(0.2);
    spec.coeffs.df[static_cast<int>(Var::y)] =
        [](double, const double*, const double*, const double* y, const double*, const double*,
           double* o) { o[0] = 0.15 * y[0] * y[0]; };
    spec.coeffs.dg[static_cast<int>(Var::x)] = constv(0.25);
    spec.coeffs.dg[static_cast<int>(Var::u)] = constv(0.2);
    spec.coeffs.has_partials = true;

    spec.l = [](double, const double* x, const double*, const double* y, const double*,
                const double* u, double* o) {
        o[0] = 0.5 * (x[0] * x[0] + y[0] * y[0] + u[0] * u[0]) + 0.1 * x[0] * y[0];
    };
    spec.dl[static_cast<int>(Var::x)] = [](double, const double* x, const double*, const double* y,
                                           const double*, const double*, double* o) {
        o[0] = x[0] + 0.1 * y[0];
    };
    spec.dl[static_cast<int>(Var::z)] = constv(0.0);
    spec.dl[static_cast<int>(Var::y)] = [](double, const double* x, const double*, const double* y,
                                           const double*, const double*, double* o) {
        o[0] = y[0] + 0.1 * x[0];
    };
    spec.dl[static_cast<int>(Var::q)] = constv(0.0);
    spec.dl[static_cast<int>(Var::u)] = [](double, const double*, const double*, const double*,
                                           const double*, const double* u, double* o) {
        o[0] = u[0];
    };
    spec.has_l = true;

    spec.phi.value = [](const double* x) { return 0.5 * x[0] * x[0]; };
    spec.phi.grad = [](const double* x, double* g) { g[0] = x[0]; };
    spec.gamma.value = [](const double* y) { return 0.5 * y[0] * y[0]; };
    spec.gamma.grad = [](const double* y, double* g) { g[0] = y[0]; };
    spec.chi = ScalarMap::zero(1);
    spec.lambda = ScalarMap::zero(1);
    spec.psi = VectorMap::identity(1);
    spec.a = {0.0};
    spec.h = VectorMap::identity(1);
    spec.b = {0.0};
    spec.K1 = ConvexSet::point({0.3});
    spec.K2 = ConvexSet::point({0.1});
    spec.K = ConvexSet::scalar_box(-1.0, 1.0);
    return spec;
}

ProblemSpec bdsde_only_spec() {
    Dims dims;
    ProblemSpec spec = make_problem_shell(dims);
    auto constv = [](double v) {
        return Coeff([v](double, const double*, const double*, const double*, const double*,
                         const double*, double* o) { o[0] = v; });
    };
    spec.coeffs.F = constv(0.0);
    spec.coeffs.G = constv(0.0);
    spec.coeffs.f = [](double, const double*, const double*, const double* y, const double* q,
                       const double* u, double* o) {
        o[0] = -0.3 * y[0] + 0.5 * u[0] + 0.1 * q[0];
    };
    spec.coeffs.g = [](double, const double*, const double*, const double* y, const double*,
                       const double* u, double* o) { o[0] = 0.2 * y[0] + 0.3 * u[0]; };
    for (int v = 0; v < 5; ++v) {
        spec.coeffs.dF[v] = constv(0.0);
        spec.coeffs.dG[v] = constv(0.0);
        spec.coeffs.df[v] = constv(0.0);
        spec.coeffs.dg[v] = constv(0.0);
    }
    spec.coeffs.df[static_cast<int>(Var::y)] = constv(-0.3);
    spec.coeffs.df[static_cast<int>(Var::q)] = constv(0.1);
    spec.coeffs.df[static_cast<int>(Var::u)] = constv(0.5);
    spec.coeffs.dg[static_cast<int>(Var::y)] = constv(0.2);
    spec.coeffs.dg[static_cast<int>(Var::u)] = constv(0.3);
    spec.coeffs.has_partials = true;

    spec.l = [](double, const double*, const double*, const double* y, const double*,
                const double* u, double* o) { o[0] = 0.5 * (y[0] * y[0] + u[0] * u[0]); };
    spec.dl[static_cast<int>(Var::x)] = constv(0.0);
    spec.dl[static_cast<int>(Var::z)] = constv(0.0);
    spec.dl[static_cast<int>(Var::y)] = [](double, const double*, const double*, const double* y,
                                           const double*, const double*, double* o) {
        o[0] = y[0];
    };
    spec.dl[static_cast<int>(Var::q)] = constv(0.0);
    spec.dl[static_cast<int>(Var::u)] = [](double, const double*, const double*, const double*,
                                           const double*, const double* u, double* o) {
        o[0] = u[0];
    };
    spec.has_l = true;

    spec.lambda.value = [](const double* e) { return 0.5 * e[0] * e[0]; };
    spec.lambda.grad = [](const double* e, double* g) { g[0] = e[0]; };
    spec.gamma.value = [](const double* y) { return 0.5 * y[0] * y[0]; };
    spec.gamma.grad = [](const double* y, double* g) { g[0] = y[0]; };
    spec.chi = ScalarMap::zero(1);
    spec.phi = ScalarMap::zero(1);
    spec.psi = VectorMap::identity(1);
    spec.a = {0.0};
    spec.h = VectorMap::identity(1);
    spec.b = {0.0};
    spec.K1 = ConvexSet::point({0.0});
    spec.K2 = ConvexSet::scalar_box(-1.0, 1.0);
    spec.K = ConvexSet::scalar_box(-1.0, 1.0);
    return spec;
}

ClassicalSpec classical_affine_spec() {
    ClassicalSpec cs;
    cs.dims = Dims{1, 1, 1, 1};
    cs.bbar = [](double, const double* y, const double* u, double* o) {
        o[0] = -0.3 * y[0] + 0.4 * u[0];
    };
    cs.Sigma = [](double, const double*, double* o) { o[0] = 1.0; };
    cs.sigma0 = [](double, const double* y, double* o) { o[0] = 0.2 * y[0]; };
    cs.fbar = [](double, const double* x, const double*, const double* y, const double*,
                 double* o) { o[0] = 0.25 * x[0] + 0.2 * y[0]; };
    cs.gbar = [](double, const double* x, const double*, const double*, const double* u,
                 double* o) { o[0] = 0.2 * x[0] + 0.1 * u[0]; };
    cs.lbar = [](double, const double* x, const double*, const double* y, const double* u) {
        return 0.5 * (x[0] * x[0] + (y[0] - 0.5) * (y[0] - 0.5) + u[0] * u[0]);
    };
    cs.chi.value = [](const double* x) { return 0.5 * x[0] * x[0]; };
    cs.chi.grad = [](const double* x, double* g) { g[0] = x[0]; };
    cs.lambda = ScalarMap::zero(1);
    cs.phi.value = [](const double* x) { return 0.5 * x[0] * x[0]; };
    cs.phi.grad = [](const double* x, double* g) { g[0] = x[0]; };
    cs.b = {0.2};
    cs.K1 = ConvexSet::scalar_box(-1.0, 1.0);
    cs.K2 = ConvexSet::scalar_box(-1.0, 1.0);
    cs.bijection_margin = 1.0;
    return cs;
}

}  // namespace

std::vector<std::string> preset_names() {
    return {"paper-3.12",    "lq-scalar", "lq-2d",           "nonlinear-scalar",
            "linear-scalar", "lq-scalar-suboptimal", "app-3.1-affine", "app-3.2-linear"};
}

Preset get_preset(const std::string& name, const TwoSidedLattice& lat) {
    Preset p;
    p.name = name;
    if (name == "paper-3.12") {
        p.description = "scalar bilinear pair with indefinite running cost; zero is optimal";
        p.dims = Dims{1, 1, 1, 1};
        p.spec = worked_example_spec();
        p.base = const_triple(lat, p.dims, {0.0}, {0.0}, 0.0);
    } else if (name == "lq-scalar" || name == "lq-scalar-suboptimal") {
        p.description = name == "lq-scalar"
                            ? "scalar linear-quadratic problem"
                            : "scalar linear-quadratic problem started at u = 0.5";
        LqSpec lq = lq_scalar_spec();
        p.dims = lq.dims;
        p.spec = lq_problem_spec(lq);
        const double u0 = name == "lq-scalar" ? 0.0 : 0.5;
        p.base = lq_base_triple(lq, lat, constant_control(lat, lq.dims.u_dim(), u0));
        p.lq = std::move(lq);
    } else if (name == "lq-2d") {
        p.description = "two-dimensional linear-quadratic problem with scalar drivers";
        LqSpec lq = lq_2d_spec();
        p.dims = lq.dims;
        p.spec = lq_problem_spec(lq);
        p.base = lq_base_triple(lq, lat, constant_control(lat, lq.dims.u_dim(), 0.0));
        p.lq = std::move(lq);
    } else if (name == "nonlinear-scalar") {
        p.description = "scalar pair with tanh/cubic perturbations";
        p.dims = Dims{1, 1, 1, 1};
        p.spec = nonlinear_scalar_spec();
        p.base = const_triple(lat, p.dims, {0.3}, {0.1}, 0.2);
    } else if (name == "linear-scalar") {
        p.description = "scalar linear dynamics with quadratic cost, off-optimal base";
        LqSpec lq = lq_scalar_spec();
        p.dims = lq.dims;
        p.spec = lq_problem_spec(lq);
        p.base = lq_base_triple(lq, lat, constant_control(lat, lq.dims.u_dim(), 0.2));
        p.lq = std::move(lq);
    } else if (name == "app-3.1-affine") {
        p.description = "classical diffusion-controlled system in backward form";
        ClassicalSpec cs = classical_affine_spec();
        p.dims = cs.dims;
        p.spec = to_backward_formulation(cs);
        p.base = const_triple(lat, p.dims, {0.1}, {0.3}, 0.0);
        p.classical = std::move(cs);
    } else if (name == "app-3.2-linear") {
        p.description = "backward pair with inert forward block";
        p.dims = Dims{1, 1, 1, 1};
        p.spec = bdsde_only_spec();
        p.base = const_triple(lat, p.dims, {0.0}, {0.4}, 0.3);
    } else {
        throw ConfigError("unknown preset: " + name);
    }
    return p;
}

}  // namespace tsfb
