#include "tsfb/bdsde.hpp"

#include <cmath>

namespace tsfb {

namespace {
BackwardDriver make_driver(const BdsdeSpec& spec, const TwoSidedLattice& lat) {
    if (!(spec.lipschitz_alpha < 1.0))
        throw ConfigError("declared Lipschitz alpha must be < 1");
    if (spec.regime == LipschitzRegime::Coupled && !(spec.lipschitz_alpha < 0.5))
        throw ConfigError("coupled regime requires declared alpha < 1/2");
    return [&spec, &lat](int kNext, std::size_t, const double* y, const double* q, double* f,
                         double* g) {
        const double t = lat.t(kNext);
        spec.f(t, y, q, f);
        spec.g(t, y, q, g);
    };
}
}  // namespace

BdsdeSolution solve_bdsde(const BdsdeSpec& spec, const TwoSidedLattice& lat) {
    if (spec.terminal.lat != &lat) throw ShapeError("terminal field lattice mismatch");
    BackwardSweepResult res = backward_sweep(lat, spec.dim, spec.terminal, make_driver(spec, lat));
    return BdsdeSolution{std::move(res.y), std::move(res.q)};
}

double bdsde_residual(const AdaptedField& y, const AdaptedField& q, const BdsdeSpec& spec) {
    const TwoSidedLattice& lat = *y.lat;
    if (y.dim != spec.dim || q.dim != spec.dim * lat.dim_w())
        throw ShapeError("bdsde_residual: dimension mismatch");
    return backward_recursion_residual(y, q, make_driver(spec, lat));
}

}  // namespace tsfb
