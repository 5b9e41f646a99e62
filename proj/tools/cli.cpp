// Command line front end for the lattice laboratory.
//
// Exit codes: 0 ok, 1 configuration error, 2 solver non-convergence,
// 3 invariant violation.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "tsfb/presets.hpp"

using nlohmann::json;
using namespace tsfb;

namespace {

struct RunConfig {
    std::string preset = "paper-3.12";
    int steps = 6;
    double horizon = 1.0;
    double damping = 1.0;
    double tol = 1e-12;
    double epsilon = 1.0;
    double check_tol = 1e-6;
    std::uint64_t seed = 12345;
    int samples = 16;
    std::string sign = "auto";
    std::vector<int> refinement = {4, 6, 8, 10, 12, 14};

    json to_json() const {
        return json{{"preset", preset},       {"steps", steps},     {"horizon", horizon},
                    {"damping", damping},     {"tol", tol},         {"epsilon", epsilon},
                    {"check_tol", check_tol}, {"seed", seed},       {"samples", samples},
                    {"sign", sign},           {"refinement", refinement}};
    }
};

void load_config_file(const std::string& path, RunConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j = json::parse(in);
    for (const auto& [key, value] : j.items()) {
        if (key == "preset") cfg.preset = value.get<std::string>();
        else if (key == "steps") cfg.steps = value.get<int>();
        else if (key == "horizon") cfg.horizon = value.get<double>();
        else if (key == "damping") cfg.damping = value.get<double>();
        else if (key == "tol") cfg.tol = value.get<double>();
        else if (key == "epsilon") cfg.epsilon = value.get<double>();
        else if (key == "check_tol") cfg.check_tol = value.get<double>();
        else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
        else if (key == "samples") cfg.samples = value.get<int>();
        else if (key == "sign") cfg.sign = value.get<std::string>();
        else if (key == "refinement") cfg.refinement = value.get<std::vector<int>>();
        else throw ConfigError("unknown config key: " + key);
    }
}

void validate(const RunConfig& cfg) {
    if (cfg.steps < 1 || cfg.steps > 18) throw ConfigError("steps must be in [1, 18]");
    if (!(cfg.horizon > 0.0)) throw ConfigError("horizon must be positive");
    if (!(cfg.damping > 0.0 && cfg.damping <= 1.0))
        throw ConfigError("damping must be in (0, 1]");
    if (cfg.sign != "auto" && cfg.sign != "plus" && cfg.sign != "minus")
        throw ConfigError("sign must be auto, plus or minus");
    const auto names = preset_names();
    if (std::find(names.begin(), names.end(), cfg.preset) == names.end())
        throw ConfigError("unknown preset: " + cfg.preset);
}

json conventions() {
    return json{
        {"index_packing",
         "level k: W coin bits of steps 0..k-1 low, B coin bits of steps k..N-1 high"},
        {"quadrature", "forward dt/dW terms at the left endpoint, backward dB at the right"},
        {"boundary", "q_N = E[q_{N-1}|F_N], z_0 = E[z_1|F_0] via fixed point"},
        {"flattening", "matrix slots row-major"}};
}

void write_report(const std::string& path, const json& body) {
    if (path.empty()) return;
    std::ofstream out(path);
    out << body.dump(2) << "\n";
}

void write_csv(const std::string& path, const TwoSidedLattice& lat, const FbdsdeSolution& sol) {
    if (path.empty()) return;
    std::ofstream out(path);
    out << std::setprecision(17);
    const int n = sol.x.dim, nz = sol.z.dim, k = sol.y.dim, kq = sol.q.dim;
    out << "k,t,node,w_bits,b_bits";
    for (int c = 0; c < n; ++c) out << ",x" << c;
    for (int c = 0; c < nz; ++c) out << ",z" << c;
    for (int c = 0; c < k; ++c) out << ",y" << c;
    for (int c = 0; c < kq; ++c) out << ",q" << c;
    out << "\n";
    for (int lev = 0; lev <= lat.N(); ++lev) {
        const std::size_t wmask = (std::size_t{1} << (lev * lat.dim_w())) - 1;
        for (std::size_t i = 0; i < lat.level_size(lev); ++i) {
            out << lev << "," << lat.t(lev) << "," << i << "," << (i & wmask) << ","
                << (i >> (lev * lat.dim_w()));
            for (int c = 0; c < n; ++c) out << "," << sol.x.node(lev, i)[c];
            for (int c = 0; c < nz; ++c) out << "," << sol.z.node(lev, i)[c];
            for (int c = 0; c < k; ++c) out << "," << sol.y.node(lev, i)[c];
            for (int c = 0; c < kq; ++c) out << "," << sol.q.node(lev, i)[c];
            out << "\n";
        }
    }
}

FbdsdeSolution solve_preset(const Preset& p, const RunConfig& cfg) {
    SolveOptions opts{cfg.damping, cfg.tol, 200};
    FbdsdeSolution sol = solve_fbdsde(make_state_problem(p.spec, p.base), opts);
    if (!sol.converged) throw std::runtime_error("state solve did not converge");
    return sol;
}

int run(const std::string& command, const RunConfig& cfg, const std::string& out_path,
        const std::string& report_path) {
    TwoSidedLattice lat(cfg.horizon, cfg.steps);
    SolveOptions opts{cfg.damping, cfg.tol, 200};
    json rep{{"command", command}, {"config", cfg.to_json()}, {"conventions", conventions()}};
    std::ostringstream line;
    line << std::setprecision(12);

    if (command == "solve") {
        Preset p = get_preset(cfg.preset, lat);
        FbdsdeSolution sol = solve_preset(p, cfg);
        line << "solve " << cfg.preset << ": iterations=" << sol.iterations
             << " residual=" << sol.residual << " theta=" << sol.theta_used;
        rep["result"] = {{"iterations", sol.iterations},
                         {"residual", sol.residual},
                         {"theta_used", sol.theta_used},
                         {"converged", sol.converged}};
        write_csv(out_path, lat, sol);
    } else if (command == "cost") {
        Preset p = get_preset(cfg.preset, lat);
        FbdsdeSolution sol = solve_preset(p, cfg);
        const double J = evaluate_cost(p.base, p.spec, sol);
        ConstraintResiduals cr = constraint_residuals(p.spec, sol);
        line << "cost " << cfg.preset << ": J=" << J << " psi_residual=" << cr.psi_residual
             << " h_residual=" << cr.h_residual;
        rep["result"] = {{"cost", J},
                         {"psi_residual", cr.psi_residual},
                         {"h_residual", cr.h_residual}};
        write_csv(out_path, lat, sol);
    } else if (command == "adjoint" || command == "mp-check") {
        Preset p = get_preset(cfg.preset, lat);
        FbdsdeSolution sol = solve_preset(p, cfg);
        FrozenCoefficients frozen = freeze(p.spec, sol, p.base.u, p.spec.has_l);
        BoundaryWeights w{1.0, 1.0, std::vector<double>(p.spec.h.out_dim, 0.0),
                          std::vector<double>(p.spec.psi.out_dim, 0.0)};
        AdjointSolution adj = solve_adjoint(frozen, w, p.spec, sol, p.spec.has_l, opts);
        if (!adj.converged) throw std::runtime_error("adjoint solve did not converge");
        if (command == "adjoint") {
            auto sup = [&](const AdaptedField& f) {
                double s = 0.0;
                for (const auto& lv : f.level)
                    for (double v : lv) s = std::max(s, std::abs(v));
                return s;
            };
            line << "adjoint " << cfg.preset << ": |m|=" << sup(adj.m) << " |p|=" << sup(adj.p)
                 << " |n|=" << sup(adj.n) << " |delta|=" << sup(adj.delta);
            rep["result"] = {{"m_sup", sup(adj.m)},
                             {"p_sup", sup(adj.p)},
                             {"n_sup", sup(adj.n)},
                             {"delta_sup", sup(adj.delta)},
                             {"iterations", adj.iterations}};
        } else {
            MpResiduals r =
                mp_residuals(p.spec, p.base, sol, adj, frozen, cfg.samples, cfg.seed);
            rep["result"] = {{"r_xi", r.r_xi},
                             {"r_eta", r.r_eta},
                             {"r_u", r.r_u},
                             {"boundary_ok", r.boundary_ok},
                             {"pass", r.pass(cfg.check_tol)}};
            line << "mp-check " << cfg.preset << ": r_xi=" << r.r_xi << " r_eta=" << r.r_eta
                 << " r_u=" << r.r_u;
            if (!r.pass(cfg.check_tol)) {
                std::string which;
                if (r.r_xi > cfg.check_tol) which = "initial transversality inequality";
                else if (r.r_eta < -cfg.check_tol) which = "terminal transversality inequality";
                else if (r.r_u < -cfg.check_tol) which = "pointwise minimality of the Hamiltonian";
                else which = "boundary sign condition";
                rep["violated"] = which;
                write_report(report_path, rep);
                std::cout << line.str() << "\n";
                std::cerr << "violated: " << which << "\n";
                return 3;
            }
        }
    } else if (command == "ekeland") {
        Preset p = get_preset(cfg.preset, lat);
        FbdsdeSolution sol = solve_preset(p, cfg);
        auto mean_of = [&](const ScalarMap& m, const LevelField& f) {
            double acc = 0.0;
            const std::size_t nn = lat.level_size(f.step);
            for (std::size_t i = 0; i < nn; ++i) acc += m.value(f.node(i));
            return acc / static_cast<double>(nn);
        };
        OptimalReference ref{mean_of(p.spec.phi, sol.x.at(lat.N())),
                             mean_of(p.spec.gamma, sol.y.at(0))};
        DescentOptions dopts;
        dopts.solver = opts;
        DescentResult dr = penalized_descent(p.spec, cfg.epsilon, p.base, ref, dopts);
        Multipliers mult;
        bool have_mult = dr.report.F_eps > 0.0;
        if (have_mult) mult = extract_multipliers(dr.report);
        line << "ekeland " << cfg.preset << ": F_eps " << dr.history.front() << " -> "
             << dr.report.F_eps << " steps=" << dr.history.size() - 1
             << " distance=" << dr.distance_from_start;
        rep["result"] = {{"F_eps_start", dr.history.front()},
                         {"F_eps_end", dr.report.F_eps},
                         {"accepted_steps", dr.history.size() - 1},
                         {"distance_from_start", dr.distance_from_start},
                         {"sqrt_2eps", dr.sqrt_2eps_ball},
                         {"hit_zero", dr.hit_zero}};
        if (have_mult)
            rep["result"]["multiplier_norm"] = mult.norm();
    } else if (command == "lq") {
        Preset p = get_preset(cfg.preset, lat);
        if (!p.lq) throw ConfigError("preset " + cfg.preset + " is not linear-quadratic");
        const int force = cfg.sign == "auto" ? 0 : (cfg.sign == "plus" ? 1 : -1);
        LqResult r = lq_solve(*p.lq, lat, opts, force);
        if (!r.converged) throw std::runtime_error("lq fixed point did not converge");
        line << "lq " << cfg.preset << ": J=" << r.cost << " sign=" << r.sign
             << " stationarity=" << r.stationarity << " iterations=" << r.iterations;
        rep["result"] = {{"cost", r.cost},
                         {"sign", r.sign},
                         {"stationarity", r.stationarity},
                         {"iterations", r.iterations}};
        if (!report_path.empty()) {
            LqVerifyReport v = lq_verify(*p.lq, lat, r, cfg.samples, cfg.seed, opts);
            rep["verify"] = {{"sufficiency_margin", v.sufficiency_margin},
                             {"uniqueness_distance", v.uniqueness_distance},
                             {"grid_best_cost", v.grid_best_cost}};
        }
        write_csv(out_path, lat, r.state);
    } else if (command == "paper-example") {
        PaperExampleReport r = paper_example(cfg.steps, cfg.refinement, opts);
        line << "paper-example: J(0)=" << r.cost_at_zero << " state_sup=" << r.state_sup_at_zero
             << " costate_sup=" << r.costate_sup_at_zero << " Hu_sup=" << r.hu_sup_at_zero;
        std::cout << line.str() << "\n";
        line.str("");
        std::cout << std::setprecision(10) << "N        J(u=1)        J(u=t)\n";
        for (std::size_t i = 0; i < r.refinement_steps.size(); ++i)
            std::cout << r.refinement_steps[i] << "   " << r.cost_u_one[i] << "   "
                      << r.cost_u_ramp[i] << "\n";
        line << "fit: J(u=1) -> " << r.fit_u_one.Jinf << " (order " << r.fit_u_one.p
             << "), J(u=t) -> " << r.fit_u_ramp.Jinf << " (order " << r.fit_u_ramp.p << ")";
        rep["result"] = {{"cost_at_zero", r.cost_at_zero},
                         {"state_sup_at_zero", r.state_sup_at_zero},
                         {"costate_sup_at_zero", r.costate_sup_at_zero},
                         {"hu_sup_at_zero", r.hu_sup_at_zero},
                         {"refinement_steps", r.refinement_steps},
                         {"cost_u_one", r.cost_u_one},
                         {"cost_u_ramp", r.cost_u_ramp},
                         {"fit_u_one", {{"Jinf", r.fit_u_one.Jinf}, {"p", r.fit_u_one.p}}},
                         {"fit_u_ramp", {{"Jinf", r.fit_u_ramp.Jinf}, {"p", r.fit_u_ramp.p}}}};
    } else if (command == "certify") {
        Preset p = get_preset(cfg.preset, lat);
        const double dev = p.spec.coeffs.has_partials
                               ? validate_partials(p.spec.coeffs, cfg.samples, cfg.seed)
                               : 0.0;
        MonotonicityReport mono =
            certify_monotonicity(p.spec.coeffs, p.base.u.node(0, 0), cfg.samples, cfg.seed);
        LipschitzReport lip =
            certify_lipschitz(p.spec.coeffs, p.base.u.node(0, 0), cfg.samples, cfg.seed);
        line << "certify " << cfg.preset << ": partials_dev=" << dev << " mu_hat=" << mono.mu_hat
             << " C_hat=" << lip.C_hat << " alpha_hat=" << lip.alpha_hat;
        rep["result"] = {{"partials_deviation", dev},
                         {"mu_hat", mono.mu_hat},
                         {"monotone", mono.certified},
                         {"C_hat", lip.C_hat},
                         {"alpha_hat", lip.alpha_hat},
                         {"lipschitz_certified", lip.certified}};
        if (dev > 1e-3) {
            write_report(report_path, rep);
            std::cout << line.str() << "\n";
            std::cerr << "violated: declared partials disagree with the coefficients\n";
            return 3;
        }
    } else {
        throw ConfigError("unknown command: " + command);
    }

    std::cout << line.str() << "\n";
    write_report(report_path, rep);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"forward-backward doubly stochastic lattice laboratory"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string config_path, out_path, report_path;
    std::string preset_flag, sign_flag;
    int steps_flag = 0;
    double damping_flag = 0, tol_flag = 0, eps_flag = 0;
    std::uint64_t seed_flag = 0;

    std::vector<std::string> commands = {"solve",   "cost", "adjoint",       "mp-check",
                                         "ekeland", "lq",   "paper-example", "certify"};
    std::vector<CLI::App*> subs;
    for (const auto& c : commands) {
        CLI::App* sub = app.add_subcommand(c);
        sub->add_option("--preset", preset_flag);
        sub->add_option("--config", config_path);
        sub->add_option("--steps", steps_flag);
        sub->add_option("--damping", damping_flag);
        sub->add_option("--tol", tol_flag);
        sub->add_option("--epsilon", eps_flag);
        sub->add_option("--seed", seed_flag);
        sub->add_option("--sign", sign_flag);
        sub->add_option("--out", out_path);
        sub->add_option("--report", report_path);
        subs.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        CLI::App* active = nullptr;
        for (std::size_t i = 0; i < subs.size(); ++i)
            if (subs[i]->parsed()) active = subs[i];
        if (!config_path.empty()) load_config_file(config_path, cfg);
        if (active->count("--preset")) cfg.preset = preset_flag;
        if (active->count("--steps")) cfg.steps = steps_flag;
        if (active->count("--damping")) cfg.damping = damping_flag;
        if (active->count("--tol")) cfg.tol = tol_flag;
        if (active->count("--epsilon")) cfg.epsilon = eps_flag;
        if (active->count("--seed")) cfg.seed = seed_flag;
        if (active->count("--sign")) cfg.sign = sign_flag;
        validate(cfg);
        return run(active->get_name(), cfg, out_path, report_path);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const ShapeError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
