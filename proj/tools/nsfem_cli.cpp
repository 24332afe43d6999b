// Command-line front end: parameter studies and verification reports.
//
// Subcommands: solve, convergence, infsup, equivalence, project-stability,
// stability.  Options can come from flags or from a key = value config file
// (flags win).  Artifacts are written to the output directory; the exit code
// is 0 exactly when every evaluated check passes.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "nsfem/verification.hpp"

using namespace nsfem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "nsfem 1.0.0";

struct Options {
    std::string pair = "taylor-hood";
    std::string solution = "stream_vortex";
    std::string coupling = "dt-h2";
    std::string out_dir = ".";
    int level = 8;       // single-mesh commands
    int levels = 3;      // sweep commands: n = 4, 8, 16, ...
    double nu = 1.0;
    double dt = 0.05;
    int n_steps = 20;
    double t_star = 1.0;
    double fixed_dt = 0.01;
    int quad_degree = kDefaultQuadratureDegree;
    unsigned seed = 42;
};

SpacePair parse_pair(const std::string& name) {
    if (name == "taylor-hood") return SpacePair::TaylorHood;
    if (name == "mini") return SpacePair::MINI;
    if (name == "p1p1") return SpacePair::P1P1;
    throw CLI::ValidationError("--pair", "unknown element pair: " + name);
}

std::vector<int> sweep_levels(int count) {
    std::vector<int> out;
    for (int i = 0, n = 4; i < count; ++i, n *= 2) out.push_back(n);
    return out;
}

void echo_config(const std::string& subcommand, const Options& opt) {
    std::printf("%s\n", kVersion);
    std::printf("resolved config:\n");
    std::printf("  subcommand = %s\n", subcommand.c_str());
    std::printf("  pair = %s\n", opt.pair.c_str());
    std::printf("  solution = %s\n", opt.solution.c_str());
    std::printf("  coupling = %s\n", opt.coupling.c_str());
    std::printf("  out = %s\n", opt.out_dir.c_str());
    std::printf("  level = %d\n", opt.level);
    std::printf("  levels = %d\n", opt.levels);
    std::printf("  nu = %g\n", opt.nu);
    std::printf("  dt = %g\n", opt.dt);
    std::printf("  n_steps = %d\n", opt.n_steps);
    std::printf("  t_star = %g\n", opt.t_star);
    std::printf("  fixed_dt = %g\n", opt.fixed_dt);
    std::printf("  quad_degree = %d\n", opt.quad_degree);
    std::printf("  seed = %u\n", opt.seed);
}

json config_json(const std::string& subcommand, const Options& opt) {
    return json{{"version", kVersion},     {"subcommand", subcommand},
                {"pair", opt.pair},        {"solution", opt.solution},
                {"coupling", opt.coupling},{"level", opt.level},
                {"levels", opt.levels},    {"nu", opt.nu},
                {"dt", opt.dt},            {"n_steps", opt.n_steps},
                {"t_star", opt.t_star},    {"fixed_dt", opt.fixed_dt},
                {"quad_degree", opt.quad_degree}, {"seed", opt.seed}};
}

void write_json(const json& j, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << j.dump(2) << "\n";
    std::printf("wrote %s\n", path.string().c_str());
}

json check_json(const InequalityCheck& c) {
    return json{{"name", c.name},     {"lhs", c.lhs},   {"rhs", c.rhs},
                {"margin", c.margin}, {"pass", c.pass}, {"calibrated", c.calibrated}};
}

// solve + stability share the trajectory machinery.
int run_stability(const std::string& subcommand, const Options& opt, bool write_trajectory) {
    const std::filesystem::path dir(opt.out_dir);
    std::filesystem::create_directories(dir);
    const FESpacePair space =
        build_space(generate_structured_square(opt.level), parse_pair(opt.pair));

    SolverConfig cfg;
    cfg.nu = opt.nu;
    cfg.dt = opt.dt;
    cfg.n_steps = opt.n_steps;
    cfg.quad_degree = opt.quad_degree;
    if (opt.solution != "none") {
        const ManufacturedSolution ms = manufactured_solution(opt.solution, opt.nu);
        cfg.forcing = ms.forcing;
        cfg.initial_velocity = ms.velocity;
    }
    const LibeSolver solver(space, cfg);
    const Trajectory traj = solver.run();
    if (write_trajectory) traj.write_csv((dir / "trajectory.csv").string());

    const ConstantsReport consts = constants_report(space, solver.system(), opt.level, opt.seed);
    const StabilityReport rep =
        stability_report(traj, consts.alpha, consts.c_star, consts.c1_sample, opt.nu, opt.dt);

    json j;
    j["config"] = config_json(subcommand, opt);
    j["alpha"] = rep.alpha;
    j["c_star"] = rep.c_star;
    j["c1_sample"] = rep.c1_sample;
    j["realized_C_h"] = rep.realized_C_h;
    j["t_star"] = rep.t_star;
    j["checks"] = json::array();
    for (const auto& c : rep.checks) j["checks"].push_back(check_json(c));
    j["all_pass"] = rep.all_pass();
    write_json(j, dir / "stability.json");

    for (const auto& c : rep.checks)
        std::printf("  %-28s lhs=%-12.5g rhs=%-12.5g %s%s\n", c.name.c_str(), c.lhs, c.rhs,
                    c.pass ? "pass" : "FAIL", c.calibrated ? " (calibrated)" : "");
    return rep.all_pass() ? 0 : 1;
}

int run_convergence(const Options& opt) {
    const std::filesystem::path dir(opt.out_dir);
    std::filesystem::create_directories(dir);

    StudyConfig study;
    study.pair = parse_pair(opt.pair);
    study.solution_id = opt.solution == "none" ? "stream_vortex" : opt.solution;
    study.nu = opt.nu;
    study.t_star = opt.t_star;
    study.mesh_levels = sweep_levels(opt.levels);
    study.fixed_dt = opt.fixed_dt;
    study.quad_degree = opt.quad_degree;
    double target_lo = study.pair == SpacePair::TaylorHood ? 1.8 : 0.8;
    double target_hi = 1e300;
    if (opt.coupling == "dt-h2") {
        study.coupling = Coupling::DtH2;
    } else if (opt.coupling == "dt-h") {
        study.coupling = Coupling::DtH;
    } else if (opt.coupling == "fixed-dt") {
        study.coupling = Coupling::FixedDt;
    } else if (opt.coupling == "dt-halving") {
        study.coupling = Coupling::FixedHDtHalving;
        for (int i = 0; i < opt.levels; ++i) study.dt_levels.push_back(opt.dt / (1 << i));
        target_lo = 0.8;
        target_hi = 1.2;
    } else {
        throw CLI::ValidationError("--coupling", "unknown coupling: " + opt.coupling);
    }

    const ConvergenceTable table = convergence_study(study);
    table.write_csv((dir / "convergence.csv").string());
    std::printf("wrote %s\n", (dir / "convergence.csv").string().c_str());
    std::printf("  %-10s %-10s %-12s %-12s %-8s %-8s\n", "h", "dt", "grad_err", "press_err",
                "r_grad", "r_press");
    for (const auto& r : table.rows)
        std::printf("  %-10.4g %-10.4g %-12.5g %-12.5g %-8.3f %-8.3f\n", r.h, r.dt, r.tb_grad_eu,
                    r.tb_l2_ep, r.rate_grad_eu, r.rate_l2_ep);

    if (study.coupling == Coupling::FixedHDtHalving) {
        // At fixed h the errors against the exact solution bottom out at the
        // mesh-level floor, so no rate gate is applied here; isolating the
        // temporal order requires self-convergence against a fine-step
        // reference on the same mesh (the acceptance harness does this).
        std::printf("note: fixed-mesh dt sweep is informative only (errors are floor-limited"
                    " by the spatial resolution); no rate gate applied\n");
        (void)target_hi;
        return 0;
    }
    const auto& last = table.rows.back();
    const double r_grad = last.rate_grad_eu;
    const double r_press = last.rate_l2_ep;
    const bool pass = r_grad >= target_lo && r_press >= target_lo;
    if (!pass)
        std::printf("rate check FAILED: observed %.3f / %.3f, required >= %g\n", r_grad, r_press,
                    target_lo);
    else
        std::printf("rate check passed: %.3f / %.3f\n", r_grad, r_press);
    return pass ? 0 : 1;
}

int run_infsup(const Options& opt) {
    const std::filesystem::path dir(opt.out_dir);
    std::filesystem::create_directories(dir);
    json j;
    j["config"] = config_json("infsup", opt);
    j["levels"] = json::array();
    std::vector<double> alphas;
    std::printf("  %-6s %-10s %-12s\n", "n", "h", "alpha");
    for (int n : sweep_levels(opt.levels)) {
        const FESpacePair space = build_space(generate_structured_square(n), parse_pair(opt.pair));
        const double alpha = inf_sup_constant(space, assemble_system(space));
        alphas.push_back(alpha);
        std::printf("  %-6d %-10.4g %-12.6g\n", n, space.mesh().h_max, alpha);
        j["levels"].push_back({{"n", n}, {"h", space.mesh().h_max}, {"alpha", alpha}});
    }
    bool declining = alphas.size() >= 2;
    for (std::size_t i = 1; i < alphas.size(); ++i)
        declining = declining && alphas[i] < 0.9 * alphas[i - 1];
    j["declining"] = declining;
    if (declining)
        std::printf("note: alpha declines by more than 10%% per level: unstable pair\n");
    write_json(j, dir / "constants.json");
    return 0;  // diagnostic sweep: informative, not a gate
}

int run_equivalence(const Options& opt) {
    const std::filesystem::path dir(opt.out_dir);
    std::filesystem::create_directories(dir);
    json j;
    j["config"] = config_json("equivalence", opt);
    j["levels"] = json::array();
    bool pass = true;
    std::printf("  %-6s %-10s %-12s %-12s %-12s\n", "n", "h", "alpha", "c_star", "c1_sample");
    for (int n : sweep_levels(opt.levels)) {
        const FESpacePair space = build_space(generate_structured_square(n), parse_pair(opt.pair));
        const AssembledSystem sys = assemble_system(space);
        const ConstantsReport rep = constants_report(space, sys, n, opt.seed);
        pass = pass && rep.c_star > 0.0 && rep.c_star <= 1.0 + 1e-12;
        std::printf("  %-6d %-10.4g %-12.6g %-12.6g %-12.6g\n", n, rep.h_max, rep.alpha,
                    rep.c_star, rep.c1_sample);
        j["levels"].push_back({{"n", n},
                               {"h", rep.h_max},
                               {"alpha", rep.alpha},
                               {"c_star", rep.c_star},
                               {"c1_sample", rep.c1_sample},
                               {"projection_ratio", rep.projection_ratio}});
    }
    j["all_pass"] = pass;
    write_json(j, dir / "constants.json");
    return pass ? 0 : 1;
}

int run_projection(const Options& opt) {
    const std::filesystem::path dir(opt.out_dir);
    std::filesystem::create_directories(dir);
    const auto ratios = projection_stability_sweep(sweep_levels(opt.levels), parse_pair(opt.pair));
    std::ofstream csv(dir / "projection.csv");
    csv.precision(12);
    csv << "h,stability_ratio\n";
    double lo = 1e300, hi = 0.0;
    std::printf("  %-10s %-12s\n", "h", "ratio");
    for (const auto& [h, r] : ratios) {
        csv << h << "," << r << "\n";
        std::printf("  %-10.4g %-12.6g\n", h, r);
        lo = std::min(lo, r);
        hi = std::max(hi, r);
    }
    std::printf("wrote %s\n", (dir / "projection.csv").string().c_str());
    const bool pass = hi / lo < 1.5;
    std::printf("boundedness check (max/min = %.4g < 1.5): %s\n", hi / lo,
                pass ? "passed" : "FAILED");
    return pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mixed finite element studies for time-dependent incompressible flow"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    // Config keys live in a section named for the subcommand, e.g.
    //   [convergence]
    //   levels = 4
    app.set_config("--config", "", "key = value config file; flags take precedence");
    app.allow_config_extras(false);

    Options opt;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--pair", opt.pair, "element pair: taylor-hood | mini | p1p1")
            ->capture_default_str();
        sub->add_option("--solution", opt.solution,
                        "manufactured solution: stream_vortex | stokes_poly | none")
            ->capture_default_str();
        sub->add_option("--out", opt.out_dir, "output directory")->capture_default_str();
        sub->add_option("--nu", opt.nu, "kinematic viscosity")->check(CLI::PositiveNumber)
            ->capture_default_str();
        sub->add_option("--seed", opt.seed, "seed for randomized checks")->capture_default_str();
        sub->add_option("--quad-degree", opt.quad_degree,
                        "quadrature degree (lower deliberately to probe under-integration)")
            ->check(CLI::Range(1, 12))
            ->capture_default_str();
    };

    CLI::App* solve = app.add_subcommand("solve", "run the time stepper, write trajectory.csv");
    add_common(solve);
    solve->add_option("--level", opt.level, "structured mesh n (h = 1/n)")
        ->check(CLI::PositiveNumber)->capture_default_str();
    solve->add_option("--dt", opt.dt, "time step")->check(CLI::PositiveNumber)
        ->capture_default_str();
    solve->add_option("--n-steps", opt.n_steps, "number of steps")->check(CLI::PositiveNumber)
        ->capture_default_str();

    CLI::App* conv = app.add_subcommand("convergence", "error rates against the exact solution");
    add_common(conv);
    conv->add_option("--levels", opt.levels, "number of refinement levels (n = 4, 8, ...)")
        ->check(CLI::Range(2, 6))->capture_default_str();
    conv->add_option("--coupling", opt.coupling, "dt-h2 | dt-h | fixed-dt | dt-halving")
        ->capture_default_str();
    conv->add_option("--t-star", opt.t_star, "final time")->check(CLI::PositiveNumber)
        ->capture_default_str();
    conv->add_option("--fixed-dt", opt.fixed_dt, "time step for fixed-dt coupling")
        ->check(CLI::PositiveNumber)->capture_default_str();
    conv->add_option("--dt", opt.dt, "coarsest time step for dt-halving")
        ->check(CLI::PositiveNumber)->capture_default_str();

    CLI::App* infsup = app.add_subcommand("infsup", "pressure stability constant per level");
    add_common(infsup);
    infsup->add_option("--levels", opt.levels, "number of refinement levels")
        ->check(CLI::Range(1, 6))->capture_default_str();

    CLI::App* equiv = app.add_subcommand("equivalence", "dual-norm constants per level");
    add_common(equiv);
    equiv->add_option("--levels", opt.levels, "number of refinement levels")
        ->check(CLI::Range(1, 4))->capture_default_str();

    CLI::App* proj = app.add_subcommand("project-stability",
                                        "divergence-free projection stability sweep");
    add_common(proj);
    proj->add_option("--levels", opt.levels, "number of refinement levels")
        ->check(CLI::Range(2, 6))->capture_default_str();

    CLI::App* stab = app.add_subcommand("stability", "evaluate the stability inequalities");
    add_common(stab);
    stab->add_option("--level", opt.level, "structured mesh n (h = 1/n)")
        ->check(CLI::PositiveNumber)->capture_default_str();
    stab->add_option("--dt", opt.dt, "time step")->check(CLI::PositiveNumber)
        ->capture_default_str();
    stab->add_option("--n-steps", opt.n_steps, "number of steps")->check(CLI::PositiveNumber)
        ->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve->parsed()) {
            echo_config("solve", opt);
            return run_stability("solve", opt, true);
        }
        if (conv->parsed()) {
            echo_config("convergence", opt);
            return run_convergence(opt);
        }
        if (infsup->parsed()) {
            echo_config("infsup", opt);
            return run_infsup(opt);
        }
        if (equiv->parsed()) {
            echo_config("equivalence", opt);
            return run_equivalence(opt);
        }
        if (proj->parsed()) {
            echo_config("project-stability", opt);
            return run_projection(opt);
        }
        echo_config("stability", opt);
        return run_stability("stability", opt, false);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
