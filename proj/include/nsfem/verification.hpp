#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "nsfem/manufactured.hpp"
#include "nsfem/norms.hpp"
#include "nsfem/solver.hpp"

namespace nsfem {

struct FieldErrors {
    double l2_u = 0.0;
    double h1semi_u = 0.0;
    double l2_p = 0.0;
};

/// Errors against the exact fields evaluated at quadrature points (degree 7
/// by default), not against an interpolant.
inline FieldErrors compute_errors(const FESpacePair& space, const ManufacturedSolution& ms,
                                  const Vector& u_coeffs, const Vector& p_coeffs, double t,
                                  int quad_degree = 7) {
    const Mesh& mesh = space.mesh();
    const QuadratureRule rule = quadrature_rule(quad_degree);
    const detail::TabulatedBasis vtab(space.velocity_family(), rule);
    const detail::TabulatedBasis ptab(ElementFamily::P1, rule);
    const int nloc = family_info(space.velocity_family()).local_size;

    FieldErrors err;
    for (int c = 0; c < mesh.n_triangles(); ++c) {
        const auto& tri = mesh.triangles[c];
        const detail::ElementGeometry geom(mesh, tri);
        const auto& nodes = space.velocity_nodes(c);
        for (int q = 0; q < rule.size(); ++q) {
            const double w = rule.weights[q] * geom.detJ;
            const Vec2 x = detail::map_point(mesh, tri, rule.x(q), rule.y(q));
            const auto& be = vtab.at_point[q];
            Vec2 uh{0.0, 0.0};
            Eigen::Matrix2d gh = Eigen::Matrix2d::Zero();
            for (int j = 0; j < nloc; ++j) {
                const double cx = u_coeffs[2 * nodes[j]];
                const double cy = u_coeffs[2 * nodes[j] + 1];
                uh.x += cx * be.values[j];
                uh.y += cy * be.values[j];
                const Vec2 g = geom.physical_grad(be.gradients[j]);
                gh(0, 0) += cx * g.x;
                gh(0, 1) += cx * g.y;
                gh(1, 0) += cy * g.x;
                gh(1, 1) += cy * g.y;
            }
            double ph = 0.0;
            for (int j = 0; j < 3; ++j) ph += p_coeffs[tri.v[j]] * ptab.at_point[q].values[j];

            const Vec2 ue = ms.velocity(x, t);
            const Eigen::Matrix2d ge = ms.velocity_gradient(x, t);
            const double pe = ms.pressure(x, t);
            err.l2_u += w * ((uh.x - ue.x) * (uh.x - ue.x) + (uh.y - ue.y) * (uh.y - ue.y));
            err.h1semi_u += w * (gh - ge).squaredNorm();
            err.l2_p += w * (ph - pe) * (ph - pe);
        }
    }
    err.l2_u = std::sqrt(err.l2_u);
    err.h1semi_u = std::sqrt(err.h1semi_u);
    err.l2_p = std::sqrt(err.l2_p);
    return err;
}

struct InequalityCheck {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    double margin = 0.0;  // rhs - lhs, or the tolerance slack for per-step checks
    bool pass = false;
    bool calibrated = false;  // depends on the sampled C_1, reported but not authoritative
};

struct StabilityReport {
    double nu = 0.0;
    double dt = 0.0;
    double t_star = 0.0;
    double alpha = 0.0;
    double c_star = 0.0;
    double c1_sample = 0.0;
    double realized_C_h = 0.0;
    std::vector<InequalityCheck> checks;

    bool all_pass() const {
        for (const auto& c : checks)
            if (!c.calibrated && !c.pass) return false;
        return true;
    }
};

/// Evaluate the stability inequalities on a recorded trajectory:
/// the velocity energy bound with the X_h* surrogate for ||f||_{-1}, the
/// exact discrete energy identity, the constant-free per-step pressure
/// bound alpha ||p|| <= ||R||_{X_h*}, the dual-norm transfer, and the
/// calibrated time-integrated pressure bounds.
inline StabilityReport stability_report(const Trajectory& traj, double alpha, double c_star,
                                        double c1_sample, double nu, double dt) {
    if (traj.records.size() < 2)
        throw std::invalid_argument("stability_report: trajectory has no steps");
    const auto& rec = traj.records;
    const int N = static_cast<int>(rec.size()) - 1;
    const double t_star = N * dt;

    StabilityReport rep;
    rep.nu = nu;
    rep.dt = dt;
    rep.t_star = t_star;
    rep.alpha = alpha;
    rep.c_star = c_star;
    rep.c1_sample = c1_sample;
    for (int n = 0; n < N; ++n) rep.realized_C_h = std::max(rep.realized_C_h, rec[n].h1semi_u);

    double sum_inc2 = 0.0, sum_grad2 = 0.0, sum_fdual2 = 0.0, sum_fu = 0.0;
    double sum_p = 0.0, sum_p2 = 0.0;
    for (int n = 1; n <= N; ++n) {
        sum_inc2 += rec[n].increment_l2 * rec[n].increment_l2;
        sum_grad2 += rec[n].h1semi_u * rec[n].h1semi_u;
        sum_fdual2 += rec[n].f_dual * rec[n].f_dual;
        sum_fu += rec[n].f_dot_u;
        sum_p += rec[n].l2_p;
        sum_p2 += rec[n].l2_p * rec[n].l2_p;
    }
    const double u0 = rec[0].l2_u;
    const double uN = rec[N].l2_u;
    const double tb_f = std::sqrt(dt * sum_fdual2);

    {
        InequalityCheck c;
        c.name = "velocity_energy_bound";
        c.lhs = uN * uN + sum_inc2 + nu * dt * sum_grad2;
        c.rhs = sum_fdual2 * dt / nu + u0 * u0;
        c.margin = c.rhs - c.lhs;
        c.pass = c.margin >= -1e-9 * std::max(1.0, std::abs(c.rhs));
        rep.checks.push_back(c);
    }
    {
        InequalityCheck c;
        c.name = "energy_identity";
        c.lhs = uN * uN + sum_inc2 + 2.0 * nu * dt * sum_grad2 - 2.0 * dt * sum_fu;
        c.rhs = u0 * u0;
        c.margin = std::abs(c.rhs - c.lhs);
        const double scale = std::max({1e-30, uN * uN, u0 * u0, 2.0 * nu * dt * sum_grad2,
                                       std::abs(2.0 * dt * sum_fu)});
        c.pass = c.margin <= 1e-9 * std::max(1.0, scale);
        rep.checks.push_back(c);
    }
    {
        InequalityCheck c;
        c.name = "per_step_pressure_bound";
        double worst = -std::numeric_limits<double>::infinity();
        for (int n = 1; n <= N; ++n)
            worst = std::max(worst, alpha * rec[n].l2_p - rec[n].residual_dual);
        c.lhs = worst;  // worst-case alpha ||p|| - ||R||_{X_h*}
        c.rhs = 0.0;
        c.margin = -worst;
        c.pass = worst <= 1e-8;
        rep.checks.push_back(c);
    }
    {
        InequalityCheck c;
        c.name = "dual_norm_transfer";
        double worst_upper = 0.0, worst_lower = 0.0;
        for (int n = 1; n <= N; ++n) {
            const double scale = std::max(1e-30, rec[n].dtu_dual_Xh);
            worst_upper = std::max(worst_upper, (rec[n].dtu_dual_Vh - rec[n].dtu_dual_Xh) / scale);
            worst_lower = std::max(worst_lower,
                                   (rec[n].dtu_dual_Xh - rec[n].dtu_dual_Vh / c_star) / scale);
        }
        c.lhs = worst_upper;
        c.rhs = worst_lower;
        c.margin = -std::max(worst_upper, worst_lower);
        c.pass = worst_upper <= 1e-9 && worst_lower <= 1e-8;
        rep.checks.push_back(c);
    }
    {
        InequalityCheck c;
        c.name = "pressure_L1_in_time_bound";
        c.calibrated = true;
        c.lhs = alpha * dt * sum_p;
        c.rhs = (1.0 + 1.0 / c_star) *
                ((c1_sample / (nu * nu) * tb_f + 2.0 * std::sqrt(t_star)) * tb_f +
                 (c1_sample / nu * u0 + std::sqrt(nu * t_star)) * u0);
        c.margin = c.rhs - c.lhs;
        c.pass = c.margin >= -1e-9 * std::max(1.0, std::abs(c.rhs));
        rep.checks.push_back(c);
    }
    {
        InequalityCheck c;
        c.name = "pressure_L2_in_time_bound";
        c.calibrated = true;
        const double ch = rep.realized_C_h;
        c.lhs = alpha * std::sqrt(dt * sum_p2);
        c.rhs = std::sqrt(3.0) * (1.0 + 1.0 / c_star) *
                (std::sqrt(c1_sample * c1_sample * ch * ch / (nu * nu) + 1.0) * tb_f +
                 std::sqrt(c1_sample * c1_sample * ch * ch / nu + nu) * u0);
        c.margin = c.rhs - c.lhs;
        c.pass = c.margin >= -1e-9 * std::max(1.0, std::abs(c.rhs));
        rep.checks.push_back(c);
    }
    return rep;
}

enum class Coupling { DtH2, DtH, FixedDt, FixedHDtHalving };

struct ConvergenceRow {
    double h = 0.0;
    double dt = 0.0;
    double final_l2_u = 0.0;
    double tb_grad_eu = 0.0;  // (dt sum ||grad e_u||^2)^{1/2}, steps 1..N
    double tb_l2_ep = 0.0;    // (dt sum ||e_p||^2)^{1/2}
    double l1_ep = 0.0;       // dt sum ||e_p||
    // log2 ratios against the previous row; NaN in the first row.
    double rate_final_l2_u = 0.0;
    double rate_grad_eu = 0.0;
    double rate_l2_ep = 0.0;
    double rate_l1_ep = 0.0;
};

struct ConvergenceTable {
    std::vector<ConvergenceRow> rows;

    void write_csv(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("ConvergenceTable::write_csv: cannot open " + path);
        out.precision(12);
        out << "h,dt,final_l2_u,tb_grad_eu,tb_l2_ep,l1_ep,"
               "rate_final_l2_u,rate_grad_eu,rate_l2_ep,rate_l1_ep\n";
        for (const auto& r : rows)
            out << r.h << "," << r.dt << "," << r.final_l2_u << "," << r.tb_grad_eu << ","
                << r.tb_l2_ep << "," << r.l1_ep << "," << r.rate_final_l2_u << ","
                << r.rate_grad_eu << "," << r.rate_l2_ep << "," << r.rate_l1_ep << "\n";
    }
};

struct StudyConfig {
    SpacePair pair = SpacePair::TaylorHood;
    std::string solution_id = "stream_vortex";
    double nu = 1.0;
    double t_star = 1.0;
    Coupling coupling = Coupling::DtH2;
    std::vector<int> mesh_levels = {4, 8, 16, 32};  // structured n per level
    double fixed_dt = 0.01;                 // FixedDt
    std::vector<double> dt_levels;          // FixedHDtHalving
    int quad_degree = kDefaultQuadratureDegree;
};

/// One solver run against a manufactured solution, accumulating the
/// time-integrated error norms on the fly.
inline ConvergenceRow run_error_case(const FESpacePair& space, const ManufacturedSolution& ms,
                                     double nu, double dt, int n_steps, int quad_degree) {
    SolverConfig cfg;
    cfg.nu = nu;
    cfg.dt = dt;
    cfg.n_steps = n_steps;
    cfg.forcing = ms.forcing;
    cfg.initial_velocity = ms.velocity;
    cfg.quad_degree = quad_degree;
    LibeSolver solver(space, cfg);

    ConvergenceRow row;
    row.h = space.mesh().h_max;
    row.dt = dt;
    double sum_grad2 = 0.0, sum_p2 = 0.0, sum_p = 0.0;
    FieldErrors last;
    solver.run([&](const State& s) {
        if (s.n == 0) return;
        last = compute_errors(space, ms, s.u, s.p, s.t);
        sum_grad2 += last.h1semi_u * last.h1semi_u;
        sum_p2 += last.l2_p * last.l2_p;
        sum_p += last.l2_p;
    });
    row.final_l2_u = last.l2_u;
    row.tb_grad_eu = std::sqrt(dt * sum_grad2);
    row.tb_l2_ep = std::sqrt(dt * sum_p2);
    row.l1_ep = dt * sum_p;
    return row;
}

inline ConvergenceTable convergence_study(const StudyConfig& study) {
    const ManufacturedSolution ms = manufactured_solution(study.solution_id, study.nu);
    ConvergenceTable table;
    auto add_case = [&](int n, double dt) {
        const int n_steps = std::max(1, static_cast<int>(std::lround(study.t_star / dt)));
        const FESpacePair space = build_space(generate_structured_square(n), study.pair);
        try {
            table.rows.push_back(
                run_error_case(space, ms, study.nu, dt, n_steps, study.quad_degree));
        } catch (const std::exception& e) {
            throw std::runtime_error("convergence_study: level with n=" + std::to_string(n) +
                                     " failed: " + e.what());
        }
    };
    if (study.coupling == Coupling::FixedHDtHalving) {
        const int n = study.mesh_levels.back();
        for (double dt : study.dt_levels) add_case(n, dt);
    } else {
        for (int n : study.mesh_levels) {
            const double h = 1.0 / n;
            double dt = study.fixed_dt;
            if (study.coupling == Coupling::DtH2) dt = h * h;
            if (study.coupling == Coupling::DtH) dt = h;
            add_case(n, dt);
        }
    }
    for (std::size_t i = 1; i < table.rows.size(); ++i) {
        auto& r = table.rows[i];
        const auto& p = table.rows[i - 1];
        const double denom = study.coupling == Coupling::FixedHDtHalving
                                 ? std::log2(p.dt / r.dt)
                                 : std::log2(p.h / r.h);
        r.rate_final_l2_u = std::log2(p.final_l2_u / r.final_l2_u) / denom;
        r.rate_grad_eu = std::log2(p.tb_grad_eu / r.tb_grad_eu) / denom;
        r.rate_l2_ep = std::log2(p.tb_l2_ep / r.tb_l2_ep) / denom;
        r.rate_l1_ep = std::log2(p.l1_ep / r.l1_ep) / denom;
    }
    return table;
}

/// H1 stability ratios of the L2 projection onto V_h for the
/// divergence-free stream-function probe, across refinement levels.
inline std::vector<std::pair<double, double>> projection_stability_sweep(
    const std::vector<int>& mesh_levels, SpacePair pair) {
    const ManufacturedSolution ms = manufactured_solution("stream_vortex", 1.0);
    std::vector<std::pair<double, double>> out;
    for (int n : mesh_levels) {
        const FESpacePair space = build_space(generate_structured_square(n), pair);
        const AssembledSystem sys = assemble_system(space);
        const DualNormContext ctx(space, sys);
        const ProjectionResult pr =
            l2_project_Vh(space, sys, ctx, ms.velocity, ms.velocity_gradient, 0.0);
        out.emplace_back(space.mesh().h_max, pr.stability_ratio);
    }
    return out;
}

inline ConstantsReport constants_report(const FESpacePair& space, const AssembledSystem& sys,
                                        int level, unsigned seed = 42) {
    ConstantsReport rep;
    rep.level = level;
    rep.h_max = space.mesh().h_max;
    rep.alpha = inf_sup_constant(space, sys);
    rep.c_star = equivalence_constant(space, sys);
    rep.c1_sample = sample_c1(space, sys, 20, seed);
    const ManufacturedSolution ms = manufactured_solution("stream_vortex", 1.0);
    const DualNormContext ctx(space, sys);
    rep.projection_ratio =
        l2_project_Vh(space, sys, ctx, ms.velocity, ms.velocity_gradient, 0.0).stability_ratio;
    return rep;
}

}  // namespace nsfem
