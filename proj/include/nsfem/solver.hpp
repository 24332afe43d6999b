#pragma once

#include <Eigen/Dense>
#include <fstream>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "nsfem/assembly.hpp"
#include "nsfem/linalg.hpp"
#include "nsfem/norms.hpp"

namespace nsfem {

enum class InitialCondition { Interpolant, L2Projection };

struct SolverConfig {
    double nu = 1.0;
    double dt = 0.1;
    int n_steps = 10;
    InitialCondition initial_condition = InitialCondition::Interpolant;
    std::function<Vec2(Vec2, double)> forcing;
    std::function<Vec2(Vec2, double)> initial_velocity;
    /// Dirichlet boundary values; zero when unset (homogeneous problem).
    std::function<Vec2(Vec2, double)> boundary_values;
    /// When set, convection is linearized at the interpolant of this field
    /// instead of the previous step (steady exactness tests).
    std::function<Vec2(Vec2, double)> frozen_convection;
    int quad_degree = kDefaultQuadratureDegree;

    void check() const {
        if (nu <= 0.0) throw std::invalid_argument("SolverConfig: nu must be positive");
        if (dt <= 0.0) throw std::invalid_argument("SolverConfig: dt must be positive");
        if (n_steps < 1) throw std::invalid_argument("SolverConfig: n_steps must be >= 1");
    }
};

struct State {
    Vector u;  // velocity coefficients, full length
    Vector p;  // pressure coefficients
    double t = 0.0;
    int n = 0;
};

struct TrajectoryRecord {
    double t = 0.0;
    double l2_u = 0.0;
    double h1semi_u = 0.0;
    double l2_p = 0.0;
    double increment_l2 = 0.0;   // ||u^n - u^{n-1}||, 0 at n = 0
    double dtu_dual_Xh = 0.0;    // ||(u^n - u^{n-1})/dt||_{X_h*}
    double dtu_dual_Vh = 0.0;
    double f_dual = 0.0;         // ||f^n||_{X_h*} surrogate
    double residual_dual = 0.0;  // ||R^n||_{X_h*}, momentum residual functional
    double f_dot_u = 0.0;        // (f^n, u^n), energy bookkeeping
};

struct Trajectory {
    double dt = 0.0;
    double nu = 0.0;
    std::vector<TrajectoryRecord> records;

    void write_csv(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("Trajectory::write_csv: cannot open " + path);
        out.precision(17);
        out << "t,l2_u,h1semi_u,l2_p,increment_l2,dtu_dual_Xh,dtu_dual_Vh,f_dual\n";
        for (const auto& r : records)
            out << r.t << "," << r.l2_u << "," << r.h1semi_u << "," << r.l2_p << ","
                << r.increment_l2 << "," << r.dtu_dual_Xh << "," << r.dtu_dual_Vh << ","
                << r.f_dual << "\n";
    }
};

/// Linearly implicit Backward Euler: one saddle-point solve per step, with
/// convection linearized at the previous velocity.
class LibeSolver {
  public:
    LibeSolver(const FESpacePair& space, SolverConfig config)
        : space_(space),
          config_(std::move(config)),
          sys_(assemble_system(space, config_.quad_degree)),
          ctx_(space, sys_) {
        config_.check();
        K0_ = SparseMatrix(sys_.M_vel / config_.dt) + SparseMatrix(config_.nu * sys_.A_visc);
        if (config_.frozen_convection)
            frozen_w_ = space_.interpolate(config_.frozen_convection, 0.0);
    }

    const AssembledSystem& system() const { return sys_; }
    const DualNormContext& dual_context() const { return ctx_; }
    const FESpacePair& space() const { return space_; }

    State initialize() const {
        State s;
        s.t = 0.0;
        s.n = 0;
        s.p = Vector::Zero(space_.n_pres_dofs());
        if (!config_.initial_velocity) {
            s.u = Vector::Zero(space_.n_vel_dofs());
            return s;
        }
        if (config_.initial_condition == InitialCondition::Interpolant) {
            s.u = space_.interpolate(config_.initial_velocity, 0.0);
        } else {
            const Vector pairing = assemble_load(space_, config_.initial_velocity, 0.0, 7);
            const Vector z = ctx_.mass_saddle_solve(ctx_.restriction().restrict_vector(pairing));
            s.u = ctx_.restriction().prolong_vector(z, space_.n_vel_dofs());
        }
        return s;
    }

    State step(const State& state) const {
        const double t_next = state.t + config_.dt;
        const Vector& w = config_.frozen_convection ? frozen_w_ : state.u;
        const SparseMatrix N = assemble_convection(space_, w, config_.quad_degree);
        SparseMatrix K = K0_ + N;
        K.makeCompressed();
        const SaddleSystem saddle = make_saddle(K, sys_.B_div, sys_.mean_vec, space_.dirichlet_mask());

        // The sparsity pattern is identical across steps; reuse the symbolic
        // analysis and only refactorize numerically.
        const Eigen::SparseMatrix<double> col_major = saddle.S;
        if (!step_lu_) {
            step_lu_ = std::make_unique<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
            step_lu_->analyzePattern(col_major);
        }
        step_lu_->factorize(col_major);
        if (step_lu_->info() != Eigen::Success)
            throw std::runtime_error("LibeSolver::step: singular saddle system");

        Vector load = sys_.M_vel * (state.u / config_.dt);
        if (config_.forcing) load += assemble_load(space_, config_.forcing, t_next, config_.quad_degree);
        Vector g = Vector::Zero(space_.n_vel_dofs());
        if (config_.boundary_values) g = space_.interpolate(config_.boundary_values, t_next);
        const Vector rhs = constrained_rhs(saddle, K, sys_.B_div, load, g);
        const Vector sol = step_lu_->solve(rhs);

        const double rel = (saddle.S * sol - rhs).norm() / std::max(1e-300, rhs.norm());
        if (rel > 1e-8)
            throw std::runtime_error("LibeSolver::step: linear solve residual " +
                                     std::to_string(rel));
        State next;
        next.u = sol.head(space_.n_vel_dofs());
        next.p = sol.segment(space_.n_vel_dofs(), space_.n_pres_dofs());
        next.t = t_next;
        next.n = state.n + 1;
        return next;
    }

    TrajectoryRecord diagnostics(const State& state, const State* prev) const {
        TrajectoryRecord r;
        r.t = state.t;
        r.l2_u = gram_norm(sys_.M_vel, state.u);
        r.h1semi_u = gram_norm(sys_.A_visc, state.u);
        r.l2_p = gram_norm(sys_.M_pres, state.p);
        Vector f_full = Vector::Zero(space_.n_vel_dofs());
        if (config_.forcing && state.n > 0)
            f_full = assemble_load(space_, config_.forcing, state.t, config_.quad_degree);
        r.f_dual = ctx_.dual_norm_Xh(ctx_.restriction().restrict_vector(f_full));
        r.f_dot_u = f_full.dot(state.u);
        if (prev) {
            const Vector du = state.u - prev->u;
            r.increment_l2 = gram_norm(sys_.M_vel, du);
            const Vector dtu_pairing =
                ctx_.restriction().restrict_vector(sys_.M_vel * (du / config_.dt));
            r.dtu_dual_Xh = ctx_.dual_norm_Xh(dtu_pairing);
            r.dtu_dual_Vh = ctx_.dual_norm_Vh(dtu_pairing);
            // Momentum residual functional R(v) = (d_t u, v) + b(u^{n-1}, u^n, v)
            //   + nu (grad u^n, grad v) - (f^n, v); equals B^T p^n on interior dofs.
            const Vector& w = config_.frozen_convection ? frozen_w_ : prev->u;
            const SparseMatrix N = assemble_convection(space_, w, config_.quad_degree);
            const Vector residual = sys_.M_vel * (du / config_.dt) + config_.nu * (sys_.A_visc * state.u) +
                                    N * state.u - f_full;
            r.residual_dual = ctx_.dual_norm_Xh(ctx_.restriction().restrict_vector(residual));
        }
        return r;
    }

    /// Run n_steps from the initial state, recording per-step diagnostics.
    /// The observer (when set) sees every state including the initial one.
    Trajectory run(const std::function<void(const State&)>& observer = nullptr) const {
        Trajectory traj;
        traj.dt = config_.dt;
        traj.nu = config_.nu;
        State state = initialize();
        if (observer) observer(state);
        traj.records.push_back(diagnostics(state, nullptr));
        for (int n = 0; n < config_.n_steps; ++n) {
            State next;
            try {
                next = step(state);
            } catch (const std::exception& e) {
                throw std::runtime_error("LibeSolver::run: step " + std::to_string(n + 1) +
                                         " failed: " + e.what());
            }
            if (observer) observer(next);
            traj.records.push_back(diagnostics(next, &state));
            state = std::move(next);
        }
        return traj;
    }

  private:
    const FESpacePair& space_;
    SolverConfig config_;
    AssembledSystem sys_;
    DualNormContext ctx_;
    SparseMatrix K0_;
    Vector frozen_w_;
    mutable std::unique_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> step_lu_;
};

}  // namespace nsfem
