#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "nsfem/manufactured.hpp"
#include "nsfem/solver.hpp"

using namespace nsfem;

TEST_CASE("config validation") {
    SolverConfig cfg;
    cfg.nu = -1.0;
    CHECK_THROWS_AS(cfg.check(), std::invalid_argument);
    cfg.nu = 1.0;
    cfg.dt = 0.0;
    CHECK_THROWS_AS(cfg.check(), std::invalid_argument);
    cfg.dt = 0.1;
    cfg.n_steps = 0;
    CHECK_THROWS_AS(cfg.check(), std::invalid_argument);
}

TEST_CASE("zero data stays zero") {
    const FESpacePair space = build_space(generate_structured_square(3), SpacePair::TaylorHood);
    SolverConfig cfg;
    cfg.nu = 1.0;
    cfg.dt = 0.1;
    cfg.n_steps = 3;
    const LibeSolver solver(space, cfg);
    State s = solver.initialize();
    CHECK(s.u.cwiseAbs().maxCoeff() == 0.0);
    for (int n = 0; n < 3; ++n) {
        s = solver.step(s);
        CHECK(s.u.cwiseAbs().maxCoeff() <= 1e-12);
        CHECK(s.p.cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("initialization") {
    const FESpacePair space = build_space(generate_structured_square(3), SpacePair::TaylorHood);
    const AssembledSystem sys = assemble_system(space);
    const ManufacturedSolution stokes = manufactured_solution("stokes_poly", 1.0);
    const ManufacturedSolution vortex = manufactured_solution("stream_vortex", 1.0);

    SECTION("interpolant of an exactly divergence-free quadratic field") {
        SolverConfig cfg;
        cfg.initial_velocity = stokes.velocity;
        const LibeSolver solver(space, cfg);
        const State s = solver.initialize();
        CHECK((sys.B_div * s.u).cwiseAbs().maxCoeff() <= 1e-12);
    }

    SECTION("constrained projection is discretely divergence-free") {
        SolverConfig cfg;
        cfg.initial_condition = InitialCondition::L2Projection;
        cfg.initial_velocity = vortex.velocity;
        const LibeSolver solver(space, cfg);
        const State s = solver.initialize();
        CHECK(s.u.cwiseAbs().maxCoeff() > 0.0);
        CHECK((sys.B_div * s.u).cwiseAbs().maxCoeff() <= 1e-10);
    }
}

TEST_CASE("unforced runs dissipate for any time step") {
    const FESpacePair space = build_space(generate_structured_square(4), SpacePair::TaylorHood);
    const AssembledSystem sys = assemble_system(space);
    const ManufacturedSolution ms = manufactured_solution("stream_vortex", 1.0);
    for (double dt : {1e-3, 1e-1, 10.0}) {
        SolverConfig cfg;
        cfg.nu = 1.0;
        cfg.dt = dt;
        cfg.n_steps = 5;
        cfg.initial_velocity = ms.velocity;
        const LibeSolver solver(space, cfg);
        State s = solver.initialize();
        double prev_norm = gram_norm(sys.M_vel, s.u);
        for (int n = 0; n < cfg.n_steps; ++n) {
            s = solver.step(s);
            const double cur = gram_norm(sys.M_vel, s.u);
            CHECK(cur <= prev_norm + 1e-12);
            CHECK((sys.B_div * s.u).cwiseAbs().maxCoeff() <= 1e-10);
            prev_norm = cur;
        }
    }
}

TEST_CASE("steady polynomial solution is reproduced exactly") {
    // Quadratic velocity / linear pressure lies in the Taylor-Hood space;
    // with the convection field frozen at the exact velocity the scheme's
    // fixed point is the interpolant itself.
    const FESpacePair space = build_space(generate_structured_square(3), SpacePair::TaylorHood);
    const double nu = 0.7;
    const ManufacturedSolution ms = manufactured_solution("stokes_poly", nu);
    SolverConfig cfg;
    cfg.nu = nu;
    cfg.dt = 0.5;
    cfg.n_steps = 60;
    cfg.forcing = ms.forcing;
    cfg.boundary_values = ms.velocity;
    cfg.frozen_convection = ms.velocity;
    const LibeSolver solver(space, cfg);

    const Vector u_exact = space.interpolate(ms.velocity, 0.0);
    const Vector p_exact = space.interpolate_pressure(ms.pressure, 0.0);

    SECTION("exact state is a fixed point") {
        State s;
        s.u = u_exact;
        s.p = p_exact;
        s.t = 0.0;
        s.n = 0;
        const State next = solver.step(s);
        CHECK((next.u - u_exact).cwiseAbs().maxCoeff() <= 1e-10);
        CHECK((next.p - p_exact).cwiseAbs().maxCoeff() <= 1e-9);
    }

    SECTION("iteration from rest converges to the exact coefficients") {
        State s = solver.initialize();
        for (int n = 0; n < cfg.n_steps; ++n) s = solver.step(s);
        CHECK((s.u - u_exact).cwiseAbs().maxCoeff() <= 1e-8);
        CHECK((s.p - p_exact).cwiseAbs().maxCoeff() <= 1e-8);
    }
}

TEST_CASE("trajectory bookkeeping") {
    const FESpacePair space = build_space(generate_structured_square(3), SpacePair::TaylorHood);
    const ManufacturedSolution ms = manufactured_solution("stream_vortex", 0.5);
    SolverConfig cfg;
    cfg.nu = 0.5;
    cfg.dt = 0.05;
    cfg.n_steps = 4;
    cfg.forcing = ms.forcing;
    cfg.initial_velocity = ms.velocity;
    const LibeSolver solver(space, cfg);

    std::vector<State> states;
    const Trajectory traj = solver.run([&](const State& s) { states.push_back(s); });

    SECTION("record count and per-step dual norm ordering") {
        REQUIRE(traj.records.size() == static_cast<std::size_t>(cfg.n_steps) + 1);
        REQUIRE(states.size() == traj.records.size());
        for (std::size_t n = 1; n < traj.records.size(); ++n) {
            const auto& r = traj.records[n];
            CHECK(r.dtu_dual_Vh <= r.dtu_dual_Xh * (1.0 + 1e-12));
            CHECK(r.increment_l2 > 0.0);
        }
    }

    SECTION("energy identity recomputed from stored coefficients") {
        const AssembledSystem& sys = solver.system();
        const auto sq = [](double v) { return v * v; };
        double lhs = sq(gram_norm(sys.M_vel, states.back().u));
        double scale = sq(gram_norm(sys.M_vel, states.front().u));
        for (std::size_t n = 1; n < states.size(); ++n) {
            const Vector du = states[n].u - states[n - 1].u;
            const Vector f = assemble_load(space, ms.forcing, states[n].t);
            lhs += sq(gram_norm(sys.M_vel, du));
            lhs += 2.0 * cfg.nu * cfg.dt * sq(gram_norm(sys.A_visc, states[n].u));
            lhs -= 2.0 * cfg.dt * f.dot(states[n].u);
            scale += sq(gram_norm(sys.M_vel, du)) +
                     2.0 * cfg.nu * cfg.dt * sq(gram_norm(sys.A_visc, states[n].u)) +
                     2.0 * cfg.dt * std::abs(f.dot(states[n].u));
        }
        lhs -= sq(gram_norm(sys.M_vel, states.front().u));
        CHECK(std::abs(lhs) <= 1e-9 * scale);
    }

    SECTION("single step run gives two records") {
        SolverConfig one = cfg;
        one.n_steps = 1;
        const LibeSolver s1(space, one);
        CHECK(s1.run().records.size() == 2);
    }

    SECTION("csv export") {
        const std::string path =
            (std::filesystem::temp_directory_path() / "nsfem_traj.csv").string();
        traj.write_csv(path);
        std::ifstream in(path);
        std::string header;
        std::getline(in, header);
        CHECK(header == "t,l2_u,h1semi_u,l2_p,increment_l2,dtu_dual_Xh,dtu_dual_Vh,f_dual");
        int lines = 0;
        for (std::string line; std::getline(in, line);) ++lines;
        CHECK(lines == static_cast<int>(traj.records.size()));
        std::remove(path.c_str());
    }
}
