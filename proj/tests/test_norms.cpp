#include <catch2/catch_amalgamated.hpp>

#include <numeric>
#include <random>

#include "nsfem/manufactured.hpp"
#include "nsfem/norms.hpp"

using namespace nsfem;

namespace {

Vector random_reduced(const DofRestriction& r, std::mt19937& rng) {
    std::normal_distribution<double> dist;
    Vector w(r.n_free());
    for (int i = 0; i < w.size(); ++i) w[i] = dist(rng);
    return w;
}

Mesh permute_vertices(const Mesh& m, unsigned seed) {
    std::vector<int> perm(m.n_vertices());
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    Mesh out = m;
    for (int i = 0; i < m.n_vertices(); ++i) out.vertices[perm[i]] = m.vertices[i];
    for (auto& t : out.triangles)
        for (int& v : t.v) v = perm[v];
    for (auto& e : out.boundary_edges) {
        e.a = perm[e.a];
        e.b = perm[e.b];
    }
    return out;
}

}  // namespace

TEST_CASE("coefficient norms on simple fields") {
    const FESpacePair space = build_space(generate_structured_square(4), SpacePair::TaylorHood);

    const Vector zero_u = Vector::Zero(space.n_vel_dofs());
    CHECK(norm(space, zero_u, NormKind::L2, GramWhich::Velocity) == 0.0);

    // Constant pressure 1 on the unit square has L2 norm 1.
    const Vector ones_p = Vector::Ones(space.n_pres_dofs());
    CHECK(norm(space, ones_p, NormKind::L2, GramWhich::Pressure) ==
          Catch::Approx(1.0).margin(1e-13));

    // u = (x, 0): grad has a single unit entry, so the seminorm is 1 and the
    // L2 norm is sqrt(int x^2) = 1/sqrt(3).
    const Vector linear = space.interpolate([](Vec2 x, double) { return Vec2{x.x, 0.0}; }, 0.0);
    CHECK(norm(space, linear, NormKind::H1Semi, GramWhich::Velocity) ==
          Catch::Approx(1.0).margin(1e-13));
    CHECK(norm(space, linear, NormKind::L2, GramWhich::Velocity) ==
          Catch::Approx(1.0 / std::sqrt(3.0)).margin(1e-13));

    CHECK_THROWS(norm(space, Vector::Zero(3), NormKind::L2, GramWhich::Velocity));
}

TEST_CASE("discrete-in-time norms") {
    const std::vector<double> series{2.0, 2.0, 2.0, 2.0, 2.0};
    CHECK(triple_bar_2(series, 0.1) == Catch::Approx(2.0 * std::sqrt(0.5)).margin(1e-14));
    CHECK(triple_bar_inf(series) == 2.0);
    CHECK(triple_bar_inf({1.0, 5.0, 3.0}) == 5.0);
    CHECK_THROWS(triple_bar_2({}, 0.1));
    CHECK_THROWS(triple_bar_inf({}));
}

TEST_CASE("gradient dual norm") {
    const FESpacePair space = build_space(generate_structured_square(3), SpacePair::TaylorHood);
    const AssembledSystem sys = assemble_system(space);
    const DualNormContext ctx(space, sys);
    std::mt19937 rng(21);

    SECTION("zero and homogeneity") {
        CHECK(ctx.dual_norm_Xh(Vector::Zero(ctx.restriction().n_free())) == 0.0);
        const Vector w = random_reduced(ctx.restriction(), rng);
        CHECK(ctx.dual_norm_Xh(3.0 * w) ==
              Catch::Approx(3.0 * ctx.dual_norm_Xh(w)).epsilon(1e-12));
    }

    SECTION("Riesz representer recovers the gradient norm") {
        for (int s = 0; s < 10; ++s) {
            const Vector z = random_reduced(ctx.restriction(), rng);
            const Vector w = ctx.stiffness() * z;
            CHECK(ctx.dual_norm_Xh(w) ==
                  Catch::Approx(gram_norm(ctx.stiffness(), z)).epsilon(1e-10));
        }
    }

    SECTION("no direction exceeds the computed sup") {
        const Vector w = random_reduced(ctx.restriction(), rng);
        const double sup = ctx.dual_norm_Xh(w);
        for (int s = 0; s < 1000; ++s) {
            const Vector v = random_reduced(ctx.restriction(), rng);
            const double denom = gram_norm(ctx.stiffness(), v);
            CHECK(std::abs(w.dot(v)) / denom <= sup * (1.0 + 1e-12));
        }
    }
}

TEST_CASE("divergence-free dual norm") {
    const FESpacePair space = build_space(generate_structured_square(2), SpacePair::TaylorHood);
    const AssembledSystem sys = assemble_system(space);
    const DualNormContext ctx(space, sys);
    std::mt19937 rng(22);

    SECTION("never exceeds the full-space dual norm") {
        for (int s = 0; s < 50; ++s) {
            const Vector w = random_reduced(ctx.restriction(), rng);
            CHECK(ctx.dual_norm_Vh(w) <= ctx.dual_norm_Xh(w) * (1.0 + 1e-12));
        }
    }

    SECTION("agrees with an explicit divergence-free basis computation") {
        const Eigen::MatrixXd Z = nullspace_basis(ctx.divergence());
        const Eigen::MatrixXd G_A =
            Z.transpose() * (Eigen::MatrixXd(ctx.stiffness()) * Z);
        const Eigen::LLT<Eigen::MatrixXd> llt(G_A);
        for (int s = 0; s < 10; ++s) {
            const Vector w = random_reduced(ctx.restriction(), rng);
            const Vector wz = Z.transpose() * w;
            const double brute = std::sqrt(wz.dot(llt.solve(wz)));
            CHECK(ctx.dual_norm_Vh(w) == Catch::Approx(brute).margin(1e-9));
        }
    }
}

TEST_CASE("inf-sup constant behavior across pairs and refinements") {
    SECTION("stable pair varies little under refinement") {
        std::vector<double> alphas;
        for (int n : {2, 4, 8}) {
            const FESpacePair space = build_space(generate_structured_square(n), SpacePair::TaylorHood);
            alphas.push_back(inf_sup_constant(space, assemble_system(space)));
        }
        const double lo = *std::min_element(alphas.begin(), alphas.end());
        const double hi = *std::max_element(alphas.begin(), alphas.end());
        CHECK(lo > 0.0);
        CHECK((hi - lo) / hi < 0.10);
    }

    SECTION("invariant under vertex renumbering") {
        const Mesh base = generate_structured_square(2);
        const FESpacePair a = build_space(base, SpacePair::TaylorHood);
        const FESpacePair b = build_space(permute_vertices(base, 17), SpacePair::TaylorHood);
        const double alpha_a = inf_sup_constant(a, assemble_system(a));
        const double alpha_b = inf_sup_constant(b, assemble_system(b));
        CHECK(alpha_a == Catch::Approx(alpha_b).margin(1e-10));
    }

    SECTION("equal-order pair degrades under refinement") {
        std::vector<double> alphas;
        for (int n : {2, 4, 8}) {
            const FESpacePair space = build_space(generate_structured_square(n), SpacePair::P1P1);
            alphas.push_back(inf_sup_constant(space, assemble_system(space)));
        }
        CHECK(alphas[1] < 0.9 * alphas[0]);
        CHECK(alphas[2] < 0.9 * alphas[1]);
    }

    SECTION("MINI pair is stable") {
        std::vector<double> alphas;
        for (int n : {2, 4, 8}) {
            const FESpacePair space = build_space(generate_structured_square(n), SpacePair::MINI);
            alphas.push_back(inf_sup_constant(space, assemble_system(space)));
        }
        const double lo = *std::min_element(alphas.begin(), alphas.end());
        const double hi = *std::max_element(alphas.begin(), alphas.end());
        CHECK(lo > 0.0);
        CHECK((hi - lo) / hi < 0.10);
    }
}

TEST_CASE("dual norm equivalence constant") {
    const FESpacePair space = build_space(generate_structured_square(2), SpacePair::TaylorHood);
    const AssembledSystem sys = assemble_system(space);
    const DualNormContext ctx(space, sys);
    const double c_star = equivalence_constant(space, sys);

    CHECK(c_star > 0.0);
    CHECK(c_star <= 1.0 + 1e-12);

    SECTION("minimality: no sampled field in V_h achieves a smaller ratio") {
        const Eigen::MatrixXd Z = nullspace_basis(ctx.divergence());
        std::mt19937 rng(31);
        std::normal_distribution<double> dist;
        for (int s = 0; s < 50; ++s) {
            Vector y(Z.cols());
            for (int i = 0; i < y.size(); ++i) y[i] = dist(rng);
            const Vector w_field = Z * y;
            // Functional tested is v -> (w, v).
            const Vector w = ctx.mass() * w_field;
            const double ratio = ctx.dual_norm_Vh(w) / ctx.dual_norm_Xh(w);
            CHECK(ratio >= c_star - 1e-10);
            CHECK(ratio <= 1.0 + 1e-12);
        }
    }
}

TEST_CASE("L2 projection onto the divergence-free subspace") {
    const FESpacePair space = build_space(generate_structured_square(2), SpacePair::TaylorHood);
    const AssembledSystem sys = assemble_system(space);
    const DualNormContext ctx(space, sys);

    SECTION("fixes members of the subspace") {
        const Eigen::MatrixXd Z = nullspace_basis(ctx.divergence());
        std::mt19937 rng(41);
        std::normal_distribution<double> dist;
        Vector y(Z.cols());
        for (int i = 0; i < y.size(); ++i) y[i] = dist(rng);
        const Vector w = Z * y;
        const Vector projected = ctx.mass_saddle_solve(ctx.mass() * w);
        CHECK((projected - w).norm() <= 1e-10 * w.norm());
    }

    SECTION("residual is orthogonal to the subspace") {
        const ManufacturedSolution ms = manufactured_solution("stream_vortex", 1.0);
        const ProjectionResult proj =
            l2_project_Vh(space, sys, ctx, ms.velocity, ms.velocity_gradient, 0.0);
        const Vector pairing = assemble_load(space, ms.velocity, 0.0, 9);
        const Vector residual = ctx.restriction().restrict_vector(pairing) -
                                ctx.mass() * ctx.restriction().restrict_vector(proj.coeffs);
        const Eigen::MatrixXd Z = nullspace_basis(ctx.divergence());
        CHECK((Z.transpose() * residual).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK(proj.stability_ratio > 0.0);
        CHECK(proj.stability_ratio < 2.0);
    }
}
