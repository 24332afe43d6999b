#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

#include "nsfem/assembly.hpp"
#include "nsfem/linalg.hpp"

namespace nsfem {

enum class NormKind { L2, H1Semi };

inline double gram_norm(const SparseMatrix& gram, const Vector& x) {
    return std::sqrt(std::max(0.0, x.dot(gram * x)));
}

inline double norm(const FESpacePair& space, const Vector& coeffs, NormKind kind,
                   GramWhich which) {
    const int expected = which == GramWhich::Velocity ? space.n_vel_dofs() : space.n_pres_dofs();
    if (coeffs.size() != expected) throw std::invalid_argument("norm: coefficient length mismatch");
    const GramForm form = kind == NormKind::L2 ? GramForm::Mass : GramForm::Stiffness;
    return gram_norm(assemble_gram(space, form, which), coeffs);
}

/// Discrete-in-time norms: p = 2 carries the dt weight, p = infinity is the
/// max over the series.
inline double triple_bar_2(const std::vector<double>& series, double dt) {
    if (series.empty()) throw std::invalid_argument("triple_bar: empty series");
    double s = 0.0;
    for (double v : series) s += v * v;
    return std::sqrt(dt * s);
}

inline double triple_bar_inf(const std::vector<double>& series) {
    if (series.empty()) throw std::invalid_argument("triple_bar: empty series");
    return *std::max_element(series.begin(), series.end());
}

/// Everything needed to evaluate the dual norms on X_h* and V_h*: the
/// constrained stiffness Gram (Riesz solve) and the stiffness saddle system
/// for the sup over discretely divergence-free fields.
class DualNormContext {
  public:
    DualNormContext(const FESpacePair& space, const AssembledSystem& sys)
        : restriction_(space.dirichlet_mask()),
          A_ii_(restriction_.restrict_matrix(sys.A_visc)),
          B_i_(restriction_.restrict_columns(sys.B_div)),
          M_ii_(restriction_.restrict_matrix(sys.M_vel)),
          mean_(sys.mean_vec),
          fact_A_(A_ii_) {
        no_mask_.assign(restriction_.n_free(), 0);
        saddle_ = make_saddle(A_ii_, B_i_, mean_, no_mask_);
        fact_saddle_ = std::make_shared<Factorization>(saddle_.S);
    }

    const DofRestriction& restriction() const { return restriction_; }
    const SparseMatrix& stiffness() const { return A_ii_; }
    const SparseMatrix& divergence() const { return B_i_; }
    const SparseMatrix& mass() const { return M_ii_; }
    const Vector& mean() const { return mean_; }
    const Factorization& stiffness_factorization() const { return fact_A_; }

    /// ||w||_{X_h*} = sqrt(w^T A^{-1} w): the exact discrete sup via the
    /// Riesz representer in the gradient inner product.
    double dual_norm_Xh(const Vector& w_reduced) const {
        if (w_reduced.size() != restriction_.n_free())
            throw std::invalid_argument("dual_norm_Xh: length mismatch");
        return std::sqrt(std::max(0.0, w_reduced.dot(fact_A_.solve(w_reduced))));
    }

    /// ||w||_{V_h*}: sup over V_h, realized by the stiffness saddle solve
    /// A z + B^T mu = w, B z = 0.
    double dual_norm_Vh(const Vector& w_reduced) const {
        if (w_reduced.size() != restriction_.n_free())
            throw std::invalid_argument("dual_norm_Vh: length mismatch");
        Vector rhs = Vector::Zero(saddle_.size());
        rhs.head(restriction_.n_free()) = w_reduced;
        const Vector sol = fact_saddle_->solve(rhs);
        return std::sqrt(std::max(0.0, w_reduced.dot(sol.head(restriction_.n_free()))));
    }

    /// Constrained divergence-free solve of the mass saddle problem
    /// M z + B^T mu = r, B z = 0 (used by the L2 projection onto V_h).
    Vector mass_saddle_solve(const Vector& r_reduced) const {
        if (!fact_mass_saddle_) {
            mass_saddle_ = make_saddle(M_ii_, B_i_, mean_, no_mask_);
            fact_mass_saddle_ = std::make_shared<Factorization>(mass_saddle_.S);
        }
        Vector rhs = Vector::Zero(mass_saddle_.size());
        rhs.head(restriction_.n_free()) = r_reduced;
        const Vector sol = fact_mass_saddle_->solve(rhs);
        return sol.head(restriction_.n_free());
    }

  private:
    DofRestriction restriction_;
    SparseMatrix A_ii_, B_i_, M_ii_;
    Vector mean_;
    Factorization fact_A_;
    std::vector<char> no_mask_;
    SaddleSystem saddle_;
    std::shared_ptr<Factorization> fact_saddle_;
    mutable SaddleSystem mass_saddle_;
    mutable std::shared_ptr<Factorization> fact_mass_saddle_;
};

namespace detail {

/// M_p-orthogonal complement of the constant pressure mode, as dense
/// columns: any q = C y satisfies mean^T q = 0.
inline Eigen::MatrixXd zero_mean_complement(const Vector& mean) {
    const int np = static_cast<int>(mean.size());
    Eigen::HouseholderQR<Eigen::MatrixXd> qr{Eigen::MatrixXd(mean)};
    Eigen::MatrixXd Q = qr.householderQ();
    return Q.rightCols(np - 1);
}

}  // namespace detail

/// Inf-sup constant alpha: sqrt of the smallest nonzero eigenvalue of the
/// pressure Schur pencil B A^{-1} B^T q = lambda M_p q on zero-mean
/// pressures.  The constant mode is removed by the mean constraint; any
/// further (near-)zero eigenvalues are spurious pressure modes of an
/// unstable pair and are skipped so that alpha reports the constant seen by
/// the remaining modes.
inline double inf_sup_constant(const FESpacePair& space, const AssembledSystem& sys) {
    DofRestriction restriction(space.dirichlet_mask());
    const SparseMatrix A_ii = restriction.restrict_matrix(sys.A_visc);
    const SparseMatrix B_i = restriction.restrict_columns(sys.B_div);
    const int np = space.n_pres_dofs();
    if (np > dense_cap() || restriction.n_free() > 20 * dense_cap())
        throw std::runtime_error("inf_sup_constant: problem exceeds dense cap");
    Factorization fact(A_ii);
    Eigen::MatrixXd Bt = Eigen::MatrixXd(B_i).transpose();
    Eigen::MatrixXd schur = Bt.transpose() * fact.solve(Bt);
    Eigen::MatrixXd C = detail::zero_mean_complement(sys.mean_vec);
    Eigen::MatrixXd S_red = C.transpose() * schur * C;
    Eigen::MatrixXd M_red = C.transpose() * Eigen::MatrixXd(sys.M_pres) * C;
    const EigenResult eig = sym_generalized_eigs(S_red, M_red, np - 1, EigWhich::Smallest,
                                                 "pressure Schur pencil");
    const double lambda_max = eig.eigenvalues[eig.eigenvalues.size() - 1];
    const double tol = 1e-10 * std::max(1.0, lambda_max);
    for (int i = 0; i < eig.eigenvalues.size(); ++i)
        if (eig.eigenvalues[i] > tol) return std::sqrt(eig.eigenvalues[i]);
    return 0.0;
}

/// Equivalence constant C_* of the dual norms on V_h: the minimum over
/// w in V_h of ||w||_{V_h*} / ||w||_{X_h*}, via the reduced pencil on an
/// explicit nullspace basis.  The functional tested is v -> (w, v).
inline double equivalence_constant(const FESpacePair& space, const AssembledSystem& sys) {
    DofRestriction restriction(space.dirichlet_mask());
    const SparseMatrix A_ii = restriction.restrict_matrix(sys.A_visc);
    const SparseMatrix B_i = restriction.restrict_columns(sys.B_div);
    const SparseMatrix M_ii = restriction.restrict_matrix(sys.M_vel);
    const Eigen::MatrixXd Z = nullspace_basis(B_i);
    const int k = static_cast<int>(Z.cols());
    if (k == 0) throw std::runtime_error("equivalence_constant: empty divergence-free space");
    Factorization fact_A(A_ii);

    const Eigen::MatrixXd R = Eigen::MatrixXd(M_ii) * Z;       // functionals of basis fields
    const Eigen::MatrixXd P = Z.transpose() * R;               // Z^T M Z
    const Eigen::MatrixXd G_A = Z.transpose() * (Eigen::MatrixXd(A_ii) * Z);
    const Eigen::MatrixXd Y = fact_A.solve(R);                 // A^{-1} M Z
    const Eigen::MatrixXd D = R.transpose() * Y;               // X_h* Gram
    // V_h* Gram: P (Z^T A Z)^{-1} P
    Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (G_A + G_A.transpose()));
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("equivalence_constant: reduced stiffness not SPD");
    const Eigen::MatrixXd NV = P.transpose() * llt.solve(P);
    const EigenResult eig = sym_generalized_eigs(0.5 * (NV + NV.transpose()),
                                                 0.5 * (D + D.transpose()), 1,
                                                 EigWhich::Smallest, "dual norm equivalence pencil");
    return std::sqrt(std::max(0.0, eig.eigenvalues[0]));
}

/// Sampled lower bound for the trilinear form constant C_1: the maximum of
/// |b(u,v,z)| / (grad norms product) over random interior fields.
inline double sample_c1(const FESpacePair& space, const AssembledSystem& sys, int n_samples,
                        unsigned seed) {
    DofRestriction restriction(space.dirichlet_mask());
    const SparseMatrix A_ii = restriction.restrict_matrix(sys.A_visc);
    std::mt19937 rng(seed);
    std::normal_distribution<double> dist;
    auto random_field = [&] {
        Vector w(restriction.n_free());
        for (int i = 0; i < w.size(); ++i) w[i] = dist(rng);
        return w;
    };
    double best = 0.0;
    for (int s = 0; s < n_samples; ++s) {
        const Vector u = random_field(), v = random_field(), z = random_field();
        const Vector u_full = restriction.prolong_vector(u, space.n_vel_dofs());
        const Vector v_full = restriction.prolong_vector(v, space.n_vel_dofs());
        const Vector z_full = restriction.prolong_vector(z, space.n_vel_dofs());
        const SparseMatrix N = assemble_convection(space, u_full);
        const double b = z_full.dot(N * v_full);
        const double denom = gram_norm(A_ii, u) * gram_norm(A_ii, v) * gram_norm(A_ii, z);
        if (denom > 0.0) best = std::max(best, std::abs(b) / denom);
    }
    return best;
}

/// L2-orthogonal projection onto V_h of a velocity field given by callables
/// (value and Jacobian).  Returns full-length coefficients and the ratio
/// ||grad Pu|| / ||grad u||.
struct ProjectionResult {
    Vector coeffs;
    double stability_ratio = 0.0;
};

inline ProjectionResult l2_project_Vh(
    const FESpacePair& space, const AssembledSystem& sys, const DualNormContext& ctx,
    const std::function<Vec2(Vec2, double)>& u,
    const std::function<Eigen::Matrix2d(Vec2, double)>& grad_u, double t,
    int quad_degree = 9) {
    const Vector pairing = assemble_load(space, u, t, quad_degree);
    const Vector r = ctx.restriction().restrict_vector(pairing);
    const Vector z = ctx.mass_saddle_solve(r);
    ProjectionResult out;
    out.coeffs = ctx.restriction().prolong_vector(z, space.n_vel_dofs());
    const double grad_Pu = gram_norm(ctx.stiffness(), z);

    // ||grad u|| by high-order quadrature on the exact field.
    const QuadratureRule rule = quadrature_rule(quad_degree);
    double acc = 0.0;
    const Mesh& mesh = space.mesh();
    for (int c = 0; c < mesh.n_triangles(); ++c) {
        const auto& tri = mesh.triangles[c];
        const detail::ElementGeometry geom(mesh, tri);
        for (int q = 0; q < rule.size(); ++q) {
            const Eigen::Matrix2d g = grad_u(detail::map_point(mesh, tri, rule.x(q), rule.y(q)), t);
            acc += rule.weights[q] * geom.detJ * g.squaredNorm();
        }
    }
    out.stability_ratio = grad_Pu / std::sqrt(acc);
    return out;
}

struct ConstantsReport {
    int level = 0;
    double h_max = 0.0;
    double alpha = 0.0;
    double c_star = 0.0;
    double c1_sample = 0.0;
    double projection_ratio = 0.0;
};

}  // namespace nsfem
