#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <cstdlib>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "nsfem/assembly.hpp"

namespace nsfem {

/// Size cap for dense eigenproblems (constants are desk-scale only).
inline int dense_cap() {
    if (const char* env = std::getenv("NSFEM_DENSE_CAP")) return std::atoi(env);
    return 3000;
}

/// Sparse LU with partial pivoting.  Immutable after construction; safe for
/// concurrent solves with distinct right-hand sides.
class Factorization {
  public:
    explicit Factorization(const SparseMatrix& A) {
        if (A.rows() != A.cols()) throw std::invalid_argument("factorize: matrix not square");
        Eigen::SparseMatrix<double> col_major = A;
        lu_ = std::make_shared<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
        lu_->compute(col_major);
        if (lu_->info() != Eigen::Success)
            throw std::runtime_error("factorize: numerically singular matrix (" +
                                     std::string(lu_->lastErrorMessage()) + ")");
    }

    Vector solve(const Vector& b) const {
        Vector x = lu_->solve(b);
        if (lu_->info() != Eigen::Success) throw std::runtime_error("solve: backsolve failed");
        return x;
    }

    Eigen::MatrixXd solve(const Eigen::MatrixXd& B) const {
        Eigen::MatrixXd X = lu_->solve(B);
        if (lu_->info() != Eigen::Success) throw std::runtime_error("solve: backsolve failed");
        return X;
    }

  private:
    std::shared_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> lu_;
};

inline Factorization factorize(const SparseMatrix& A) { return Factorization(A); }

struct EigenResult {
    Vector eigenvalues;          // ascending
    Eigen::MatrixXd eigenvectors;  // M-orthonormal columns
    std::string problem;
};

enum class EigWhich { Smallest, Largest };

/// Dense symmetric generalized eigenproblem S v = lambda M v via Cholesky
/// reduction (Eigen's Ax = lambda Bx mode).  Returns k pairs from the
/// requested end of the spectrum, always in ascending eigenvalue order.
inline EigenResult sym_generalized_eigs(const Eigen::MatrixXd& S, const Eigen::MatrixXd& M,
                                        int k, EigWhich which,
                                        const std::string& description = "") {
    const int n = static_cast<int>(S.rows());
    if (n > dense_cap())
        throw std::runtime_error("sym_generalized_eigs: problem size " + std::to_string(n) +
                                 " exceeds dense cap " + std::to_string(dense_cap()) +
                                 "; use a coarser mesh or raise NSFEM_DENSE_CAP");
    if (S.cols() != n || M.rows() != n || M.cols() != n)
        throw std::invalid_argument("sym_generalized_eigs: size mismatch");
    if ((S - S.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + S.cwiseAbs().maxCoeff()))
        throw std::invalid_argument("sym_generalized_eigs: S not symmetric");
    {
        Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (M + M.transpose()));
        if (llt.info() != Eigen::Success)
            throw std::runtime_error("sym_generalized_eigs: M is not positive definite");
    }
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(
        0.5 * (S + S.transpose()), 0.5 * (M + M.transpose()));
    if (es.info() != Eigen::Success)
        throw std::runtime_error("sym_generalized_eigs: M not SPD or reduction failed");
    EigenResult out;
    out.problem = description;
    k = std::min(k, n);
    out.eigenvalues.resize(k);
    out.eigenvectors.resize(n, k);
    for (int i = 0; i < k; ++i) {
        const int src = which == EigWhich::Smallest ? i : n - k + i;
        out.eigenvalues[i] = es.eigenvalues()(src);
        out.eigenvectors.col(i) = es.eigenvectors().col(src);
    }
    return out;
}

/// Orthonormal basis for the kernel of a (Dirichlet-constrained) divergence
/// operator, via full SVD.  Columns span V_h expressed on the constrained
/// velocity dofs.
inline Eigen::MatrixXd nullspace_basis(const SparseMatrix& B_constrained) {
    const int rows = static_cast<int>(B_constrained.rows());
    const int cols = static_cast<int>(B_constrained.cols());
    if (cols > dense_cap())
        throw std::runtime_error("nullspace_basis: " + std::to_string(cols) +
                                 " columns exceeds dense cap " + std::to_string(dense_cap()));
    Eigen::MatrixXd dense = Eigen::MatrixXd(B_constrained);
    Eigen::BDCSVD<Eigen::MatrixXd> svd(dense, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double smax = sv.size() > 0 ? sv(0) : 0.0;
    const double tol = 1e-10 * std::max(1.0, smax);
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
        if (sv(i) > tol) ++rank;
    (void)rows;
    return svd.matrixV().rightCols(cols - rank);
}

/// Index bookkeeping for the Dirichlet-constrained (interior) velocity
/// subspace.
struct DofRestriction {
    std::vector<int> free_dofs;          // interior velocity dofs, ascending
    std::vector<int> full_to_free;       // -1 for Dirichlet dofs

    explicit DofRestriction(const std::vector<char>& dirichlet_mask) {
        full_to_free.assign(dirichlet_mask.size(), -1);
        for (std::size_t i = 0; i < dirichlet_mask.size(); ++i)
            if (!dirichlet_mask[i]) {
                full_to_free[i] = static_cast<int>(free_dofs.size());
                free_dofs.push_back(static_cast<int>(i));
            }
    }

    int n_free() const { return static_cast<int>(free_dofs.size()); }

    Vector restrict_vector(const Vector& full) const {
        Vector out(n_free());
        for (int i = 0; i < n_free(); ++i) out[i] = full[free_dofs[i]];
        return out;
    }

    Vector prolong_vector(const Vector& reduced, int full_size) const {
        Vector out = Vector::Zero(full_size);
        for (int i = 0; i < n_free(); ++i) out[free_dofs[i]] = reduced[i];
        return out;
    }

    /// Rows and columns restricted to interior dofs.
    SparseMatrix restrict_matrix(const SparseMatrix& A) const {
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(A.nonZeros());
        for (int r = 0; r < A.outerSize(); ++r)
            for (SparseMatrix::InnerIterator it(A, r); it; ++it) {
                const int ri = full_to_free[it.row()];
                const int ci = full_to_free[it.col()];
                if (ri >= 0 && ci >= 0) trips.emplace_back(ri, ci, it.value());
            }
        return detail::from_triplets(n_free(), n_free(), trips);
    }

    /// Columns restricted to interior dofs (for the divergence block).
    SparseMatrix restrict_columns(const SparseMatrix& B) const {
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(B.nonZeros());
        for (int r = 0; r < B.outerSize(); ++r)
            for (SparseMatrix::InnerIterator it(B, r); it; ++it) {
                const int ci = full_to_free[it.col()];
                if (ci >= 0) trips.emplace_back(it.row(), ci, it.value());
            }
        return detail::from_triplets(static_cast<int>(B.rows()), n_free(), trips);
    }
};

}  // namespace nsfem
