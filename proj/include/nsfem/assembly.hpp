#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <vector>

#include "nsfem/elements.hpp"
#include "nsfem/quadrature.hpp"

namespace nsfem {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class GramForm { Mass, Stiffness };
enum class GramWhich { Velocity, Pressure };

namespace detail {

struct ElementGeometry {
    double detJ = 0.0;   // positive for ccw triangles
    double jit[2][2];    // J^{-T}

    ElementGeometry(const Mesh& mesh, const Triangle& t) {
        const Vec2 a = mesh.vertices[t.v[0]];
        const Vec2 b = mesh.vertices[t.v[1]];
        const Vec2 c = mesh.vertices[t.v[2]];
        const double j00 = b.x - a.x, j01 = c.x - a.x;
        const double j10 = b.y - a.y, j11 = c.y - a.y;
        detJ = j00 * j11 - j01 * j10;
        jit[0][0] = j11 / detJ;
        jit[0][1] = -j10 / detJ;
        jit[1][0] = -j01 / detJ;
        jit[1][1] = j00 / detJ;
    }

    Vec2 physical_grad(Vec2 ref_grad) const {
        return {jit[0][0] * ref_grad.x + jit[0][1] * ref_grad.y,
                jit[1][0] * ref_grad.x + jit[1][1] * ref_grad.y};
    }
};

/// Basis values/reference gradients tabulated at the quadrature points.
struct TabulatedBasis {
    std::vector<BasisEval> at_point;

    TabulatedBasis(ElementFamily family, const QuadratureRule& rule) {
        at_point.reserve(rule.size());
        for (int q = 0; q < rule.size(); ++q)
            at_point.push_back(reference_basis_eval(family, rule.points[q]));
    }
};

inline Vec2 map_point(const Mesh& mesh, const Triangle& t, double x, double y) {
    const Vec2 a = mesh.vertices[t.v[0]];
    const Vec2 b = mesh.vertices[t.v[1]];
    const Vec2 c = mesh.vertices[t.v[2]];
    return {a.x + (b.x - a.x) * x + (c.x - a.x) * y, a.y + (b.y - a.y) * x + (c.y - a.y) * y};
}

inline SparseMatrix from_triplets(int rows, int cols,
                                  std::vector<Eigen::Triplet<double>>& trips) {
    SparseMatrix out(rows, cols);
    out.setFromTriplets(trips.begin(), trips.end());
    out.makeCompressed();
    return out;
}

}  // namespace detail

inline constexpr int kDefaultQuadratureDegree = 5;

/// Mass or stiffness Gram matrix.  Velocity matrices act on interleaved
/// (node, component) dofs and are block diagonal across components.
inline SparseMatrix assemble_gram(const FESpacePair& space, GramForm form, GramWhich which,
                                  int quad_degree = kDefaultQuadratureDegree) {
    const Mesh& mesh = space.mesh();
    const QuadratureRule rule = quadrature_rule(quad_degree);
    const ElementFamily family =
        which == GramWhich::Velocity ? space.velocity_family() : ElementFamily::P1;
    const detail::TabulatedBasis tab(family, rule);
    const int nloc = family_info(family).local_size;
    const bool vector_valued = which == GramWhich::Velocity;
    const int n = vector_valued ? space.n_vel_dofs() : space.n_pres_dofs();

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(mesh.triangles.size() * nloc * nloc * (vector_valued ? 2 : 1));
    Eigen::MatrixXd local(nloc, nloc);
    for (int c = 0; c < mesh.n_triangles(); ++c) {
        const auto& tri = mesh.triangles[c];
        const detail::ElementGeometry geom(mesh, tri);
        local.setZero();
        for (int q = 0; q < rule.size(); ++q) {
            const double w = rule.weights[q] * geom.detJ;
            const auto& be = tab.at_point[q];
            for (int i = 0; i < nloc; ++i) {
                if (form == GramForm::Mass) {
                    for (int j = 0; j < nloc; ++j)
                        local(i, j) += w * be.values[i] * be.values[j];
                } else {
                    const Vec2 gi = geom.physical_grad(be.gradients[i]);
                    for (int j = 0; j < nloc; ++j) {
                        const Vec2 gj = geom.physical_grad(be.gradients[j]);
                        local(i, j) += w * dot(gi, gj);
                    }
                }
            }
        }
        const std::vector<int>* nodes;
        std::vector<int> pnodes;
        if (vector_valued) {
            nodes = &space.velocity_nodes(c);
        } else {
            pnodes = {tri.v[0], tri.v[1], tri.v[2]};
            nodes = &pnodes;
        }
        for (int i = 0; i < nloc; ++i)
            for (int j = 0; j < nloc; ++j) {
                if (vector_valued) {
                    for (int comp = 0; comp < 2; ++comp)
                        trips.emplace_back(2 * (*nodes)[i] + comp, 2 * (*nodes)[j] + comp,
                                           local(i, j));
                } else {
                    trips.emplace_back((*nodes)[i], (*nodes)[j], local(i, j));
                }
            }
    }
    return detail::from_triplets(n, n, trips);
}

/// Divergence coupling: entry (q_i, d_c phi_j) at velocity dof 2*j+c.
inline SparseMatrix assemble_divergence(const FESpacePair& space,
                                        int quad_degree = kDefaultQuadratureDegree) {
    const Mesh& mesh = space.mesh();
    const QuadratureRule rule = quadrature_rule(quad_degree);
    const detail::TabulatedBasis vtab(space.velocity_family(), rule);
    const detail::TabulatedBasis ptab(ElementFamily::P1, rule);
    const int nv = family_info(space.velocity_family()).local_size;

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(mesh.triangles.size() * 3 * nv * 2);
    for (int c = 0; c < mesh.n_triangles(); ++c) {
        const auto& tri = mesh.triangles[c];
        const detail::ElementGeometry geom(mesh, tri);
        const auto& nodes = space.velocity_nodes(c);
        Eigen::MatrixXd local = Eigen::MatrixXd::Zero(3, 2 * nv);
        for (int q = 0; q < rule.size(); ++q) {
            const double w = rule.weights[q] * geom.detJ;
            for (int i = 0; i < 3; ++i) {
                const double qi = ptab.at_point[q].values[i];
                for (int j = 0; j < nv; ++j) {
                    const Vec2 gj = geom.physical_grad(vtab.at_point[q].gradients[j]);
                    local(i, 2 * j) += w * qi * gj.x;
                    local(i, 2 * j + 1) += w * qi * gj.y;
                }
            }
        }
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < nv; ++j)
                for (int comp = 0; comp < 2; ++comp)
                    trips.emplace_back(tri.v[i], 2 * nodes[j] + comp, local(i, 2 * j + comp));
    }
    return detail::from_triplets(space.n_pres_dofs(), space.n_vel_dofs(), trips);
}

/// Convection linearized at coefficients w, in the explicitly
/// skew-symmetric form: N_ij = 1/2 (w.grad phi_j, phi_i) - 1/2 (w.grad
/// phi_i, phi_j), block diagonal across the two components.
inline SparseMatrix assemble_convection(const FESpacePair& space, const Vector& w,
                                        int quad_degree = kDefaultQuadratureDegree) {
    if (w.size() != space.n_vel_dofs())
        throw std::invalid_argument("assemble_convection: coefficient length mismatch");
    const Mesh& mesh = space.mesh();
    const QuadratureRule rule = quadrature_rule(quad_degree);
    const detail::TabulatedBasis tab(space.velocity_family(), rule);
    const int nloc = family_info(space.velocity_family()).local_size;

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(mesh.triangles.size() * nloc * nloc * 2);
    Eigen::MatrixXd local(nloc, nloc);
    std::vector<Vec2> grads(nloc);
    for (int c = 0; c < mesh.n_triangles(); ++c) {
        const auto& tri = mesh.triangles[c];
        const detail::ElementGeometry geom(mesh, tri);
        const auto& nodes = space.velocity_nodes(c);
        local.setZero();
        for (int q = 0; q < rule.size(); ++q) {
            const double wq = rule.weights[q] * geom.detJ;
            const auto& be = tab.at_point[q];
            Vec2 wval{0.0, 0.0};
            for (int j = 0; j < nloc; ++j) {
                wval.x += w[2 * nodes[j]] * be.values[j];
                wval.y += w[2 * nodes[j] + 1] * be.values[j];
                grads[j] = geom.physical_grad(be.gradients[j]);
            }
            for (int i = 0; i < nloc; ++i) {
                const double wi = dot(wval, grads[i]);
                for (int j = 0; j < nloc; ++j) {
                    const double wj = dot(wval, grads[j]);
                    local(i, j) += 0.5 * wq * (wj * be.values[i] - wi * be.values[j]);
                }
            }
        }
        for (int i = 0; i < nloc; ++i)
            for (int j = 0; j < nloc; ++j)
                for (int comp = 0; comp < 2; ++comp)
                    trips.emplace_back(2 * nodes[i] + comp, 2 * nodes[j] + comp, local(i, j));
    }
    return detail::from_triplets(space.n_vel_dofs(), space.n_vel_dofs(), trips);
}

/// Load vector entry i = (f(.,t), phi_i).
inline Vector assemble_load(const FESpacePair& space, const std::function<Vec2(Vec2, double)>& f,
                            double t, int quad_degree = kDefaultQuadratureDegree) {
    const Mesh& mesh = space.mesh();
    const QuadratureRule rule = quadrature_rule(quad_degree);
    const detail::TabulatedBasis tab(space.velocity_family(), rule);
    const int nloc = family_info(space.velocity_family()).local_size;

    Vector load = Vector::Zero(space.n_vel_dofs());
    for (int c = 0; c < mesh.n_triangles(); ++c) {
        const auto& tri = mesh.triangles[c];
        const detail::ElementGeometry geom(mesh, tri);
        const auto& nodes = space.velocity_nodes(c);
        for (int q = 0; q < rule.size(); ++q) {
            const double w = rule.weights[q] * geom.detJ;
            const Vec2 fx = f(detail::map_point(mesh, tri, rule.x(q), rule.y(q)), t);
            const auto& be = tab.at_point[q];
            for (int i = 0; i < nloc; ++i) {
                load[2 * nodes[i]] += w * fx.x * be.values[i];
                load[2 * nodes[i] + 1] += w * fx.y * be.values[i];
            }
        }
    }
    return load;
}

/// Entries (1, q_i): one third of the area of the support of each P1
/// pressure basis function.
inline Vector assemble_pressure_mean(const FESpacePair& space) {
    const Mesh& mesh = space.mesh();
    Vector m = Vector::Zero(space.n_pres_dofs());
    for (const auto& tri : mesh.triangles) {
        const double area = signed_area(mesh, tri);
        for (int i = 0; i < 3; ++i) m[tri.v[i]] += area / 3.0;
    }
    return m;
}

/// The nu-independent operators of the scheme; convection is assembled per
/// step.
struct AssembledSystem {
    SparseMatrix A_visc;   // velocity stiffness
    SparseMatrix M_vel;    // velocity mass
    SparseMatrix B_div;    // n_pres x n_vel
    SparseMatrix M_pres;   // pressure mass
    Vector mean_vec;       // (1, q_i)
};

inline AssembledSystem assemble_system(const FESpacePair& space,
                                       int quad_degree = kDefaultQuadratureDegree) {
    AssembledSystem sys;
    sys.A_visc = assemble_gram(space, GramForm::Stiffness, GramWhich::Velocity, quad_degree);
    sys.M_vel = assemble_gram(space, GramForm::Mass, GramWhich::Velocity, quad_degree);
    sys.B_div = assemble_divergence(space, quad_degree);
    sys.M_pres = assemble_gram(space, GramForm::Mass, GramWhich::Pressure, quad_degree);
    sys.mean_vec = assemble_pressure_mean(space);
    return sys;
}

/// Dirichlet-constrained saddle-point operator
///   [ K  -B^T  0 ]   [u]   [rhs_u]
///   [ B   0    m ] * [p] = [rhs_p]
///   [ 0  m^T   0 ]   [s]   [  0  ]
/// Dirichlet rows/columns are eliminated symmetrically (diagonal 1) and
/// contributions of prescribed boundary values are folded into the
/// right-hand side by constrained_rhs().
struct SaddleSystem {
    SparseMatrix S;
    int n_vel = 0;
    int n_pres = 0;
    const std::vector<char>* dirichlet_mask = nullptr;

    int size() const { return n_vel + n_pres + 1; }
};

inline SaddleSystem make_saddle(const SparseMatrix& K, const SparseMatrix& B, const Vector& mean,
                                const std::vector<char>& dirichlet_mask) {
    SaddleSystem sys;
    sys.n_vel = static_cast<int>(K.rows());
    sys.n_pres = static_cast<int>(B.rows());
    sys.dirichlet_mask = &dirichlet_mask;
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(K.nonZeros() + 2 * B.nonZeros() + 2 * sys.n_pres + sys.n_vel);
    for (int r = 0; r < K.outerSize(); ++r)
        for (SparseMatrix::InnerIterator it(K, r); it; ++it)
            if (!dirichlet_mask[it.row()] && !dirichlet_mask[it.col()])
                trips.emplace_back(it.row(), it.col(), it.value());
    for (int d = 0; d < sys.n_vel; ++d)
        if (dirichlet_mask[d]) trips.emplace_back(d, d, 1.0);
    for (int r = 0; r < B.outerSize(); ++r)
        for (SparseMatrix::InnerIterator it(B, r); it; ++it)
            if (!dirichlet_mask[it.col()]) {
                trips.emplace_back(sys.n_vel + it.row(), it.col(), it.value());
                trips.emplace_back(it.col(), sys.n_vel + it.row(), -it.value());
            }
    const int mrow = sys.n_vel + sys.n_pres;
    for (int q = 0; q < sys.n_pres; ++q) {
        trips.emplace_back(sys.n_vel + q, mrow, mean[q]);
        trips.emplace_back(mrow, sys.n_vel + q, mean[q]);
    }
    sys.S = detail::from_triplets(sys.size(), sys.size(), trips);
    return sys;
}

/// Right-hand side for make_saddle with prescribed boundary values g (full
/// velocity-length vector; only Dirichlet entries are read).
inline Vector constrained_rhs(const SaddleSystem& sys, const SparseMatrix& K,
                              const SparseMatrix& B, const Vector& load, const Vector& g) {
    const auto& mask = *sys.dirichlet_mask;
    Vector rhs = Vector::Zero(sys.size());
    for (int i = 0; i < sys.n_vel; ++i) rhs[i] = mask[i] ? g[i] : load[i];
    for (int r = 0; r < K.outerSize(); ++r)
        for (SparseMatrix::InnerIterator it(K, r); it; ++it)
            if (!mask[it.row()] && mask[it.col()]) rhs[it.row()] -= it.value() * g[it.col()];
    for (int r = 0; r < B.outerSize(); ++r)
        for (SparseMatrix::InnerIterator it(B, r); it; ++it)
            if (mask[it.col()]) rhs[sys.n_vel + it.row()] -= it.value() * g[it.col()];
    return rhs;
}

/// Coordinate text dump (row col value per line, 0-based).
inline void dump_coordinate(const SparseMatrix& A, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("dump_coordinate: cannot open " + path);
    out.precision(17);
    for (int r = 0; r < A.outerSize(); ++r)
        for (SparseMatrix::InnerIterator it(A, r); it; ++it)
            out << it.row() << " " << it.col() << " " << it.value() << "\n";
}

}  // namespace nsfem
