#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <stdexcept>
#include <vector>

#include "nsfem/mesh.hpp"
#include "nsfem/quadrature.hpp"

namespace nsfem {

enum class ElementFamily { P1, P2, Bubble, MiniVelocity };
enum class SpacePair { TaylorHood, MINI, P1P1 };

struct FamilyInfo {
    int polynomial_degree = 0;
    int dofs_per_vertex = 0;
    int dofs_per_edge = 0;
    int dofs_per_cell = 0;
    int local_size = 0;
};

inline FamilyInfo family_info(ElementFamily f) {
    switch (f) {
        case ElementFamily::P1: return {1, 1, 0, 0, 3};
        case ElementFamily::P2: return {2, 1, 1, 0, 6};
        case ElementFamily::Bubble: return {3, 0, 0, 1, 1};
        case ElementFamily::MiniVelocity: return {3, 1, 0, 1, 4};
    }
    throw std::logic_error("unknown element family");
}

struct BasisEval {
    std::vector<double> values;
    std::vector<Vec2> gradients;  // reference-coordinate gradients
};

/// Basis values and reference gradients at a barycentric point
/// (l0,l1,l2) = (1-x-y, x, y).  Local ordering: vertex dofs 0..2, then edge
/// dofs on (0,1),(1,2),(2,0), then the cell dof.
inline BasisEval reference_basis_eval(ElementFamily family,
                                      const std::array<double, 3>& lambda) {
    const double tol = 1e-12;
    for (double l : lambda)
        if (l < -tol || l > 1.0 + tol)
            throw std::invalid_argument("reference_basis_eval: point outside reference triangle");
    if (std::abs(lambda[0] + lambda[1] + lambda[2] - 1.0) > 1e-10)
        throw std::invalid_argument("reference_basis_eval: barycentric coords must sum to 1");

    const double l0 = lambda[0], l1 = lambda[1], l2 = lambda[2];
    const Vec2 g0{-1.0, -1.0}, g1{1.0, 0.0}, g2{0.0, 1.0};  // grad of l0,l1,l2

    BasisEval out;
    auto push = [&](double v, Vec2 g) {
        out.values.push_back(v);
        out.gradients.push_back(g);
    };
    auto push_p1 = [&] {
        push(l0, g0);
        push(l1, g1);
        push(l2, g2);
    };
    auto push_bubble = [&] {
        push(27.0 * l0 * l1 * l2,
             {27.0 * (g0.x * l1 * l2 + l0 * g1.x * l2 + l0 * l1 * g2.x),
              27.0 * (g0.y * l1 * l2 + l0 * g1.y * l2 + l0 * l1 * g2.y)});
    };
    switch (family) {
        case ElementFamily::P1:
            push_p1();
            break;
        case ElementFamily::P2: {
            const double l[3] = {l0, l1, l2};
            const Vec2 g[3] = {g0, g1, g2};
            for (int i = 0; i < 3; ++i)
                push(l[i] * (2.0 * l[i] - 1.0), {(4.0 * l[i] - 1.0) * g[i].x,
                                                 (4.0 * l[i] - 1.0) * g[i].y});
            const int ea[3] = {0, 1, 2}, eb[3] = {1, 2, 0};
            for (int e = 0; e < 3; ++e) {
                const int a = ea[e], b = eb[e];
                push(4.0 * l[a] * l[b], {4.0 * (g[a].x * l[b] + l[a] * g[b].x),
                                         4.0 * (g[a].y * l[b] + l[a] * g[b].y)});
            }
            break;
        }
        case ElementFamily::Bubble:
            push_bubble();
            break;
        case ElementFamily::MiniVelocity:
            push_p1();
            push_bubble();
            break;
    }
    return out;
}

/// Mixed velocity/pressure space on a mesh.  Velocity scalar nodes are
/// numbered vertices first, then global edges (sorted vertex-pair order),
/// then cells; a velocity dof is 2*node + component.  Pressure is P1 on
/// vertices.
class FESpacePair {
  public:
    FESpacePair(Mesh mesh_in, SpacePair pair_in) : mesh_(std::move(mesh_in)), pair_(pair_in) {
        validate(mesh_);
        switch (pair_) {
            case SpacePair::TaylorHood: vel_family_ = ElementFamily::P2; break;
            case SpacePair::MINI: vel_family_ = ElementFamily::MiniVelocity; break;
            case SpacePair::P1P1: vel_family_ = ElementFamily::P1; break;
        }
        build_edges();
        build_node_tables();
        build_dirichlet();
    }

    const Mesh& mesh() const { return mesh_; }
    SpacePair pair() const { return pair_; }
    ElementFamily velocity_family() const { return vel_family_; }
    int n_scalar_nodes() const { return n_scalar_nodes_; }
    int n_vel_dofs() const { return 2 * n_scalar_nodes_; }
    int n_pres_dofs() const { return mesh_.n_vertices(); }
    const std::vector<int>& dirichlet_dofs() const { return dirichlet_dofs_; }
    const std::vector<char>& dirichlet_mask() const { return dirichlet_mask_; }

    /// Global scalar velocity nodes of triangle t, in local basis order.
    const std::vector<int>& velocity_nodes(int t) const { return vel_nodes_[t]; }

    /// Physical coordinate of a scalar velocity node (edge nodes at
    /// midpoints, cell nodes at centroids).
    Vec2 node_coord(int node) const { return node_coords_[node]; }

    /// Lagrange interpolant of a velocity field; bubble coefficients are 0.
    Eigen::VectorXd interpolate(const std::function<Vec2(Vec2, double)>& field,
                                double t) const {
        Eigen::VectorXd coeffs = Eigen::VectorXd::Zero(n_vel_dofs());
        for (int node = 0; node < n_nodal_nodes_; ++node) {
            const Vec2 v = field(node_coords_[node], t);
            coeffs[2 * node] = v.x;
            coeffs[2 * node + 1] = v.y;
        }
        return coeffs;
    }

    /// Vertex-value interpolant of a scalar pressure field.
    Eigen::VectorXd interpolate_pressure(const std::function<double(Vec2, double)>& field,
                                         double t) const {
        Eigen::VectorXd coeffs(n_pres_dofs());
        for (int v = 0; v < mesh_.n_vertices(); ++v) coeffs[v] = field(mesh_.vertices[v], t);
        return coeffs;
    }

  private:
    void build_edges() {
        std::map<std::pair<int, int>, int> ids;
        for (const auto& tri : mesh_.triangles)
            for (int e = 0; e < 3; ++e)
                ids.emplace(detail::sorted_edge(tri.v[e], tri.v[(e + 1) % 3]), 0);
        int next = 0;
        for (auto& [key, id] : ids) id = next++;
        edge_ids_ = std::move(ids);
    }

    void build_node_tables() {
        const int nv = mesh_.n_vertices();
        const int ne = static_cast<int>(edge_ids_.size());
        const int nc = mesh_.n_triangles();
        const FamilyInfo info = family_info(vel_family_);
        n_scalar_nodes_ = nv * info.dofs_per_vertex + ne * info.dofs_per_edge +
                          nc * info.dofs_per_cell;
        n_nodal_nodes_ = nv * info.dofs_per_vertex + ne * info.dofs_per_edge;

        node_coords_.resize(n_scalar_nodes_);
        for (int v = 0; v < nv; ++v) node_coords_[v] = mesh_.vertices[v];
        if (info.dofs_per_edge > 0)
            for (const auto& [key, id] : edge_ids_)
                node_coords_[nv + id] = 0.5 * (mesh_.vertices[key.first] + mesh_.vertices[key.second]);
        if (info.dofs_per_cell > 0) {
            const int base = nv + (info.dofs_per_edge > 0 ? ne : 0);
            for (int c = 0; c < nc; ++c) {
                const auto& tri = mesh_.triangles[c];
                node_coords_[base + c] = (1.0 / 3.0) * (mesh_.vertices[tri.v[0]] +
                                                        mesh_.vertices[tri.v[1]] +
                                                        mesh_.vertices[tri.v[2]]);
            }
        }

        vel_nodes_.resize(nc);
        for (int c = 0; c < nc; ++c) {
            const auto& tri = mesh_.triangles[c];
            auto& nodes = vel_nodes_[c];
            for (int i = 0; i < 3; ++i) nodes.push_back(tri.v[i]);
            if (info.dofs_per_edge > 0) {
                const int ea[3] = {0, 1, 2}, eb[3] = {1, 2, 0};
                for (int e = 0; e < 3; ++e)
                    nodes.push_back(nv + edge_ids_.at(detail::sorted_edge(tri.v[ea[e]], tri.v[eb[e]])));
            }
            if (info.dofs_per_cell > 0) nodes.push_back(n_nodal_nodes_ + c);
        }
    }

    void build_dirichlet() {
        const int nv = mesh_.n_vertices();
        std::vector<char> node_on_boundary(n_scalar_nodes_, 0);
        const bool has_edge_dofs = family_info(vel_family_).dofs_per_edge > 0;
        for (const auto& be : mesh_.boundary_edges) {
            node_on_boundary[be.a] = 1;
            node_on_boundary[be.b] = 1;
            if (has_edge_dofs)
                node_on_boundary[nv + edge_ids_.at(detail::sorted_edge(be.a, be.b))] = 1;
        }
        dirichlet_mask_.assign(n_vel_dofs(), 0);
        for (int node = 0; node < n_scalar_nodes_; ++node)
            if (node_on_boundary[node]) {
                dirichlet_mask_[2 * node] = 1;
                dirichlet_mask_[2 * node + 1] = 1;
                dirichlet_dofs_.push_back(2 * node);
                dirichlet_dofs_.push_back(2 * node + 1);
            }
    }

    Mesh mesh_;
    SpacePair pair_;
    ElementFamily vel_family_ = ElementFamily::P2;
    std::map<std::pair<int, int>, int> edge_ids_;
    std::vector<std::vector<int>> vel_nodes_;
    std::vector<Vec2> node_coords_;
    std::vector<int> dirichlet_dofs_;
    std::vector<char> dirichlet_mask_;
    int n_scalar_nodes_ = 0;
    int n_nodal_nodes_ = 0;
};

inline FESpacePair build_space(const Mesh& mesh, SpacePair pair) {
    return FESpacePair(mesh, pair);
}

}  // namespace nsfem
