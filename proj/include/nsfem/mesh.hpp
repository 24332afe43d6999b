#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace nsfem {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 a) { return std::sqrt(dot(a, a)); }

struct Triangle {
    std::array<int, 3> v;
};

struct BoundaryEdge {
    int a = 0;
    int b = 0;
    int marker = 0;
};

/// Conforming triangulation of a polygonal domain.  Immutable after
/// construction; validate() checks orientation, conformity, and closed
/// boundary loops.
struct Mesh {
    std::vector<Vec2> vertices;
    std::vector<Triangle> triangles;
    std::vector<BoundaryEdge> boundary_edges;
    double h_max = 0.0;

    int n_vertices() const { return static_cast<int>(vertices.size()); }
    int n_triangles() const { return static_cast<int>(triangles.size()); }
};

struct MeshMetrics {
    double h_max = 0.0;
    double h_min = 0.0;
    double quasi_uniformity_ratio = 0.0;
    double min_angle_deg = 0.0;
};

inline double signed_area(const Mesh& m, const Triangle& t) {
    const Vec2 a = m.vertices[t.v[0]];
    const Vec2 b = m.vertices[t.v[1]];
    const Vec2 c = m.vertices[t.v[2]];
    return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

inline double triangle_diameter(const Mesh& m, const Triangle& t) {
    const double e0 = norm(m.vertices[t.v[1]] - m.vertices[t.v[0]]);
    const double e1 = norm(m.vertices[t.v[2]] - m.vertices[t.v[1]]);
    const double e2 = norm(m.vertices[t.v[0]] - m.vertices[t.v[2]]);
    return std::max(e0, std::max(e1, e2));
}

namespace detail {

inline std::pair<int, int> sorted_edge(int a, int b) {
    return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}

inline void compute_h_max(Mesh& m) {
    m.h_max = 0.0;
    for (const auto& t : m.triangles)
        m.h_max = std::max(m.h_max, triangle_diameter(m, t));
}

}  // namespace detail

/// Throws std::runtime_error on the first violated mesh invariant.
inline void validate(const Mesh& m) {
    const int nv = m.n_vertices();
    for (std::size_t k = 0; k < m.triangles.size(); ++k) {
        const auto& t = m.triangles[k];
        for (int i : t.v)
            if (i < 0 || i >= nv)
                throw std::runtime_error("mesh: triangle " + std::to_string(k) +
                                         " references vertex index out of range");
        if (signed_area(m, t) <= 0.0)
            throw std::runtime_error("mesh: triangle " + std::to_string(k) +
                                     " has non-positive signed area");
    }
    std::map<std::pair<int, int>, int> edge_count;
    for (const auto& t : m.triangles)
        for (int e = 0; e < 3; ++e)
            edge_count[detail::sorted_edge(t.v[e], t.v[(e + 1) % 3])] += 1;

    std::map<std::pair<int, int>, int> boundary_marked;
    for (std::size_t k = 0; k < m.boundary_edges.size(); ++k) {
        const auto& be = m.boundary_edges[k];
        if (be.a < 0 || be.a >= nv || be.b < 0 || be.b >= nv)
            throw std::runtime_error("mesh: boundary edge " + std::to_string(k) +
                                     " references vertex index out of range");
        boundary_marked[detail::sorted_edge(be.a, be.b)] += 1;
    }
    for (const auto& [edge, count] : edge_count)
        if (count > 2)
            throw std::runtime_error("mesh: conformity violation, edge (" +
                                     std::to_string(edge.first) + "," +
                                     std::to_string(edge.second) + ") used by " +
                                     std::to_string(count) + " triangles");
    for (const auto& [edge, count] : edge_count) {
        const bool on_boundary = boundary_marked.count(edge) > 0;
        if (count == 1 && !on_boundary)
            throw std::runtime_error("mesh: edge (" + std::to_string(edge.first) + "," +
                                     std::to_string(edge.second) +
                                     ") used by one triangle but not marked as boundary");
        if (count == 2 && on_boundary)
            throw std::runtime_error("mesh: interior edge (" + std::to_string(edge.first) +
                                     "," + std::to_string(edge.second) +
                                     ") marked as boundary");
    }
    for (const auto& [edge, count] : boundary_marked) {
        if (count != 1)
            throw std::runtime_error("mesh: duplicate boundary edge");
        if (edge_count.count(edge) == 0)
            throw std::runtime_error("mesh: boundary edge not an edge of any triangle");
    }
    // Closed loops: every boundary vertex has exactly two incident boundary edges.
    std::map<int, int> degree;
    for (const auto& be : m.boundary_edges) {
        degree[be.a] += 1;
        degree[be.b] += 1;
    }
    for (const auto& [v, d] : degree)
        if (d != 2)
            throw std::runtime_error("mesh: boundary not a union of closed loops at vertex " +
                                     std::to_string(v));
}

/// Structured mesh of [0,1]^2: (n+1)^2 vertices, 2n^2 triangles, every cell
/// split along the bottom-left to top-right diagonal.  Boundary marker 1.
inline Mesh generate_structured_square(int n) {
    if (n < 1) throw std::invalid_argument("generate_structured_square: n must be >= 1");
    Mesh m;
    const int s = n + 1;
    m.vertices.reserve(static_cast<std::size_t>(s) * s);
    for (int j = 0; j < s; ++j)
        for (int i = 0; i < s; ++i)
            m.vertices.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n});
    auto id = [s](int i, int j) { return j * s + i; };
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
            m.triangles.push_back({{a, b, c}});
            m.triangles.push_back({{a, c, d}});
        }
    for (int i = 0; i < n; ++i) m.boundary_edges.push_back({id(i, 0), id(i + 1, 0), 1});
    for (int j = 0; j < n; ++j) m.boundary_edges.push_back({id(n, j), id(n, j + 1), 1});
    for (int i = 0; i < n; ++i) m.boundary_edges.push_back({id(i + 1, n), id(i, n), 1});
    for (int j = 0; j < n; ++j) m.boundary_edges.push_back({id(0, j + 1), id(0, j), 1});
    detail::compute_h_max(m);
    return m;
}

/// Red refinement: each triangle split into 4 congruent children by edge
/// midpoints; boundary markers inherited.
inline Mesh refine_uniform(const Mesh& parent) {
    Mesh m;
    m.vertices = parent.vertices;
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
        const auto key = detail::sorted_edge(a, b);
        auto it = midpoint.find(key);
        if (it != midpoint.end()) return it->second;
        const int idx = m.n_vertices();
        m.vertices.push_back(0.5 * (parent.vertices[a] + parent.vertices[b]));
        midpoint.emplace(key, idx);
        return idx;
    };
    for (const auto& t : parent.triangles) {
        const int v0 = t.v[0], v1 = t.v[1], v2 = t.v[2];
        const int m01 = mid(v0, v1), m12 = mid(v1, v2), m02 = mid(v0, v2);
        m.triangles.push_back({{v0, m01, m02}});
        m.triangles.push_back({{v1, m12, m01}});
        m.triangles.push_back({{v2, m02, m12}});
        m.triangles.push_back({{m01, m12, m02}});
    }
    for (const auto& be : parent.boundary_edges) {
        const int mm = mid(be.a, be.b);
        m.boundary_edges.push_back({be.a, mm, be.marker});
        m.boundary_edges.push_back({mm, be.b, be.marker});
    }
    detail::compute_h_max(m);
    return m;
}

inline MeshMetrics mesh_metrics(const Mesh& m) {
    MeshMetrics metrics;
    metrics.h_min = std::numeric_limits<double>::infinity();
    metrics.min_angle_deg = 180.0;
    for (const auto& t : m.triangles) {
        const double d = triangle_diameter(m, t);
        metrics.h_max = std::max(metrics.h_max, d);
        metrics.h_min = std::min(metrics.h_min, d);
        for (int i = 0; i < 3; ++i) {
            const Vec2 p = m.vertices[t.v[i]];
            const Vec2 e1 = m.vertices[t.v[(i + 1) % 3]] - p;
            const Vec2 e2 = m.vertices[t.v[(i + 2) % 3]] - p;
            const double ang = std::acos(dot(e1, e2) / (norm(e1) * norm(e2)));
            metrics.min_angle_deg = std::min(metrics.min_angle_deg, ang * 180.0 / M_PI);
        }
    }
    metrics.quasi_uniformity_ratio = metrics.h_max / metrics.h_min;
    return metrics;
}

/// ASCII format: "vertices N" + N lines "x y"; "triangles M" + M lines
/// "i j k"; "boundary_edges B" + B lines "i j marker".  0-based indices.
inline void write_mesh(const Mesh& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_mesh: cannot open " + path);
    out.precision(17);
    out << "vertices " << m.n_vertices() << "\n";
    for (const auto& v : m.vertices) out << v.x << " " << v.y << "\n";
    out << "triangles " << m.n_triangles() << "\n";
    for (const auto& t : m.triangles) out << t.v[0] << " " << t.v[1] << " " << t.v[2] << "\n";
    out << "boundary_edges " << m.boundary_edges.size() << "\n";
    for (const auto& be : m.boundary_edges) out << be.a << " " << be.b << " " << be.marker << "\n";
    if (!out) throw std::runtime_error("write_mesh: write failure on " + path);
}

namespace detail {

inline std::string next_line(std::istream& in, int& lineno) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("mesh parse error: unexpected end of file");
    ++lineno;
    return line;
}

inline void expect_header(const std::string& line, const std::string& key, int lineno,
                          int& count) {
    std::istringstream ss(line);
    std::string word;
    if (!(ss >> word >> count) || word != key || count < 0)
        throw std::runtime_error("mesh parse error at line " + std::to_string(lineno) +
                                 ": expected '" + key + " N'");
}

}  // namespace detail

inline Mesh read_mesh(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_mesh: cannot open " + path);
    Mesh m;
    int lineno = 0, count = 0;
    detail::expect_header(detail::next_line(in, lineno), "vertices", lineno, count);
    m.vertices.resize(count);
    for (auto& v : m.vertices) {
        std::istringstream ss(detail::next_line(in, lineno));
        if (!(ss >> v.x >> v.y))
            throw std::runtime_error("mesh parse error at line " + std::to_string(lineno) +
                                     ": expected 'x y'");
    }
    detail::expect_header(detail::next_line(in, lineno), "triangles", lineno, count);
    m.triangles.resize(count);
    for (auto& t : m.triangles) {
        std::istringstream ss(detail::next_line(in, lineno));
        if (!(ss >> t.v[0] >> t.v[1] >> t.v[2]))
            throw std::runtime_error("mesh parse error at line " + std::to_string(lineno) +
                                     ": expected 'i j k'");
    }
    detail::expect_header(detail::next_line(in, lineno), "boundary_edges", lineno, count);
    m.boundary_edges.resize(count);
    for (auto& be : m.boundary_edges) {
        std::istringstream ss(detail::next_line(in, lineno));
        if (!(ss >> be.a >> be.b >> be.marker))
            throw std::runtime_error("mesh parse error at line " + std::to_string(lineno) +
                                     ": expected 'i j marker'");
    }
    detail::compute_h_max(m);
    validate(m);
    return m;
}

}  // namespace nsfem
