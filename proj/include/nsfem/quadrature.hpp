#pragma once

#include <Eigen/Dense>
#include <array>
#include <stdexcept>
#include <vector>

namespace nsfem {

/// Quadrature rule on the reference triangle {(0,0),(1,0),(0,1)}.
/// Points stored as barycentric triples (l1,l2,l3) = (1-x-y, x, y);
/// weights are positive and sum to the reference area 1/2.
struct QuadratureRule {
    std::vector<std::array<double, 3>> points;
    std::vector<double> weights;
    int exact_degree = 0;

    int size() const { return static_cast<int>(weights.size()); }
    double x(int q) const { return points[q][1]; }
    double y(int q) const { return points[q][2]; }
};

namespace detail {

// Golub-Welsch on the symmetric tridiagonal recurrence matrix.
// Returns nodes on [-1,1] and weights for the given Jacobi weight
// (1-t)^alpha (1+t)^beta with mu0 = integral of the weight.
inline void gauss_jacobi(int n, double alpha, double beta, double mu0,
                         std::vector<double>& nodes, std::vector<double>& weights) {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int k = 0; k < n; ++k) {
        const double s = 2.0 * k + alpha + beta;
        double a;
        if (k == 0 && alpha + beta == 0.0)
            a = 0.0;
        else if (k == 0)
            a = (beta - alpha) / (alpha + beta + 2.0);
        else
            a = (beta * beta - alpha * alpha) / (s * (s + 2.0));
        J(k, k) = a;
        if (k + 1 < n) {
            const double kk = k + 1.0;
            const double s2 = 2.0 * kk + alpha + beta;
            const double b2 = 4.0 * kk * (kk + alpha) * (kk + beta) * (kk + alpha + beta) /
                              (s2 * s2 * (s2 + 1.0) * (s2 - 1.0));
            J(k, k + 1) = J(k + 1, k) = std::sqrt(b2);
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    nodes.resize(n);
    weights.resize(n);
    for (int k = 0; k < n; ++k) {
        nodes[k] = es.eigenvalues()(k);
        const double v0 = es.eigenvectors()(0, k);
        weights[k] = mu0 * v0 * v0;
    }
}

}  // namespace detail

/// Conical-product (Duffy) rule: Gauss-Jacobi(1,0) in the first direction
/// absorbs the (1-x) collapse factor, Gauss-Legendre in the second.
/// All weights positive; exact for total degree <= 2n-1 with n points per
/// direction.
inline QuadratureRule quadrature_rule(int requested_degree) {
    if (requested_degree < 1 || requested_degree > 12)
        throw std::invalid_argument("quadrature_rule: supported degrees are 1..12");
    const int n = (requested_degree + 2) / 2;  // ceil((d+1)/2)
    std::vector<double> xj, wj, xl, wl;
    detail::gauss_jacobi(n, 1.0, 0.0, 2.0, xj, wj);  // weight (1-t), mu0 = 2
    detail::gauss_jacobi(n, 0.0, 0.0, 2.0, xl, wl);  // Legendre
    QuadratureRule rule;
    rule.exact_degree = 2 * n - 1;
    for (int i = 0; i < n; ++i) {
        // map [-1,1] -> [0,1]; the Jacobi weight picks up an extra 1/2.
        const double xi = 0.5 * (1.0 + xj[i]);
        const double wi = 0.25 * wj[i];
        for (int j = 0; j < n; ++j) {
            const double eta = 0.5 * (1.0 + xl[j]);
            const double weta = 0.5 * wl[j];
            const double x = xi;
            const double y = eta * (1.0 - xi);
            rule.points.push_back({1.0 - x - y, x, y});
            rule.weights.push_back(wi * weta);
        }
    }
    return rule;
}

}  // namespace nsfem
