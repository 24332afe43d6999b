#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "nsfem/mesh.hpp"

namespace nsfem {

/// Closed-form exact solution with forcing reverse-engineered from the
/// momentum equation u_t + (u.grad)u - nu Lap(u) + grad p = f.
struct ManufacturedSolution {
    std::string id;
    double nu = 1.0;
    std::function<Vec2(Vec2, double)> velocity;
    std::function<Eigen::Matrix2d(Vec2, double)> velocity_gradient;  // (i,j) = d u_i / d x_j
    std::function<Vec2(Vec2, double)> velocity_time_derivative;
    std::function<double(Vec2, double)> pressure;
    std::function<Vec2(Vec2, double)> forcing;
    bool steady = false;
};

namespace detail {

// g(s) = s^2 (1-s)^2 and derivatives; double zeros at s = 0, 1.
inline double bump(double s) { return s * s * (1.0 - s) * (1.0 - s); }
inline double bump_d1(double s) { return 2.0 * s * (1.0 - s) * (1.0 - 2.0 * s); }
inline double bump_d2(double s) { return 12.0 * s * s - 12.0 * s + 2.0; }
inline double bump_d3(double s) { return 24.0 * s - 12.0; }

}  // namespace detail

/// stream_vortex: u = curl(psi), psi = x^2(1-x)^2 y^2(1-y)^2 cos(t),
/// p = sin(pi x) cos(pi y) cos(t) (zero mean on the unit square).
/// stokes_poly: steady u = (x^2, -2xy), p = x + y - 1; quadratic velocity
/// and linear pressure, contained in the Taylor-Hood space.
inline ManufacturedSolution manufactured_solution(const std::string& id, double nu) {
    using detail::bump;
    using detail::bump_d1;
    using detail::bump_d2;
    using detail::bump_d3;
    ManufacturedSolution ms;
    ms.id = id;
    ms.nu = nu;
    if (id == "stream_vortex") {
        auto u_space = [](Vec2 x) -> Vec2 {
            return {bump(x.x) * bump_d1(x.y), -bump_d1(x.x) * bump(x.y)};
        };
        auto grad_space = [](Vec2 x) -> Eigen::Matrix2d {
            Eigen::Matrix2d g;
            g(0, 0) = bump_d1(x.x) * bump_d1(x.y);
            g(0, 1) = bump(x.x) * bump_d2(x.y);
            g(1, 0) = -bump_d2(x.x) * bump(x.y);
            g(1, 1) = -bump_d1(x.x) * bump_d1(x.y);
            return g;
        };
        auto lap_space = [](Vec2 x) -> Vec2 {
            return {bump_d2(x.x) * bump_d1(x.y) + bump(x.x) * bump_d3(x.y),
                    -(bump_d3(x.x) * bump(x.y) + bump_d1(x.x) * bump_d2(x.y))};
        };
        ms.velocity = [=](Vec2 x, double t) -> Vec2 { return std::cos(t) * u_space(x); };
        ms.velocity_gradient = [=](Vec2 x, double t) -> Eigen::Matrix2d {
            return std::cos(t) * grad_space(x);
        };
        ms.velocity_time_derivative = [=](Vec2 x, double t) -> Vec2 {
            return -std::sin(t) * u_space(x);
        };
        ms.pressure = [](Vec2 x, double t) {
            return std::sin(M_PI * x.x) * std::cos(M_PI * x.y) * std::cos(t);
        };
        ms.forcing = [=](Vec2 x, double t) -> Vec2 {
            const double c = std::cos(t);
            const Vec2 u = c * u_space(x);
            const Eigen::Matrix2d g = c * grad_space(x);
            const Vec2 ut = -std::sin(t) * u_space(x);
            const Vec2 lap = c * lap_space(x);
            const Vec2 conv{u.x * g(0, 0) + u.y * g(0, 1), u.x * g(1, 0) + u.y * g(1, 1)};
            const Vec2 gp{M_PI * std::cos(M_PI * x.x) * std::cos(M_PI * x.y) * c,
                          -M_PI * std::sin(M_PI * x.x) * std::sin(M_PI * x.y) * c};
            return {ut.x + conv.x - nu * lap.x + gp.x, ut.y + conv.y - nu * lap.y + gp.y};
        };
        return ms;
    }
    if (id == "stokes_poly") {
        ms.steady = true;
        ms.velocity = [](Vec2 x, double) -> Vec2 { return {x.x * x.x, -2.0 * x.x * x.y}; };
        ms.velocity_gradient = [](Vec2 x, double) -> Eigen::Matrix2d {
            Eigen::Matrix2d g;
            g(0, 0) = 2.0 * x.x;
            g(0, 1) = 0.0;
            g(1, 0) = -2.0 * x.y;
            g(1, 1) = -2.0 * x.x;
            return g;
        };
        ms.velocity_time_derivative = [](Vec2, double) -> Vec2 { return {0.0, 0.0}; };
        ms.pressure = [](Vec2 x, double) { return x.x + x.y - 1.0; };
        ms.forcing = [nu](Vec2 x, double) -> Vec2 {
            return {2.0 * x.x * x.x * x.x - 2.0 * nu + 1.0, 2.0 * x.x * x.x * x.y + 1.0};
        };
        return ms;
    }
    throw std::invalid_argument("manufactured_solution: unknown id '" + id + "'");
}

}  // namespace nsfem
