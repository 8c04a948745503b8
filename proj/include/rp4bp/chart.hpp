#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "params.hpp"

namespace rp4bp {

// Coordinate charts.  Layouts (fixed per tag):
//   CartesianSixBody: (xS, xJ, xP, yS, yJ, yP)                 dim 12
//   Jacobi:           (Q0, Q1, Q2, P0, P1, P2)                 dim 12
//   JacobiPolar:      (r, R, theta, Theta, Q2, P2, Q0, P0)     dim 12
//   RotatingPolar:    (r, R, theta, Omega, q2, p2)             dim 8
//   RescaledTilde:    (rt, Rt, q2, v2)                         dim 6
//   RescaledHat:      (rh, Rh, q2h, v2h)                       dim 6
//   CometPolar:       (rh, Rh, rho, Upsilon, phi, G)           dim 6
//   AsteroidCartesian:(xA, yA, s)                              dim 5
//   AsteroidPolar:    (xi, Xi, psi, Psi, s)                    dim 5
//   AsteroidMcGehee:  (x, Xi, psi, Psi, s)                     dim 5
//   QP:               (q, p, alpha, Psi, s)                    dim 5
// JacobiPolar is the target of the intermediate polar step; it is not named in
// the original chart list but is required to express Polar1 and Hadjidemetriou
// as separate invertible maps.
enum class Chart {
    CartesianSixBody,
    Jacobi,
    JacobiPolar,
    RotatingPolar,
    RescaledTilde,
    RescaledHat,
    CometPolar,
    AsteroidCartesian,
    AsteroidPolar,
    AsteroidMcGehee,
    QP,
};

inline std::size_t chart_dim(Chart c) {
    switch (c) {
        case Chart::CartesianSixBody: return 12;
        case Chart::Jacobi: return 12;
        case Chart::JacobiPolar: return 12;
        case Chart::RotatingPolar: return 8;
        case Chart::RescaledTilde: return 6;
        case Chart::RescaledHat: return 6;
        case Chart::CometPolar: return 6;
        case Chart::AsteroidCartesian: return 5;
        case Chart::AsteroidPolar: return 5;
        case Chart::AsteroidMcGehee: return 5;
        case Chart::QP: return 5;
    }
    return 0;
}

inline const char* chart_name(Chart c) {
    switch (c) {
        case Chart::CartesianSixBody: return "CartesianSixBody";
        case Chart::Jacobi: return "Jacobi";
        case Chart::JacobiPolar: return "JacobiPolar";
        case Chart::RotatingPolar: return "RotatingPolar";
        case Chart::RescaledTilde: return "RescaledTilde";
        case Chart::RescaledHat: return "RescaledHat";
        case Chart::CometPolar: return "CometPolar";
        case Chart::AsteroidCartesian: return "AsteroidCartesian";
        case Chart::AsteroidPolar: return "AsteroidPolar";
        case Chart::AsteroidMcGehee: return "AsteroidMcGehee";
        case Chart::QP: return "QP";
    }
    return "?";
}

inline Chart chart_from_name(const std::string& s) {
    for (Chart c : {Chart::CartesianSixBody, Chart::Jacobi, Chart::JacobiPolar, Chart::RotatingPolar,
                    Chart::RescaledTilde, Chart::RescaledHat, Chart::CometPolar, Chart::AsteroidCartesian,
                    Chart::AsteroidPolar, Chart::AsteroidMcGehee, Chart::QP})
        if (s == chart_name(c)) return c;
    throw std::invalid_argument("unknown chart: " + s);
}

/// Indices of angle coordinates within a chart layout.
inline std::vector<std::size_t> chart_angle_indices(Chart c) {
    switch (c) {
        case Chart::JacobiPolar: return {2};
        case Chart::RotatingPolar: return {2};
        case Chart::CometPolar: return {4};
        case Chart::AsteroidPolar: return {2, 4};
        case Chart::AsteroidMcGehee: return {2, 4};
        case Chart::AsteroidCartesian: return {4};
        case Chart::QP: return {4};  // alpha is an unwrapped combination, s is an angle
        default: return {};
    }
}

/// A phase-space point tagged with its chart.  Angles are normalized to
/// [0, 2pi) on construction through `make`; raw construction keeps values
/// as-is (integration tracks unwrapped angles).
struct ChartState {
    Chart chart = Chart::AsteroidMcGehee;
    std::vector<double> coords;

    ChartState() = default;
    ChartState(Chart c, std::vector<double> v) : chart(c), coords(std::move(v)) {
        if (coords.size() != chart_dim(c))
            throw ChartMismatchError(std::string("state size does not match chart ") + chart_name(c));
    }

    static ChartState make(Chart c, std::vector<double> v) {
        ChartState st(c, std::move(v));
        st.normalize_angles();
        st.check_domain();
        return st;
    }

    double& operator[](std::size_t i) { return coords[i]; }
    double operator[](std::size_t i) const { return coords[i]; }
    std::size_t size() const { return coords.size(); }

    void normalize_angles() {
        for (std::size_t i : chart_angle_indices(chart)) coords[i] = wrap_angle(coords[i]);
    }

    /// Radial positivity per chart.
    void check_domain() const {
        auto positive = [&](std::size_t i, const char* what) {
            if (!(coords[i] > 0.0))
                throw DomainError(std::string(what) + " must be positive in chart " + chart_name(chart));
        };
        switch (chart) {
            case Chart::JacobiPolar: positive(0, "r"); break;
            case Chart::RotatingPolar: positive(0, "r"); break;
            case Chart::AsteroidPolar: positive(0, "xi"); break;
            case Chart::AsteroidMcGehee:
                // x = 0 is the parabolic infinity manifold itself
                if (!(coords[0] >= 0.0)) throw DomainError("x must be nonnegative in chart AsteroidMcGehee");
                break;
            case Chart::CometPolar: positive(2, "rho"); break;
            default: break;
        }
    }
};

inline void require_chart(const ChartState& st, Chart expected, const char* where) {
    if (st.chart != expected)
        throw ChartMismatchError(std::string(where) + ": expected chart " + chart_name(expected) + ", got " +
                                 chart_name(st.chart));
}

// Small 2-vector helpers used throughout the coordinate formulas.
using Vec2 = std::array<double, 2>;

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a[0] + b[0], a[1] + b[1]}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a[0] - b[0], a[1] - b[1]}; }
inline Vec2 operator*(double c, Vec2 a) { return {c * a[0], c * a[1]}; }
inline double dot(Vec2 a, Vec2 b) { return a[0] * b[0] + a[1] * b[1]; }
inline double cross(Vec2 a, Vec2 b) { return a[0] * b[1] - a[1] * b[0]; }
inline double norm(Vec2 a) { return std::hypot(a[0], a[1]); }
/// perp(a) = (-ay, ax);  cross(a,b) = -dot(a, perp(b)).
inline Vec2 perp(Vec2 a) { return {-a[1], a[0]}; }

/// Counterclockwise rotation by theta (the paper's e^{i theta}).
inline Vec2 rot(double theta, Vec2 a) {
    double c = std::cos(theta), s = std::sin(theta);
    return {c * a[0] - s * a[1], s * a[0] + c * a[1]};
}
/// Clockwise rotation (e^{-i theta}).
inline Vec2 rot_inv(double theta, Vec2 a) {
    double c = std::cos(theta), s = std::sin(theta);
    return {c * a[0] + s * a[1], -s * a[0] + c * a[1]};
}

inline double guarded_dist(Vec2 a, Vec2 b, const char* what) {
    double d = norm(a - b);
    if (d < kCollisionFloor) throw CollisionError(std::string("separation below collision floor: ") + what);
    return d;
}

}  // namespace rp4bp
