#pragma once

#include <Eigen/Dense>
#include <functional>
#include <utility>

#include "chart.hpp"
#include "hamiltonian.hpp"
#include "params.hpp"

namespace rp4bp {

enum class TransformName {
    Identity,
    Jacobi,
    Polar1,
    Hadjidemetriou,
    CartesianPullback,
    Rescale1,
    Rescale2,
    CometPolar,
    AsteroidPolar,
    McGehee,
    QPChart,
};

inline const char* transform_name(TransformName t) {
    switch (t) {
        case TransformName::Identity: return "Identity";
        case TransformName::Jacobi: return "Jacobi";
        case TransformName::Polar1: return "Polar1";
        case TransformName::Hadjidemetriou: return "Hadjidemetriou";
        case TransformName::CartesianPullback: return "CartesianPullback";
        case TransformName::Rescale1: return "Rescale1";
        case TransformName::Rescale2: return "Rescale2";
        case TransformName::CometPolar: return "CometPolar";
        case TransformName::AsteroidPolar: return "AsteroidPolar";
        case TransformName::McGehee: return "McGehee";
        case TransformName::QPChart: return "QPChart";
    }
    return "?";
}

inline TransformName transform_from_name(const std::string& s) {
    for (TransformName t : {TransformName::Identity, TransformName::Jacobi, TransformName::Polar1,
                            TransformName::Hadjidemetriou, TransformName::CartesianPullback, TransformName::Rescale1,
                            TransformName::Rescale2, TransformName::CometPolar, TransformName::AsteroidPolar,
                            TransformName::McGehee, TransformName::QPChart})
        if (s == transform_name(t)) return t;
    throw std::invalid_argument("unknown transform: " + s);
}

struct TransformDescriptor {
    TransformName name = TransformName::Identity;
    SystemParams params;

    /// Constant c with  omega_source = c * (pullback of omega_target).
    /// QPChart carries no conformal certificate (its target 2-form is not a
    /// constant multiple of the McGehee form); NaN marks that.
    double conformal_factor() const {
        switch (name) {
            case TransformName::Rescale1: return params.delta;
            case TransformName::Rescale2: return 1.0 / params.epsilon;
            case TransformName::QPChart: return std::numeric_limits<double>::quiet_NaN();
            default: return 1.0;
        }
    }
};

enum class Direction { Forward, Inverse };

inline std::pair<Chart, Chart> transform_charts(TransformName t, Chart identity_chart = Chart::AsteroidMcGehee) {
    switch (t) {
        case TransformName::Identity: return {identity_chart, identity_chart};
        case TransformName::Jacobi: return {Chart::CartesianSixBody, Chart::Jacobi};
        case TransformName::Polar1: return {Chart::Jacobi, Chart::JacobiPolar};
        case TransformName::Hadjidemetriou: return {Chart::JacobiPolar, Chart::RotatingPolar};
        case TransformName::CartesianPullback: return {Chart::RotatingPolar, Chart::CartesianSixBody};
        case TransformName::Rescale1: return {Chart::RotatingPolar, Chart::RescaledTilde};
        case TransformName::Rescale2: return {Chart::RescaledTilde, Chart::RescaledHat};
        case TransformName::CometPolar: return {Chart::RescaledHat, Chart::CometPolar};
        case TransformName::AsteroidPolar: return {Chart::AsteroidCartesian, Chart::AsteroidPolar};
        case TransformName::McGehee: return {Chart::AsteroidPolar, Chart::AsteroidMcGehee};
        case TransformName::QPChart: return {Chart::AsteroidMcGehee, Chart::QP};
    }
    return {identity_chart, identity_chart};
}

namespace detail {

constexpr double kConstraintTol = 1e-8;

inline ChartState jacobi_fwd(const SystemParams& p, const ChartState& st) {
    Vec2 xS{st[0], st[1]}, xJ{st[2], st[3]}, xP{st[4], st[5]};
    Vec2 yS{st[6], st[7]}, yJ{st[8], st[9]}, yP{st[10], st[11]};
    Vec2 Q0 = xS;
    Vec2 Q1 = xJ - xS;
    Vec2 Q2 = xP - (1.0 - p.mu) * xS - p.mu * xJ;
    Vec2 P0 = yS + yJ + yP;
    Vec2 P1 = yJ + p.mu * yP;
    Vec2 P2 = yP;
    return ChartState(Chart::Jacobi, {Q0[0], Q0[1], Q1[0], Q1[1], Q2[0], Q2[1], P0[0], P0[1], P1[0], P1[1], P2[0], P2[1]});
}

inline ChartState jacobi_inv(const SystemParams& p, const ChartState& st) {
    Vec2 Q0{st[0], st[1]}, Q1{st[2], st[3]}, Q2{st[4], st[5]};
    Vec2 P0{st[6], st[7]}, P1{st[8], st[9]}, P2{st[10], st[11]};
    Vec2 xS = Q0, xJ = Q1 + Q0, xP = Q2 + Q0 + p.mu * Q1;
    Vec2 yP = P2, yJ = P1 - p.mu * P2, yS = P0 - P1 - (1.0 - p.mu) * P2;
    return ChartState(Chart::CartesianSixBody,
                      {xS[0], xS[1], xJ[0], xJ[1], xP[0], xP[1], yS[0], yS[1], yJ[0], yJ[1], yP[0], yP[1]});
}

inline ChartState polar1_fwd(const ChartState& st) {
    Vec2 Q1{st[2], st[3]}, P1{st[8], st[9]};
    double r = norm(Q1);
    if (!(r > 0.0)) throw DomainError("Polar1: |Q1| must be positive");
    double theta = wrap_angle(std::atan2(Q1[1], Q1[0]));
    Vec2 u_r{std::cos(theta), std::sin(theta)};
    double R = dot(P1, u_r);
    double Theta = cross(Q1, P1);
    return ChartState(Chart::JacobiPolar, {r, R, theta, Theta, st[4], st[5], st[10], st[11], st[0], st[1], st[6], st[7]});
}

inline ChartState polar1_inv(const ChartState& st) {
    double r = st[0], R = st[1], theta = st[2], Theta = st[3];
    if (!(r > 0.0)) throw DomainError("Polar1 inverse: r must be positive");
    Vec2 u_r{std::cos(theta), std::sin(theta)};
    Vec2 Q1 = r * u_r;
    Vec2 P1 = R * u_r + (Theta / r) * perp(u_r);
    return ChartState(Chart::Jacobi, {st[8], st[9], Q1[0], Q1[1], st[4], st[5], st[10], st[11], P1[0], P1[1], st[6], st[7]});
}

inline void check_reduction_constraints(const SystemParams& p, const ChartState& st) {
    // JacobiPolar layout: (r, R, theta, Theta, Q2, P2, Q0, P0)
    Vec2 Q2{st[4], st[5]}, Q0{st[8], st[9]}, P0{st[10], st[11]};
    double r = st[0], theta = st[2];
    Vec2 u_r{std::cos(theta), std::sin(theta)};
    Vec2 Q0cm = (-p.mu * r) * u_r - (p.delta / (1.0 + p.delta)) * Q2;
    double scale = 1.0 + norm(Q2) + std::abs(r);
    if (norm(P0) > kConstraintTol * scale)
        throw DomainError("Hadjidemetriou: total momentum P0 must vanish");
    if (norm(Q0 - Q0cm) > kConstraintTol * scale)
        throw DomainError("Hadjidemetriou: Q0 inconsistent with center-of-mass reduction");
}

inline ChartState hadjidemetriou_fwd(const SystemParams& p, const ChartState& st, bool check) {
    if (check) check_reduction_constraints(p, st);
    double r = st[0], R = st[1], theta = st[2], Theta = st[3];
    Vec2 Q2{st[4], st[5]}, P2{st[6], st[7]};
    Vec2 q2 = rot_inv(theta, Q2), p2 = rot_inv(theta, P2);
    double Omega = Theta + cross(Q2, P2);
    return ChartState(Chart::RotatingPolar, {r, R, theta, Omega, q2[0], q2[1], p2[0], p2[1]});
}

inline ChartState hadjidemetriou_inv(const SystemParams& p, const ChartState& st) {
    double r = st[0], R = st[1], theta = st[2], Omega = st[3];
    Vec2 q2{st[4], st[5]}, p2{st[6], st[7]};
    if (!(r > 0.0)) throw DomainError("Hadjidemetriou inverse: r must be positive");
    double Theta = Omega - cross(q2, p2);
    Vec2 Q2 = rot(theta, q2), P2 = rot(theta, p2);
    Vec2 u_r{std::cos(theta), std::sin(theta)};
    Vec2 Q0 = (-p.mu * r) * u_r - (p.delta / (1.0 + p.delta)) * Q2;
    return ChartState(Chart::JacobiPolar, {r, R, theta, Theta, Q2[0], Q2[1], P2[0], P2[1], Q0[0], Q0[1], 0.0, 0.0});
}

inline ChartState rescale1_fwd(const SystemParams& p, const ChartState& st, bool check) {
    if (p.delta <= 0.0) throw DomainError("Rescale1 requires delta > 0");
    if (check) {
        if (std::abs(st[2]) > kConstraintTol && std::abs(st[2] - kTwoPi) > kConstraintTol)
            throw DomainError("Rescale1 acts on the reduced system; set theta = 0");
        if (std::abs(st[3] - p.alpha()) > kConstraintTol)
            throw DomainError("Rescale1 acts on the Omega = alpha slice");
    }
    double sd = std::sqrt(p.delta);
    return ChartState(Chart::RescaledTilde,
                      {(st[0] - 1.0) / sd, st[1] / sd, st[4], st[5], st[6] / p.delta, st[7] / p.delta});
}

inline ChartState rescale1_inv(const SystemParams& p, const ChartState& st) {
    if (p.delta <= 0.0) throw DomainError("Rescale1 requires delta > 0");
    double sd = std::sqrt(p.delta);
    double r = 1.0 + sd * st[0];
    if (!(r > 0.0)) throw DomainError("Rescale1 inverse: resulting r must be positive");
    return ChartState(Chart::RotatingPolar,
                      {r, sd * st[1], 0.0, p.alpha(), st[2], st[3], p.delta * st[4], p.delta * st[5]});
}

inline ChartState rescale2_fwd(const SystemParams& p, const ChartState& st) {
    double se = std::sqrt(p.epsilon), e2 = p.epsilon * p.epsilon;
    return ChartState(Chart::RescaledHat,
                      {se * st[0], se * st[1], e2 * st[2], e2 * st[3], st[4] / p.epsilon, st[5] / p.epsilon});
}

inline ChartState rescale2_inv(const SystemParams& p, const ChartState& st) {
    double se = std::sqrt(p.epsilon), e2 = p.epsilon * p.epsilon;
    return ChartState(Chart::RescaledTilde,
                      {st[0] / se, st[1] / se, st[2] / e2, st[3] / e2, p.epsilon * st[4], p.epsilon * st[5]});
}

inline ChartState comet_polar_fwd(const ChartState& st) {
    Vec2 q2{st[2], st[3]}, v2{st[4], st[5]};
    double rho = norm(q2);
    if (!(rho > 0.0)) throw DomainError("CometPolar: |q2^| must be positive");
    double phi = wrap_angle(std::atan2(q2[1], q2[0]));
    Vec2 u{std::cos(phi), std::sin(phi)};
    double Ups = dot(v2, u);
    double G = cross(q2, v2);
    return ChartState(Chart::CometPolar, {st[0], st[1], rho, Ups, phi, G});
}

inline ChartState comet_polar_inv(const ChartState& st) {
    double rho = st[2], Ups = st[3], phi = st[4], G = st[5];
    if (!(rho > 0.0)) throw DomainError("CometPolar inverse: rho must be positive");
    Vec2 u{std::cos(phi), std::sin(phi)};
    Vec2 q2 = rho * u;
    Vec2 v2 = Ups * u + (G / rho) * perp(u);
    return ChartState(Chart::RescaledHat, {st[0], st[1], q2[0], q2[1], v2[0], v2[1]});
}

inline ChartState asteroid_polar_fwd(const ChartState& st) {
    Vec2 xA{st[0], st[1]}, yA{st[2], st[3]};
    double xi = norm(xA);
    if (!(xi > 0.0)) throw DomainError("AsteroidPolar: |x_A| must be positive");
    double psi = wrap_angle(std::atan2(xA[1], xA[0]));
    Vec2 u{std::cos(psi), std::sin(psi)};
    double Xi = dot(yA, u);
    double Psi = cross(xA, yA);
    return ChartState(Chart::AsteroidPolar, {xi, Xi, psi, Psi, st[4]});
}

inline ChartState asteroid_polar_inv(const ChartState& st) {
    double xi = st[0], Xi = st[1], psi = st[2], Psi = st[3];
    if (!(xi > 0.0)) throw DomainError("AsteroidPolar inverse: xi must be positive");
    Vec2 u{std::cos(psi), std::sin(psi)};
    Vec2 xA = xi * u;
    Vec2 yA = Xi * u + (Psi / xi) * perp(u);
    return ChartState(Chart::AsteroidCartesian, {xA[0], xA[1], yA[0], yA[1], st[4]});
}

inline ChartState mcgehee_fwd(const ChartState& st) {
    double xi = st[0];
    if (!(xi > 0.0)) throw DomainError("McGehee: xi must be positive");
    return ChartState(Chart::AsteroidMcGehee, {std::sqrt(2.0 / xi), st[1], st[2], st[3], st[4]});
}

inline ChartState mcgehee_inv(const ChartState& st) {
    double x = st[0];
    if (!(x > 0.0)) throw DomainError("McGehee inverse: x must be positive");
    return ChartState(Chart::AsteroidPolar, {2.0 / (x * x), st[1], st[2], st[3], st[4]});
}

inline ChartState qp_fwd(const SystemParams& p, const ChartState& st) {
    double sq = std::sqrt(1.0 + p.delta);
    double x = st[0], Xi = st[1], psi = st[2], Psi = st[3];
    if (!(x > 0.0)) throw DomainError("QPChart: x must be positive");
    return ChartState(Chart::QP,
                      {0.5 * (sq * x - Xi), 0.5 * (sq * x + Xi), (1.0 + p.delta) * psi + Psi * Xi, Psi, st[4]});
}

inline ChartState qp_inv(const SystemParams& p, const ChartState& st) {
    double sq = std::sqrt(1.0 + p.delta);
    double q = st[0], pp = st[1], alpha = st[2], Psi = st[3];
    double x = (q + pp) / sq;
    if (!(x > 0.0)) throw DomainError("QPChart inverse: q + p must be positive");
    double Xi = pp - q;
    double psi = (alpha - Psi * Xi) / (1.0 + p.delta);
    return ChartState(Chart::AsteroidMcGehee, {x, Xi, psi, Psi, st[4]});
}

inline ChartState apply_impl(const TransformDescriptor& d, const ChartState& st, Direction dir, bool check) {
    const SystemParams& p = d.params;
    bool fwd = dir == Direction::Forward;
    switch (d.name) {
        case TransformName::Identity: return st;
        case TransformName::Jacobi: return fwd ? jacobi_fwd(p, st) : jacobi_inv(p, st);
        case TransformName::Polar1: return fwd ? polar1_fwd(st) : polar1_inv(st);
        case TransformName::Hadjidemetriou: return fwd ? hadjidemetriou_fwd(p, st, check) : hadjidemetriou_inv(p, st);
        case TransformName::CartesianPullback:
            return fwd ? jacobi_inv(p, polar1_inv(hadjidemetriou_inv(p, st)))
                       : hadjidemetriou_fwd(p, polar1_fwd(jacobi_fwd(p, st)), check);
        case TransformName::Rescale1: return fwd ? rescale1_fwd(p, st, check) : rescale1_inv(p, st);
        case TransformName::Rescale2: return fwd ? rescale2_fwd(p, st) : rescale2_inv(p, st);
        case TransformName::CometPolar: return fwd ? comet_polar_fwd(st) : comet_polar_inv(st);
        case TransformName::AsteroidPolar: return fwd ? asteroid_polar_fwd(st) : asteroid_polar_inv(st);
        case TransformName::McGehee: return fwd ? mcgehee_fwd(st) : mcgehee_inv(st);
        case TransformName::QPChart: return fwd ? qp_fwd(p, st) : qp_inv(p, st);
    }
    throw std::logic_error("apply: unhandled transform");
}

}  // namespace detail

/// Apply a coordinate transformation.  The input chart must match the
/// descriptor's source (target, for the inverse direction).
inline ChartState apply(const TransformDescriptor& d, const ChartState& st, Direction dir = Direction::Forward) {
    auto [src, tgt] = transform_charts(d.name, st.chart);
    require_chart(st, dir == Direction::Forward ? src : tgt, "apply");
    return detail::apply_impl(d, st, dir, true);
}

namespace detail {

/// Canonically paired indices of the symplectic block of each chart, as
/// (position index, momentum index, weight) triples; the weight multiplies
/// dq ^ dp in the 2-form and may depend on the state (McGehee).
struct SymplecticStructure {
    std::vector<std::size_t> idx;                                   // coordinates entering the certificate
    std::function<Eigen::MatrixXd(const ChartState&)> omega;        // 2-form matrix on those coordinates
};

inline Eigen::MatrixXd pair_form(std::size_t n, const std::vector<std::array<std::size_t, 2>>& pairs,
                                 const std::vector<double>& w) {
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        M(pairs[k][0], pairs[k][1]) = w[k];
        M(pairs[k][1], pairs[k][0]) = -w[k];
    }
    return M;
}

inline SymplecticStructure chart_structure(Chart c) {
    SymplecticStructure s;
    switch (c) {
        case Chart::CartesianSixBody:
            s.idx = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
            s.omega = [](const ChartState&) {
                return pair_form(12, {{0, 6}, {1, 7}, {2, 8}, {3, 9}, {4, 10}, {5, 11}}, std::vector<double>(6, 1.0));
            };
            break;
        case Chart::Jacobi:
            s.idx = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
            s.omega = [](const ChartState&) {
                return pair_form(12, {{0, 6}, {1, 7}, {2, 8}, {3, 9}, {4, 10}, {5, 11}}, std::vector<double>(6, 1.0));
            };
            break;
        case Chart::JacobiPolar:
            s.idx = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
            s.omega = [](const ChartState&) {
                return pair_form(12, {{0, 1}, {2, 3}, {4, 6}, {5, 7}, {8, 10}, {9, 11}}, std::vector<double>(6, 1.0));
            };
            break;
        case Chart::RotatingPolar:
            s.idx = {0, 1, 2, 3, 4, 5, 6, 7};
            s.omega = [](const ChartState&) {
                return pair_form(8, {{0, 1}, {2, 3}, {4, 6}, {5, 7}}, std::vector<double>(4, 1.0));
            };
            break;
        case Chart::RescaledTilde:
        case Chart::RescaledHat:
            s.idx = {0, 1, 2, 3, 4, 5};
            s.omega = [](const ChartState&) {
                return pair_form(6, {{0, 1}, {2, 4}, {3, 5}}, std::vector<double>(3, 1.0));
            };
            break;
        case Chart::CometPolar:
            s.idx = {0, 1, 2, 3, 4, 5};
            s.omega = [](const ChartState&) {
                return pair_form(6, {{0, 1}, {2, 3}, {4, 5}}, std::vector<double>(3, 1.0));
            };
            break;
        case Chart::AsteroidCartesian:
            s.idx = {0, 1, 2, 3};
            s.omega = [](const ChartState&) { return pair_form(4, {{0, 2}, {1, 3}}, {1.0, 1.0}); };
            break;
        case Chart::AsteroidPolar:
            s.idx = {0, 1, 2, 3};
            s.omega = [](const ChartState&) { return pair_form(4, {{0, 1}, {2, 3}}, {1.0, 1.0}); };
            break;
        case Chart::AsteroidMcGehee:
            s.idx = {0, 1, 2, 3};
            s.omega = [](const ChartState& st) {
                double x = st[0];
                return pair_form(4, {{0, 1}, {2, 3}}, {-4.0 / (x * x * x), 1.0});
            };
            break;
        case Chart::QP:
            s.idx = {0, 1, 2, 3};
            s.omega = [](const ChartState&) { return pair_form(4, {{0, 1}, {2, 3}}, {1.0, 1.0}); };
            break;
    }
    return s;
}

}  // namespace detail

namespace detail {

/// Source-side structure per transform: dimension-reducing maps certify over
/// the reduced canonical block (gauge/slice coordinates excluded).
inline SymplecticStructure source_structure(TransformName t, Chart src_chart) {
    switch (t) {
        case TransformName::Hadjidemetriou: {
            SymplecticStructure s;
            s.idx = {0, 1, 2, 3, 4, 5, 6, 7};
            s.omega = [](const ChartState&) {
                return pair_form(8, {{0, 1}, {2, 3}, {4, 6}, {5, 7}}, std::vector<double>(4, 1.0));
            };
            return s;
        }
        case TransformName::Rescale1: {
            SymplecticStructure s;
            s.idx = {0, 1, 4, 5, 6, 7};  // (r, R, q2, p2); the (theta, Omega) slice is fixed
            s.omega = [](const ChartState&) {
                return pair_form(6, {{0, 1}, {2, 4}, {3, 5}}, std::vector<double>(3, 1.0));
            };
            return s;
        }
        default: return chart_structure(src_chart);
    }
}

}  // namespace detail

/// max-norm of  c * J^T Omega_target J - Omega_source  over the canonical
/// blocks, J the centrally differenced Jacobian of the forward map.  A small
/// value certifies conformal symplecticity with the declared factor.
inline double symplectic_residual(const TransformDescriptor& d, const ChartState& st) {
    if (d.name == TransformName::QPChart)
        throw DomainError("QPChart carries no conformal-symplecticity certificate");
    auto [src_chart, tgt_chart] = transform_charts(d.name, st.chart);
    require_chart(st, src_chart, "symplectic_residual");
    double c = d.conformal_factor();
    if (d.name == TransformName::Identity) return 0.0;  // Jacobian is the identity by definition

    detail::SymplecticStructure Ss = detail::source_structure(d.name, src_chart);
    detail::SymplecticStructure St = detail::chart_structure(tgt_chart);
    ChartState img = detail::apply_impl(d, st, Direction::Forward, false);
    std::size_t n = Ss.idx.size(), m = St.idx.size();

    auto angle_idx = chart_angle_indices(tgt_chart);
    auto is_angle = [&](std::size_t j) {
        for (std::size_t a : angle_idx)
            if (a == j) return true;
        return false;
    };

    Eigen::MatrixXd J(m, n);
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t i = Ss.idx[k];
        double h = 1e-6 * (1.0 + std::abs(st[i]));
        ChartState sp = st, sm = st;
        sp.coords[i] += h;
        sm.coords[i] -= h;
        ChartState ip = detail::apply_impl(d, sp, Direction::Forward, false);
        ChartState im = detail::apply_impl(d, sm, Direction::Forward, false);
        for (std::size_t l = 0; l < m; ++l) {
            std::size_t j = St.idx[l];
            double diff = ip[j] - im[j];
            if (is_angle(j)) diff = wrap_pm(diff);
            J(l, k) = diff / (2.0 * h);
        }
    }
    Eigen::MatrixXd res = c * (J.transpose() * St.omega(img) * J) - Ss.omega(st);
    return res.cwiseAbs().maxCoeff();
}

/// Cartesian primary positions from a rotating-frame state.
inline PrimaryPositions primaries_from_rotating(const SystemParams& p, const ChartState& st) {
    require_chart(st, Chart::RotatingPolar, "primaries_from_rotating");
    PrimaryElements el{st[0], st[2], Vec2{st[4], st[5]}};
    return primary_positions_from_elements(p.mu, p.delta, el);
}

}  // namespace rp4bp
