#pragma once

#include "hamiltonian.hpp"

namespace rp4bp {

// Time-t vector fields for every chart-level system.  All canonical fields are
// hand-coded symplectic gradients of the corresponding Hamiltonians (verified
// against finite differences in the test suite); RescaledHat and QP are exact
// pushforwards through their (diagonal resp. polynomial) chart maps.
enum class SystemTag {
    Cartesian3BP,
    Jacobi3BP,
    JacobiPolar3BP,
    RotatingPolar3BP,
    RescaledTilde3BP,
    RescaledHat3BP,
    CometPolarFull,
    CometPolarTruncated,
    AsteroidCartesian,
    AsteroidPolar,
    AsteroidMcGehee,
    McGeheeModel,  // the near-infinity normal form: drops the Psi^2 x^6/8 kinetic term
    QP,
    // far-field system: the binary potential replaced by its exact average
    // over the relative angle, so Psi is a strict first integral and the
    // right-hand side carries no fast forcing.  Valid where the oscillating
    // part (of size ~ mu(1-mu) x^6) is below tolerance.
    AsteroidMcGeheeAveraged,
    QPAveraged,
};

inline const char* system_name(SystemTag t) {
    switch (t) {
        case SystemTag::Cartesian3BP: return "Cartesian3BP";
        case SystemTag::Jacobi3BP: return "Jacobi3BP";
        case SystemTag::JacobiPolar3BP: return "JacobiPolar3BP";
        case SystemTag::RotatingPolar3BP: return "RotatingPolar3BP";
        case SystemTag::RescaledTilde3BP: return "RescaledTilde3BP";
        case SystemTag::RescaledHat3BP: return "RescaledHat3BP";
        case SystemTag::CometPolarFull: return "CometPolarFull";
        case SystemTag::CometPolarTruncated: return "CometPolarTruncated";
        case SystemTag::AsteroidCartesian: return "AsteroidCartesian";
        case SystemTag::AsteroidPolar: return "AsteroidPolar";
        case SystemTag::AsteroidMcGehee: return "AsteroidMcGehee";
        case SystemTag::McGeheeModel: return "McGeheeModel";
        case SystemTag::QP: return "QP";
        case SystemTag::AsteroidMcGeheeAveraged: return "AsteroidMcGeheeAveraged";
        case SystemTag::QPAveraged: return "QPAveraged";
    }
    return "?";
}

inline SystemTag system_from_name(const std::string& s) {
    for (SystemTag t : {SystemTag::Cartesian3BP, SystemTag::Jacobi3BP, SystemTag::JacobiPolar3BP,
                        SystemTag::RotatingPolar3BP, SystemTag::RescaledTilde3BP, SystemTag::RescaledHat3BP,
                        SystemTag::CometPolarFull, SystemTag::CometPolarTruncated, SystemTag::AsteroidCartesian,
                        SystemTag::AsteroidPolar, SystemTag::AsteroidMcGehee, SystemTag::McGeheeModel, SystemTag::QP,
                        SystemTag::AsteroidMcGeheeAveraged, SystemTag::QPAveraged})
        if (s == system_name(t)) return t;
    throw std::invalid_argument("unknown system: " + s);
}

inline Chart system_chart(SystemTag t) {
    switch (t) {
        case SystemTag::Cartesian3BP: return Chart::CartesianSixBody;
        case SystemTag::Jacobi3BP: return Chart::Jacobi;
        case SystemTag::JacobiPolar3BP: return Chart::JacobiPolar;
        case SystemTag::RotatingPolar3BP: return Chart::RotatingPolar;
        case SystemTag::RescaledTilde3BP: return Chart::RescaledTilde;
        case SystemTag::RescaledHat3BP: return Chart::RescaledHat;
        case SystemTag::CometPolarFull: return Chart::CometPolar;
        case SystemTag::CometPolarTruncated: return Chart::CometPolar;
        case SystemTag::AsteroidCartesian: return Chart::AsteroidCartesian;
        case SystemTag::AsteroidPolar: return Chart::AsteroidPolar;
        case SystemTag::AsteroidMcGehee: return Chart::AsteroidMcGehee;
        case SystemTag::McGeheeModel: return Chart::AsteroidMcGehee;
        case SystemTag::QP: return Chart::QP;
        case SystemTag::AsteroidMcGeheeAveraged: return Chart::AsteroidMcGehee;
        case SystemTag::QPAveraged: return Chart::QP;
    }
    return Chart::AsteroidMcGehee;
}

namespace detail {

inline void tilde_field(const SystemParams& p, const double* y, double* dy) {
    double a = p.alpha(), sd = std::sqrt(p.delta);
    double rt = y[0], Rt = y[1];
    Vec2 q2{y[2], y[3]}, v2{y[4], y[5]};
    double w = cross(q2, v2);
    // f~ and its partials
    double D = 1.0 + sd * rt;
    double B = 2.0 * a * w - a * a * rt * rt;
    double S = 2.0 * sd * rt + p.delta * rt * rt;
    double N = p.delta * w * w + S * B;
    double dN_rt = (2.0 * sd + 2.0 * p.delta * rt) * B + S * (-2.0 * a * a * rt);
    double f_rt = (D * dN_rt - 2.0 * sd * N) / (2.0 * a * D * D * D);
    double f_w = (2.0 * p.delta * w + 2.0 * a * S) / (2.0 * a * D * D);
    // g~ partials
    double g_rt = 0.0;
    Vec2 g_q2{0.0, 0.0};
    Vec2 Vgrad{0.0, 0.0};
    struct Body {
        double mass, b;
    };
    Body bodies[2] = {{1.0 - p.mu, -p.mu}, {p.mu, 1.0 - p.mu}};  // at +b e1 in |q2 - b e1| form
    for (const Body& bd : bodies) {
        double bb = -bd.b;  // S at -mu e1 enters as |q2 + mu e1|, J at (1-mu) e1 as |q2 - (1-mu) e1|
        double bbp = bb * (1.0 + sd * rt);
        Vec2 db{q2[0] + bb, q2[1]}, dbp{q2[0] + bbp, q2[1]};
        double Dd = norm(db), Ddp = norm(dbp);
        if (Dd < kCollisionFloor || Ddp < kCollisionFloor) throw CollisionError("tilde_field: separation below floor");
        double iD3 = 1.0 / (Dd * Dd * Dd), iDp3 = 1.0 / (Ddp * Ddp * Ddp);
        Vgrad = Vgrad + (bd.mass * iD3) * db;
        g_q2 = g_q2 + bd.mass * (iDp3 * dbp - iD3 * db);
        g_rt += bd.mass * (q2[0] + bbp) * iDp3 * bb * sd;
    }
    double thdot = 1.0 - f_w;  // effective frame rate multiplying the Coriolis terms
    Vec2 q2dot = (1.0 + p.delta) * v2 - thdot * perp(q2);
    Vec2 v2dot = Vec2{-(Vgrad[0] + g_q2[0]), -(Vgrad[1] + g_q2[1])} - thdot * perp(v2);
    dy[0] = Rt / a;
    dy[1] = -(a * rt + f_rt + g_rt);
    dy[2] = q2dot[0];
    dy[3] = q2dot[1];
    dy[4] = v2dot[0];
    dy[5] = v2dot[1];
}

inline void comet_field(const SystemParams& p, const double* y, double* dy, bool truncated) {
    CometGrad g = truncated ? comet_truncated_grad(p, y[0], y[1], y[2], y[3], y[4], y[5])
                            : comet_full_grad(p, y[0], y[1], y[2], y[3], y[4], y[5]);
    dy[0] = g.d_Rh;
    dy[1] = -g.d_rh;
    dy[2] = g.d_Ups;
    dy[3] = -g.d_rho;
    dy[4] = g.d_G;
    dy[5] = -g.d_phi;
}

inline void mcgehee_averaged_field(const SystemParams& p, const PrimariesSource& src, const double* y, double* dy) {
    double x = y[0], Xi = y[1], Psi = y[3];
    if (!(x >= 0.0)) throw DomainError("averaged field: x must be nonnegative");
    double x3 = x * x * x;
    dy[0] = -0.25 * x3 * Xi;
    dy[1] = 0.25 * x3 * (0.5 * Psi * Psi * x3 - (1.0 + p.delta) * x - averaged_far_potential_deriv(p.mu, x));
    dy[2] = 0.25 * Psi * x3 * x;
    dy[3] = 0.0;
    dy[4] = src.nu();
}

inline void mcgehee_field(const SystemParams& p, const PrimariesSource& src, const double* y, double* dy,
                          bool model) {
    double x = y[0], Xi = y[1], psi = y[2], Psi = y[3], s = y[4];
    if (x == 0.0) {
        // on the infinity manifold the (x, Xi, psi, Psi) block is at rest
        dy[0] = dy[1] = dy[2] = dy[3] = 0.0;
        dy[4] = src.nu();
        return;
    }
    if (!(x > 0.0)) throw DomainError("mcgehee field: x must be positive");
    DeltaVTilde dv = delta_V_tilde(p, src, x, psi, s);
    double x3 = x * x * x, x4 = x3 * x;
    dy[0] = -0.25 * x3 * Xi;
    double dH_dx = -(1.0 + p.delta) * x - dv.d_x + (model ? 0.0 : 0.5 * Psi * Psi * x3);
    dy[1] = 0.25 * x3 * dH_dx;
    dy[2] = 0.25 * Psi * x4;
    dy[3] = dv.d_psi;
    dy[4] = src.nu();
}

}  // namespace detail

/// Allocation-free core: writes d(state)/dt for the raw chart layout into dy.
inline void eval_field_raw(const SystemParams& p, SystemTag tag, const double* y, double* dy, std::size_t dim,
                           const PrimariesSource* primaries = nullptr) {
    std::fill(dy, dy + dim, 0.0);
    double a = p.alpha();
    std::optional<CircularPrimaries> circ;
    auto src = [&]() -> const PrimariesSource& {
        if (primaries) return *primaries;
        if (!circ) circ.emplace(p);
        return *circ;
    };
    switch (tag) {
        case SystemTag::Cartesian3BP: {
            if (p.delta <= 0.0) throw DomainError("Cartesian3BP requires delta > 0");
            Vec2 xS{y[0], y[1]}, xJ{y[2], y[3]}, xP{y[4], y[5]};
            Vec2 yS{y[6], y[7]}, yJ{y[8], y[9]}, yP{y[10], y[11]};
            double mS = 1.0 - p.mu, mJ = p.mu, mP = p.delta;
            auto acc = [&](Vec2 xi, Vec2 xj, double mj, const char* w) {
                double d = guarded_dist(xi, xj, w);
                double s = mj / (d * d * d);
                return s * (xj - xi);
            };
            Vec2 vS = (1.0 / mS) * yS, vJ = (1.0 / mJ) * yJ, vP = (1.0 / mP) * yP;
            Vec2 fS = mS * (acc(xS, xJ, mJ, "S-J") + acc(xS, xP, mP, "S-P"));
            Vec2 fJ = mJ * (acc(xJ, xS, mS, "S-J") + acc(xJ, xP, mP, "J-P"));
            Vec2 fP = mP * (acc(xP, xS, mS, "S-P") + acc(xP, xJ, mJ, "J-P"));
            dy[0] = vS[0]; dy[1] = vS[1]; dy[2] = vJ[0]; dy[3] = vJ[1]; dy[4] = vP[0]; dy[5] = vP[1];
            dy[6] = fS[0]; dy[7] = fS[1]; dy[8] = fJ[0]; dy[9] = fJ[1]; dy[10] = fP[0]; dy[11] = fP[1];
            return;
        }
        case SystemTag::Jacobi3BP: {
            if (p.delta <= 0.0) throw DomainError("Jacobi3BP requires delta > 0");
            Vec2 Q1{y[2], y[3]}, Q2{y[4], y[5]}, P0{y[6], y[7]}, P1{y[8], y[9]}, P2{y[10], y[11]};
            Vec2 yS = P0 - P1 - (1.0 - p.mu) * P2;
            Vec2 yJ = P1 - p.mu * P2;
            Vec2 yP = P2;
            Vec2 d1 = Q2 + p.mu * Q1, d2 = Q2 - (1.0 - p.mu) * Q1;
            double D1 = norm(d1), D2 = norm(d2), r1 = norm(Q1);
            if (D1 < kCollisionFloor || D2 < kCollisionFloor || r1 < kCollisionFloor)
                throw CollisionError("Jacobi3BP: separation below floor");
            double iD13 = 1.0 / (D1 * D1 * D1), iD23 = 1.0 / (D2 * D2 * D2), ir13 = 1.0 / (r1 * r1 * r1);
            Vec2 Q0dot = (1.0 / (1.0 - p.mu)) * yS;
            Vec2 Q1dot = (1.0 / p.mu) * yJ - (1.0 / (1.0 - p.mu)) * yS;
            Vec2 Q2dot = (1.0 / p.delta) * yP - yS - yJ;
            Vec2 P1dot = (-p.delta * (1.0 - p.mu) * p.mu * iD13) * d1 + (p.delta * p.mu * (1.0 - p.mu) * iD23) * d2 -
                         (a * ir13) * Q1;
            Vec2 P2dot = (-p.delta * (1.0 - p.mu) * iD13) * d1 - (p.delta * p.mu * iD23) * d2;
            dy[0] = Q0dot[0]; dy[1] = Q0dot[1]; dy[2] = Q1dot[0]; dy[3] = Q1dot[1];
            dy[4] = Q2dot[0]; dy[5] = Q2dot[1];
            dy[8] = P1dot[0]; dy[9] = P1dot[1]; dy[10] = P2dot[0]; dy[11] = P2dot[1];
            return;
        }
        case SystemTag::JacobiPolar3BP: {
            if (p.delta <= 0.0) throw DomainError("JacobiPolar3BP requires delta > 0");
            double r = y[0], R = y[1], theta = y[2], Theta = y[3];
            Vec2 Q2{y[4], y[5]}, P2{y[6], y[7]}, P0{y[10], y[11]};
            if (std::abs(P0[0]) > 1e-12 || std::abs(P0[1]) > 1e-12)
                throw DomainError("JacobiPolar3BP field defined on the P0 = 0 slice");
            if (!(r > kCollisionFloor)) throw CollisionError("S-J separation below floor");
            Vec2 u_r{std::cos(theta), std::sin(theta)}, u_t = perp(u_r);
            Vec2 d1 = Q2 + (p.mu * r) * u_r, d2 = Q2 - ((1.0 - p.mu) * r) * u_r;
            double D1 = norm(d1), D2 = norm(d2);
            if (D1 < kCollisionFloor || D2 < kCollisionFloor) throw CollisionError("separation below floor");
            double iD13 = 1.0 / (D1 * D1 * D1), iD23 = 1.0 / (D2 * D2 * D2);
            double c1 = p.delta * (1.0 - p.mu) * p.mu, c2 = p.delta * p.mu * (1.0 - p.mu);
            double dW_dr = -c1 * dot(d1, u_r) * iD13 + c2 * dot(d2, u_r) * iD23 - a / (r * r);
            double dW_dth = -c1 * r * dot(d1, u_t) * iD13 + c2 * r * dot(d2, u_t) * iD23;
            Vec2 dW_dQ2 = (-p.delta * (1.0 - p.mu) * iD13) * d1 - (p.delta * p.mu * iD23) * d2;
            dy[0] = R / a;
            dy[1] = Theta * Theta / (a * r * r * r) + dW_dr;
            dy[2] = Theta / (a * r * r);
            dy[3] = dW_dth;
            Vec2 Q2dot = ((1.0 + p.delta) / p.delta) * P2;
            dy[4] = Q2dot[0]; dy[5] = Q2dot[1];
            dy[6] = dW_dQ2[0]; dy[7] = dW_dQ2[1];
            // companion pair: Q0 = xS moves with yS = -P1 - (1-mu) P2 on this slice
            Vec2 P1 = R * u_r + (Theta / r) * u_t;
            Vec2 yS = (-1.0) * P1 - (1.0 - p.mu) * P2;
            dy[8] = yS[0] / (1.0 - p.mu);
            dy[9] = yS[1] / (1.0 - p.mu);
            return;
        }
        case SystemTag::RotatingPolar3BP: {
            if (p.delta <= 0.0) throw DomainError("RotatingPolar3BP requires delta > 0");
            double r = y[0], R = y[1], Omega = y[3];
            Vec2 q2{y[4], y[5]}, p2{y[6], y[7]};
            if (!(r > kCollisionFloor)) throw CollisionError("S-J separation below floor");
            double Th = Omega - cross(q2, p2);
            Vec2 d1 = q2 + Vec2{p.mu * r, 0.0}, d2 = q2 - Vec2{(1.0 - p.mu) * r, 0.0};
            double D1 = norm(d1), D2 = norm(d2);
            if (D1 < kCollisionFloor || D2 < kCollisionFloor) throw CollisionError("separation below floor");
            double iD13 = 1.0 / (D1 * D1 * D1), iD23 = 1.0 / (D2 * D2 * D2);
            double thdot = Th / (a * r * r);
            dy[0] = R / a;
            dy[1] = -p.delta * (1.0 - p.mu) * p.mu * d1[0] * iD13 + p.delta * p.mu * (1.0 - p.mu) * d2[0] * iD23 +
                    Th * Th / (a * r * r * r) - a / (r * r);
            dy[2] = thdot;
            dy[3] = 0.0;
            Vec2 q2dot = ((1.0 + p.delta) / p.delta) * p2 - thdot * perp(q2);
            Vec2 grav = (-p.delta * (1.0 - p.mu) * iD13) * d1 - (p.delta * p.mu * iD23) * d2;
            Vec2 p2dot = grav - thdot * perp(p2);
            dy[4] = q2dot[0]; dy[5] = q2dot[1]; dy[6] = p2dot[0]; dy[7] = p2dot[1];
            return;
        }
        case SystemTag::RescaledTilde3BP:
            detail::tilde_field(p, y, dy);
            return;
        case SystemTag::RescaledHat3BP: {
            double se = std::sqrt(p.epsilon), e2 = p.epsilon * p.epsilon;
            double yt[6] = {y[0] / se, y[1] / se, y[2] / e2, y[3] / e2, p.epsilon * y[4], p.epsilon * y[5]};
            double dt[6];
            detail::tilde_field(p, yt, dt);
            dy[0] = se * dt[0];
            dy[1] = se * dt[1];
            dy[2] = e2 * dt[2];
            dy[3] = e2 * dt[3];
            dy[4] = dt[4] / p.epsilon;
            dy[5] = dt[5] / p.epsilon;
            return;
        }
        case SystemTag::CometPolarFull:
            detail::comet_field(p, y, dy, false);
            return;
        case SystemTag::CometPolarTruncated:
            detail::comet_field(p, y, dy, true);
            return;
        case SystemTag::AsteroidCartesian: {
            const PrimariesSource& s = src();
            Vec2 xA{y[0], y[1]}, yA{y[2], y[3]};
            double t = y[4] / s.nu();
            Vec2 g = asteroid_potential_grad(p, s, xA, t);
            dy[0] = yA[0]; dy[1] = yA[1]; dy[2] = g[0]; dy[3] = g[1]; dy[4] = s.nu();
            return;
        }
        case SystemTag::AsteroidPolar: {
            const PrimariesSource& s = src();
            double xi = y[0], Xi = y[1], psi = y[2], Psi = y[3];
            if (!(xi > 0.0)) throw DomainError("AsteroidPolar: xi must be positive");
            double t = y[4] / s.nu();
            Vec2 A{xi * std::cos(psi), xi * std::sin(psi)};
            Vec2 g = delta_V_hat_grad(p, s, A, t);
            double dxi = dot(g, Vec2{std::cos(psi), std::sin(psi)});
            double dpsi = dot(g, perp(A));
            dy[0] = Xi;
            dy[1] = Psi * Psi / (xi * xi * xi) - (1.0 + p.delta) / (xi * xi) + dxi;
            dy[2] = Psi / (xi * xi);
            dy[3] = dpsi;
            dy[4] = s.nu();
            return;
        }
        case SystemTag::AsteroidMcGehee:
            detail::mcgehee_field(p, src(), y, dy, false);
            return;
        case SystemTag::McGeheeModel:
            detail::mcgehee_field(p, src(), y, dy, true);
            return;
        case SystemTag::AsteroidMcGeheeAveraged:
            detail::mcgehee_averaged_field(p, src(), y, dy);
            return;
        case SystemTag::QP:
        case SystemTag::QPAveraged: {
            const PrimariesSource& s = src();
            double sq = std::sqrt(1.0 + p.delta);
            double q = y[0], pp = y[1], alpha_c = y[2], Psi = y[3], sv = y[4];
            double x = (q + pp) / sq, Xi = pp - q;
            double psi = (alpha_c - Psi * Xi) / (1.0 + p.delta);
            double ym[5] = {x, Xi, psi, Psi, sv};
            double dm[5];
            if (tag == SystemTag::QPAveraged)
                detail::mcgehee_averaged_field(p, s, ym, dm);
            else
                detail::mcgehee_field(p, s, ym, dm, false);
            dy[0] = 0.5 * (sq * dm[0] - dm[1]);
            dy[1] = 0.5 * (sq * dm[0] + dm[1]);
            dy[2] = (1.0 + p.delta) * dm[2] + dm[3] * Xi + Psi * dm[1];
            dy[3] = dm[3];
            dy[4] = dm[4];
            return;
        }
    }
    throw std::logic_error("eval_field_raw: unhandled tag");
}

/// d(state)/dt of the named system.  The state layout is the chart layout.
inline std::vector<double> eval_vector_field(const SystemParams& p, const ChartState& st, SystemTag tag,
                                             const PrimariesSource* primaries = nullptr) {
    require_chart(st, system_chart(tag), "eval_vector_field");
    std::vector<double> out(st.size(), 0.0);
    eval_field_raw(p, tag, st.coords.data(), out.data(), st.size(), primaries);
    return out;
}

}  // namespace rp4bp
