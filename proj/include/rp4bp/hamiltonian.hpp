#pragma once

#include <cmath>
#include <memory>
#include <optional>

#include "chart.hpp"
#include "params.hpp"

namespace rp4bp {

// ---------------------------------------------------------------------------
// Primaries: the three heavy bodies as functions of time.  The asteroid-side
// Hamiltonians consume this interface; the circular implementation below is
// the delta = 0 limit, the record-backed one lives in orbit_record.hpp.
// ---------------------------------------------------------------------------

struct PrimaryElements {
    double r = 1.0;      // inner binary separation
    double theta = 0.0;  // inner binary polar angle
    Vec2 q2{0.0, 0.0};   // outer body, Hadjidemetriou frame
};

/// Cartesian positions of S, J, P from rotating-frame elements.
struct PrimaryPositions {
    Vec2 xS, xJ, xP;
};

inline PrimaryPositions primary_positions_from_elements(double mu, double delta, const PrimaryElements& el) {
    Vec2 e_theta{std::cos(el.theta), std::sin(el.theta)};
    Vec2 Q2 = rot(el.theta, el.q2);
    double c = delta / (1.0 + delta);
    PrimaryPositions p;
    p.xS = (-mu * el.r) * e_theta - c * Q2;
    p.xJ = ((1.0 - mu) * el.r) * e_theta - c * Q2;
    p.xP = (1.0 / (1.0 + delta)) * Q2;
    return p;
}

class PrimariesSource {
public:
    virtual ~PrimariesSource() = default;
    virtual double period() const = 0;
    virtual PrimaryElements elements(double t) const = 0;
    double nu() const { return kTwoPi / period(); }
    PrimaryPositions positions(double mu, double delta, double t) const {
        return primary_positions_from_elements(mu, delta, elements(t));
    }
};

/// delta -> 0 limit: circular inner binary (r = 1, theta = t) and the limiting
/// outer circle of radius 1/eps^2 rotating at rate -(1 -+ eps^3) in the frame.
class CircularPrimaries final : public PrimariesSource {
public:
    CircularPrimaries(const SystemParams& p, Branch branch = Branch::Plus)
        : q_(p.q), eps_(p.epsilon), phidot_(-(1.0 - branch_sign(branch) * std::pow(p.epsilon, 3))) {}
    double period() const override { return kTwoPi * q_; }
    PrimaryElements elements(double t) const override {
        PrimaryElements el;
        el.r = 1.0;
        el.theta = t;
        double a = phidot_ * t;
        el.q2 = Vec2{std::cos(a) / (eps_ * eps_), std::sin(a) / (eps_ * eps_)};
        return el;
    }

private:
    int q_;
    double eps_;
    double phidot_;
};

// ---------------------------------------------------------------------------
// Numerically stable potential increments.
// ---------------------------------------------------------------------------

/// 1/|A-c| - 1/|A| without cancellation:
///   |A|^2 - |A-c|^2 = 2 A.c - |c|^2.
inline double inv_dist_increment(Vec2 A, Vec2 c, const char* what = "body") {
    double nA = norm(A);
    if (nA < kCollisionFloor) throw CollisionError("origin separation below collision floor");
    double nAc = guarded_dist(A, c, what);
    return (2.0 * dot(A, c) - dot(c, c)) / (nA * nAc * (nA + nAc));
}

/// grad_A of (1/|A-c| - 1/|A|) = A/|A|^3 - (A-c)/|A-c|^3.
inline Vec2 inv_dist_increment_grad(Vec2 A, Vec2 c, const char* what = "body") {
    double nA = norm(A);
    if (nA < kCollisionFloor) throw CollisionError("origin separation below collision floor");
    double nAc = guarded_dist(A, c, what);
    Vec2 d = A - c;
    double ia = 1.0 / (nA * nA * nA), ic = 1.0 / (nAc * nAc * nAc);
    return Vec2{A[0] * ia - d[0] * ic, A[1] * ia - d[1] * ic};
}

/// Full asteroid potential V_A(x_A, t).  Massless bodies exert no force and
/// raise no collision guard.
inline double asteroid_potential(const SystemParams& p, const PrimariesSource& src, Vec2 xA, double t) {
    PrimaryPositions b = src.positions(p.mu, p.delta, t);
    double V = 0.0;
    if (p.mu < 1.0) V += (1.0 - p.mu) / guarded_dist(xA, b.xS, "A-S");
    if (p.mu > 0.0) V += p.mu / guarded_dist(xA, b.xJ, "A-J");
    if (p.delta > 0.0) V += p.delta / guarded_dist(xA, b.xP, "A-P");
    return V;
}

/// grad_x V_A (the attracting acceleration).
inline Vec2 asteroid_potential_grad(const SystemParams& p, const PrimariesSource& src, Vec2 xA, double t) {
    PrimaryPositions b = src.positions(p.mu, p.delta, t);
    auto pull = [&](Vec2 c, double m, const char* w) {
        if (m <= 0.0) return Vec2{0.0, 0.0};
        double d = guarded_dist(xA, c, w);
        double s = m / (d * d * d);
        return Vec2{s * (c[0] - xA[0]), s * (c[1] - xA[1])};
    };
    return pull(b.xS, 1.0 - p.mu, "A-S") + pull(b.xJ, p.mu, "A-J") + pull(b.xP, p.delta, "A-P");
}

/// Increment over the Kepler leading term:  V_A(xi e^{i psi}, t) - (1+delta)/xi.
inline double delta_V_hat(const SystemParams& p, const PrimariesSource& src, double xi, double psi, double t) {
    Vec2 A{xi * std::cos(psi), xi * std::sin(psi)};
    PrimaryPositions b = src.positions(p.mu, p.delta, t);
    double v = 0.0;
    if (p.mu < 1.0) v += (1.0 - p.mu) * inv_dist_increment(A, b.xS, "A-S");
    if (p.mu > 0.0) v += p.mu * inv_dist_increment(A, b.xJ, "A-J");
    if (p.delta > 0.0) v += p.delta * inv_dist_increment(A, b.xP, "A-P");
    return v;
}

/// grad_A of delta_V_hat at A = xi e^{i psi}.
inline Vec2 delta_V_hat_grad(const SystemParams& p, const PrimariesSource& src, Vec2 A, double t) {
    PrimaryPositions b = src.positions(p.mu, p.delta, t);
    Vec2 g{0.0, 0.0};
    if (p.mu < 1.0) g = g + (1.0 - p.mu) * inv_dist_increment_grad(A, b.xS, "A-S");
    if (p.mu > 0.0) g = g + p.mu * inv_dist_increment_grad(A, b.xJ, "A-J");
    if (p.delta > 0.0) g = g + p.delta * inv_dist_increment_grad(A, b.xP, "A-P");
    return g;
}

/// McGehee-chart increment Delta V~(x, psi, s) = Delta V^(2/x^2, psi, s/nu),
/// of size O((mu+delta) x^6), with its (x, psi) partial derivatives.
struct DeltaVTilde {
    double value = 0.0;
    double d_x = 0.0;
    double d_psi = 0.0;
};

inline DeltaVTilde delta_V_tilde(const SystemParams& p, const PrimariesSource& src, double x, double psi, double s) {
    if (!(x > 0.0)) throw DomainError("delta_V_tilde: x must be positive");
    double xi = 2.0 / (x * x);
    double t = s / src.nu();
    Vec2 A{xi * std::cos(psi), xi * std::sin(psi)};
    DeltaVTilde out;
    out.value = delta_V_hat(p, src, xi, psi, t);
    Vec2 g = delta_V_hat_grad(p, src, A, t);
    // dA/dx = (-2/x) A,  dA/dpsi = perp(A)
    out.d_x = dot(g, (-2.0 / x) * A);
    out.d_psi = dot(g, perp(A));
    return out;
}

/// Leading coefficient of Psi' = x^6 beta(psi,s) + O((mu+delta) x^8),
/// evaluated from the exact potential derivative at the given x.
inline double beta_coefficient(const SystemParams& p, const PrimariesSource& src, double x, double psi, double s) {
    return delta_V_tilde(p, src, x, psi, s).d_psi / std::pow(x, 6);
}

/// Exact average of the binary potential increment over the relative angle,
/// expressed in the McGehee radial variable.  Multipole series with mean
/// Legendre weights avg P_{2k} = (C(2k,k)/4^k)^2; three terms are below
/// rounding for xi >= ~30.  The far-field system uses this in place of the
/// oscillating increment, making Psi a strict first integral out there.
inline double averaged_far_potential(double mu, double x) {
    double k2 = mu * (1.0 - mu);
    double m3 = std::pow(mu, 3) + std::pow(1.0 - mu, 3);
    double m5 = std::pow(mu, 5) + std::pow(1.0 - mu, 5);
    double x2 = x * x;
    double x6 = x2 * x2 * x2;
    return k2 * x6 / 32.0 + (9.0 / 2048.0) * k2 * m3 * x6 * x2 * x2 + (25.0 / 32768.0) * k2 * m5 * x6 * x6 * x2;
}

inline double averaged_far_potential_deriv(double mu, double x) {
    double k2 = mu * (1.0 - mu);
    double m3 = std::pow(mu, 3) + std::pow(1.0 - mu, 3);
    double m5 = std::pow(mu, 5) + std::pow(1.0 - mu, 5);
    double x2 = x * x;
    double x5 = x2 * x2 * x;
    return (3.0 / 16.0) * k2 * x5 + (45.0 / 1024.0) * k2 * m3 * x5 * x2 * x2 +
           (175.0 / 16384.0) * k2 * m5 * x5 * x2 * x2 * x2 * x2;
}

// ---------------------------------------------------------------------------
// 3BP-side remainder sub-terms (the rescaling remainders).
// ---------------------------------------------------------------------------

/// f~^delta(r~, q2, v2): kinetic remainder of the first rescaling.
inline double tilde_f_delta(const SystemParams& p, double rt, Vec2 q2, Vec2 v2) {
    double sd = std::sqrt(p.delta), a = p.alpha();
    double w = cross(q2, v2);
    double D = 1.0 + sd * rt;
    double N = p.delta * w * w + (2.0 * sd * rt + p.delta * rt * rt) * (2.0 * a * w - a * a * rt * rt);
    return N / (2.0 * a * D * D);
}

/// g~^delta(r~, q2): potential remainder of the first rescaling.
inline double tilde_g_delta(const SystemParams& p, double rt, Vec2 q2) {
    double sd = std::sqrt(p.delta);
    double scale = 1.0 + sd * rt;
    auto term = [&](double b) {
        // 1/|q2 + b e1| - 1/|q2 + b' e1| with b' = b*scale, cancellation-free:
        // d'^2 - d^2 = 2 q2x (b'-b) + b'^2 - b^2.
        double bp = b * scale;
        Vec2 db{q2[0] + b, q2[1]}, dbp{q2[0] + bp, q2[1]};
        double d = norm(db), dp = norm(dbp);
        if (d < kCollisionFloor || dp < kCollisionFloor) throw CollisionError("tilde_g: separation below floor");
        double num = 2.0 * q2[0] * (bp - b) + (bp - b) * (bp + b);
        return num / (d * dp * (d + dp));
    };
    return (1.0 - p.mu) * term(p.mu) + p.mu * term(-(1.0 - p.mu));
}

/// Delta H~_res = (delta/2)|v2|^2 + f~ + g~.
inline double delta_H_tilde(const SystemParams& p, double rt, Vec2 q2, Vec2 v2) {
    return 0.5 * p.delta * dot(v2, v2) + tilde_f_delta(p, rt, q2, v2) + tilde_g_delta(p, rt, q2);
}

/// f^delta(r^, G) of the comet-polar chart (u = sqrt(delta/eps)).
inline double comet_f(const SystemParams& p, double rh, double G) {
    double u = p.u(), a = p.alpha();
    double u2 = u * u;
    double D = 1.0 + u * rh;
    double N = u2 * G * G + (2.0 * u * rh + u2 * rh * rh) * (2.0 * a * G - a * a * rh * rh);
    return N / (2.0 * a * D * D);
}

struct CometFGrad {
    double value, d_rh, d_G;
};

inline CometFGrad comet_f_grad(const SystemParams& p, double rh, double G) {
    double u = p.u(), a = p.alpha();
    double u2 = u * u;
    double D = 1.0 + u * rh;
    double B = 2.0 * a * G - a * a * rh * rh;
    double S = 2.0 * u * rh + u2 * rh * rh;
    double N = u2 * G * G + S * B;
    CometFGrad out;
    out.value = N / (2.0 * a * D * D);
    double dN_rh = (2.0 * u + 2.0 * u2 * rh) * B + S * (-2.0 * a * a * rh);
    out.d_rh = (D * dN_rh - 2.0 * u * N) / (2.0 * a * D * D * D);
    out.d_G = (2.0 * u2 * G + 2.0 * a * S) / (2.0 * a * D * D);
    return out;
}

/// g^delta(r^, rho, phi), exact (not the leading-order expansion).
struct CometGGrad {
    double value, d_rh, d_rho, d_phi;
};

inline CometGGrad comet_g_grad(const SystemParams& p, double rh, double rho, double phi) {
    double u = p.u(), e2 = p.epsilon * p.epsilon, e3 = e2 * p.epsilon;
    double cphi = std::cos(phi), sphi = std::sin(phi);
    CometGGrad out{0.0, 0.0, 0.0, 0.0};
    if (u == 0.0) return out;  // vanishes identically at delta = 0
    // bodies at -b e1 with b and its r^-shifted version b' = b (1 + u r^)
    struct Body {
        double mass, b, db_drh;
    };
    double scale = 1.0 + u * rh;
    Body bodies[2] = {{1.0 - p.mu, p.mu * e2, p.mu * e2 * u}, {p.mu, -(1.0 - p.mu) * e2, -(1.0 - p.mu) * e2 * u}};
    for (const Body& bd : bodies) {
        double b = bd.b, bp = bd.b * scale;
        auto dist = [&](double bb) {
            double d2 = rho * rho + 2.0 * rho * bb * cphi + bb * bb;
            if (d2 < kCollisionFloor * kCollisionFloor) throw CollisionError("comet_g: separation below floor");
            return std::sqrt(d2);
        };
        double d = dist(b), dp = dist(bp);
        // 1/d - 1/dp stably: d'^2 - d^2 = 2 rho (bp-b) cphi + bp^2 - b^2
        double num = 2.0 * rho * (bp - b) * cphi + (bp - b) * (bp + b);
        out.value += bd.mass * e3 * num / (d * dp * (d + dp));
        double dp3 = dp * dp * dp, d3 = d * d * d;
        out.d_rh += bd.mass * e3 * (rho * cphi + bp) / dp3 * bd.db_drh;
        out.d_rho += bd.mass * e3 * (-(rho + b * cphi) / d3 + (rho + bp * cphi) / dp3);
        out.d_phi += bd.mass * e3 * (rho * b * sphi / d3 - rho * bp * sphi / dp3);
    }
    return out;
}

inline double comet_g(const SystemParams& p, double rh, double rho, double phi) {
    return comet_g_grad(p, rh, rho, phi).value;
}

/// Exact multipole remainder of the comet potential:
///   -eps^3 [ (1-mu)/|q2^ + mu eps^2 e1| + mu/|q2^ - (1-mu) eps^2 e1| ] + eps^3/rho,
/// of size O(mu(1-mu) eps^7 / rho^3).
inline double comet_multipole_remainder(const SystemParams& p, double rho, double phi) {
    double e2 = p.epsilon * p.epsilon, e3 = e2 * p.epsilon;
    Vec2 A{rho * std::cos(phi), rho * std::sin(phi)};
    Vec2 cS{-p.mu * e2, 0.0}, cJ{(1.0 - p.mu) * e2, 0.0};
    return -e3 * ((1.0 - p.mu) * inv_dist_increment(A, cS, "S") + p.mu * inv_dist_increment(A, cJ, "J"));
}

/// Delta H_res of the comet-polar chart.
inline double delta_H_res_comet(const SystemParams& p, double rh, double rho, double phi, double Ups, double G) {
    double e3 = std::pow(p.epsilon, 3);
    return comet_f(p, rh, G) + comet_g(p, rh, rho, phi) +
           0.5 * p.delta * e3 * (Ups * Ups + G * G / (rho * rho));
}

// ---------------------------------------------------------------------------
// Comet-polar Hamiltonian H_res^{delta,eps} with analytic gradients.  The
// potential is evaluated exactly (primaries offset by eps^2), so the value
// agrees with eps * H~_res under the rescaling chain to rounding error.
// ---------------------------------------------------------------------------

struct CometGrad {
    double H = 0.0;
    double d_rh = 0.0, d_Rh = 0.0, d_rho = 0.0, d_Ups = 0.0, d_phi = 0.0, d_G = 0.0;
};

/// Truncated system H^0_res = -G + eps^3 [ (Ups^2 + G^2/rho^2)/2 - 1/rho ] + rotator.
inline CometGrad comet_truncated_grad(const SystemParams& p, double rh, double Rh, double rho, double Ups,
                                      double /*phi*/, double G) {
    double a = p.alpha(), e3 = std::pow(p.epsilon, 3);
    if (!(a > 0.0)) throw DomainError("comet systems require mu > 0 (the rotator degenerates at alpha = 0)");
    if (!(rho > 0.0)) throw DomainError("comet chart: rho must be positive");
    CometGrad g;
    double ir2 = 1.0 / (rho * rho);
    g.H = -G + e3 * (0.5 * (Ups * Ups + G * G * ir2) - 1.0 / rho) + 0.5 * (Rh * Rh / a + a * rh * rh);
    g.d_rh = a * rh;
    g.d_Rh = Rh / a;
    g.d_rho = e3 * (-G * G / (rho * rho * rho) + ir2);
    g.d_Ups = e3 * Ups;
    g.d_phi = 0.0;
    g.d_G = -1.0 + e3 * G * ir2;
    return g;
}

/// Full system on the comet-polar chart.
inline CometGrad comet_full_grad(const SystemParams& p, double rh, double Rh, double rho, double Ups, double phi,
                                 double G) {
    double a = p.alpha(), e2 = p.epsilon * p.epsilon, e3 = e2 * p.epsilon;
    if (!(a > 0.0)) throw DomainError("comet systems require mu > 0 (the rotator degenerates at alpha = 0)");
    if (!(rho > 0.0)) throw DomainError("comet chart: rho must be positive");
    double cphi = std::cos(phi), sphi = std::sin(phi);
    CometGrad g;
    double ir2 = 1.0 / (rho * rho), ir3 = ir2 / rho;
    double kin = 1.0 + p.delta;  // (1+delta) eps^3/2 (Ups^2 + G^2/rho^2) collects the delta eps^3 remainder
    g.H = -G + 0.5 * kin * e3 * (Ups * Ups + G * G * ir2) + 0.5 * (Rh * Rh / a + a * rh * rh);
    g.d_rh = a * rh;
    g.d_Rh = Rh / a;
    g.d_rho = -kin * e3 * G * G * ir3;
    g.d_Ups = kin * e3 * Ups;
    g.d_phi = 0.0;
    g.d_G = -1.0 + kin * e3 * G * ir2;
    // exact potential at the unshifted binary (r = 1): -eps^3 [(1-mu)/dS + mu/dJ]
    double bS = p.mu * e2, bJ = -(1.0 - p.mu) * e2;
    auto dist = [&](double b, double& d, double& d_rho_, double& d_phi_) {
        double d2 = rho * rho + 2.0 * rho * b * cphi + b * b;
        if (d2 < kCollisionFloor * kCollisionFloor) throw CollisionError("comet potential: separation below floor");
        d = std::sqrt(d2);
        d_rho_ = (rho + b * cphi) / d;
        d_phi_ = -rho * b * sphi / d;
    };
    double dS, dS_rho, dS_phi, dJ, dJ_rho, dJ_phi;
    dist(bS, dS, dS_rho, dS_phi);
    dist(bJ, dJ, dJ_rho, dJ_phi);
    g.H += -e3 * ((1.0 - p.mu) / dS + p.mu / dJ);
    g.d_rho += e3 * ((1.0 - p.mu) * dS_rho / (dS * dS) + p.mu * dJ_rho / (dJ * dJ));
    g.d_phi += e3 * ((1.0 - p.mu) * dS_phi / (dS * dS) + p.mu * dJ_phi / (dJ * dJ));
    // rescaling remainders
    CometFGrad f = comet_f_grad(p, rh, G);
    CometGGrad gg = comet_g_grad(p, rh, rho, phi);
    g.H += f.value + gg.value;
    g.d_rh += f.d_rh + gg.d_rh;
    g.d_G += f.d_G;
    g.d_rho += gg.d_rho;
    g.d_phi += gg.d_phi;
    return g;
}

inline CometGrad comet_grad(const SystemParams& p, const ChartState& st, bool truncated) {
    require_chart(st, Chart::CometPolar, "comet_grad");
    return truncated ? comet_truncated_grad(p, st[0], st[1], st[2], st[3], st[4], st[5])
                     : comet_full_grad(p, st[0], st[1], st[2], st[3], st[4], st[5]);
}

/// theta-rate of the rotating frame expressed along the comet chart,
/// dtheta/dt = (1 - delta G/(alpha eps)) / (1 + u r^)^2.
inline double theta_rate_comet(const SystemParams& p, double rh, double G) {
    double den = 1.0 + p.u() * rh;
    return (1.0 - p.delta * G / (p.alpha() * p.epsilon)) / (den * den);
}

// ---------------------------------------------------------------------------
// eval_hamiltonian
// ---------------------------------------------------------------------------

enum class HamTag {
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
};

inline const char* ham_name(HamTag t) {
    switch (t) {
        case HamTag::Cartesian3BP: return "Cartesian3BP";
        case HamTag::Jacobi3BP: return "Jacobi3BP";
        case HamTag::JacobiPolar3BP: return "JacobiPolar3BP";
        case HamTag::RotatingPolar3BP: return "RotatingPolar3BP";
        case HamTag::RescaledTilde3BP: return "RescaledTilde3BP";
        case HamTag::RescaledHat3BP: return "RescaledHat3BP";
        case HamTag::CometPolarFull: return "CometPolarFull";
        case HamTag::CometPolarTruncated: return "CometPolarTruncated";
        case HamTag::AsteroidCartesian: return "AsteroidCartesian";
        case HamTag::AsteroidPolar: return "AsteroidPolar";
        case HamTag::AsteroidMcGehee: return "AsteroidMcGehee";
    }
    return "?";
}

inline Chart ham_chart(HamTag t) {
    switch (t) {
        case HamTag::Cartesian3BP: return Chart::CartesianSixBody;
        case HamTag::Jacobi3BP: return Chart::Jacobi;
        case HamTag::JacobiPolar3BP: return Chart::JacobiPolar;
        case HamTag::RotatingPolar3BP: return Chart::RotatingPolar;
        case HamTag::RescaledTilde3BP: return Chart::RescaledTilde;
        case HamTag::RescaledHat3BP: return Chart::RescaledHat;
        case HamTag::CometPolarFull: return Chart::CometPolar;
        case HamTag::CometPolarTruncated: return Chart::CometPolar;
        case HamTag::AsteroidCartesian: return Chart::AsteroidCartesian;
        case HamTag::AsteroidPolar: return Chart::AsteroidPolar;
        case HamTag::AsteroidMcGehee: return Chart::AsteroidMcGehee;
    }
    return Chart::AsteroidMcGehee;
}

inline double eval_rescaled_tilde(const SystemParams& p, double rt, double Rt, Vec2 q2, Vec2 v2) {
    double a = p.alpha();
    double kep = 0.5 * dot(v2, v2) - cross(q2, v2) - (1.0 - p.mu) / guarded_dist(q2, Vec2{-p.mu, 0.0}, "q2-S") -
                 p.mu / guarded_dist(q2, Vec2{1.0 - p.mu, 0.0}, "q2-J");
    double rotator = 0.5 * (Rt * Rt / a + a * rt * rt);
    return kep + rotator + delta_H_tilde(p, rt, q2, v2);
}

/// Evaluate the named Hamiltonian at a state in its natural chart.
/// `primaries` is required for the asteroid systems when delta > 0;
/// `I_action` supplies the bookkeeping action of the extended systems.
inline double eval_hamiltonian(const SystemParams& p, const ChartState& st, HamTag tag,
                               const PrimariesSource* primaries = nullptr, double I_action = 0.0) {
    require_chart(st, ham_chart(tag), "eval_hamiltonian");
    double a = p.alpha();
    switch (tag) {
        case HamTag::Cartesian3BP: {
            if (p.delta <= 0.0) throw DomainError("Cartesian3BP requires delta > 0");
            Vec2 xS{st[0], st[1]}, xJ{st[2], st[3]}, xP{st[4], st[5]};
            Vec2 yS{st[6], st[7]}, yJ{st[8], st[9]}, yP{st[10], st[11]};
            double K = dot(yS, yS) / (2.0 * (1.0 - p.mu)) + dot(yJ, yJ) / (2.0 * p.mu) + dot(yP, yP) / (2.0 * p.delta);
            double V = p.delta * (1.0 - p.mu) / guarded_dist(xP, xS, "P-S") +
                       p.delta * p.mu / guarded_dist(xP, xJ, "P-J") + a / guarded_dist(xS, xJ, "S-J");
            return K - V;
        }
        case HamTag::Jacobi3BP: {
            if (p.delta <= 0.0) throw DomainError("Jacobi3BP requires delta > 0");
            Vec2 Q1{st[2], st[3]}, Q2{st[4], st[5]}, P0{st[6], st[7]}, P1{st[8], st[9]}, P2{st[10], st[11]};
            Vec2 yS = P0 - P1 - (1.0 - p.mu) * P2;
            Vec2 yJ = P1 - p.mu * P2;
            double K = dot(yS, yS) / (2.0 * (1.0 - p.mu)) + dot(yJ, yJ) / (2.0 * p.mu) + dot(P2, P2) / (2.0 * p.delta);
            double V = p.delta * (1.0 - p.mu) / guarded_dist(Q2, (-p.mu) * Q1, "P-S") +
                       p.delta * p.mu / guarded_dist(Q2, (1.0 - p.mu) * Q1, "P-J") + a / std::max(norm(Q1), kCollisionFloor);
            if (norm(Q1) < kCollisionFloor) throw CollisionError("S-J separation below floor");
            return K - V;
        }
        case HamTag::JacobiPolar3BP: {
            if (p.delta <= 0.0) throw DomainError("JacobiPolar3BP requires delta > 0");
            double r = st[0], R = st[1], theta = st[2], Theta = st[3];
            Vec2 Q2{st[4], st[5]}, P2{st[6], st[7]};
            if (!(r > kCollisionFloor)) throw CollisionError("S-J separation below floor");
            Vec2 u_r{std::cos(theta), std::sin(theta)};
            double K = (1.0 + p.delta) / (2.0 * p.delta) * dot(P2, P2) + (R * R + Theta * Theta / (r * r)) / (2.0 * a);
            double V = p.delta * ((1.0 - p.mu) / guarded_dist(Q2, (-p.mu * r) * u_r, "P-S") +
                                  p.mu / guarded_dist(Q2, ((1.0 - p.mu) * r) * u_r, "P-J")) +
                       a / r;
            return K - V;
        }
        case HamTag::RotatingPolar3BP: {
            if (p.delta <= 0.0) throw DomainError("RotatingPolar3BP requires delta > 0");
            double r = st[0], R = st[1], Omega = st[3];
            Vec2 q2{st[4], st[5]}, p2{st[6], st[7]};
            if (!(r > kCollisionFloor)) throw CollisionError("S-J separation below floor");
            double Theta = Omega - cross(q2, p2);
            double K = (1.0 + p.delta) / (2.0 * p.delta) * dot(p2, p2) + (R * R + Theta * Theta / (r * r)) / (2.0 * a);
            double V = p.delta * ((1.0 - p.mu) / guarded_dist(q2, Vec2{-p.mu * r, 0.0}, "P-S") +
                                  p.mu / guarded_dist(q2, Vec2{(1.0 - p.mu) * r, 0.0}, "P-J")) +
                       a / r;
            return K - V;
        }
        case HamTag::RescaledTilde3BP:
            return eval_rescaled_tilde(p, st[0], st[1], Vec2{st[2], st[3]}, Vec2{st[4], st[5]});
        case HamTag::RescaledHat3BP: {
            double se = std::sqrt(p.epsilon), e2 = p.epsilon * p.epsilon;
            Vec2 q2{st[2] / e2, st[3] / e2}, v2{p.epsilon * st[4], p.epsilon * st[5]};
            return p.epsilon * eval_rescaled_tilde(p, st[0] / se, st[1] / se, q2, v2);
        }
        case HamTag::CometPolarFull: return comet_grad(p, st, false).H;
        case HamTag::CometPolarTruncated: return comet_grad(p, st, true).H;
        case HamTag::AsteroidCartesian: {
            std::optional<CircularPrimaries> circ;
            if (!primaries) circ.emplace(p);
            const PrimariesSource& src = primaries ? *primaries : *circ;
            Vec2 xA{st[0], st[1]}, yA{st[2], st[3]};
            double t = st[4] / src.nu();
            return 0.5 * dot(yA, yA) - asteroid_potential(p, src, xA, t) + src.nu() * I_action;
        }
        case HamTag::AsteroidPolar: {
            std::optional<CircularPrimaries> circ;
            if (!primaries) circ.emplace(p);
            const PrimariesSource& src = primaries ? *primaries : *circ;
            double xi = st[0], Xi = st[1], psi = st[2], Psi = st[3], t = st[4] / src.nu();
            if (!(xi > 0.0)) throw DomainError("AsteroidPolar: xi must be positive");
            return src.nu() * I_action + 0.5 * (Xi * Xi + Psi * Psi / (xi * xi)) - (1.0 + p.delta) / xi -
                   delta_V_hat(p, src, xi, psi, t);
        }
        case HamTag::AsteroidMcGehee: {
            std::optional<CircularPrimaries> circ;
            if (!primaries) circ.emplace(p);
            const PrimariesSource& src = primaries ? *primaries : *circ;
            double x = st[0], Xi = st[1], psi = st[2], Psi = st[3], s = st[4];
            if (!(x > 0.0)) throw DomainError("AsteroidMcGehee: x must be positive");
            double x2 = x * x;
            return src.nu() * I_action + 0.5 * (Xi * Xi + 0.25 * Psi * Psi * x2 * x2) - 0.5 * (1.0 + p.delta) * x2 -
                   delta_V_tilde(p, src, x, psi, s).value;
        }
    }
    throw std::logic_error("eval_hamiltonian: unhandled tag");
}

/// Kepler energy of the asteroid in McGehee variables (first integral at mu = delta = 0).
inline double kepler_energy_mcgehee(const ChartState& st) {
    require_chart(st, Chart::AsteroidMcGehee, "kepler_energy_mcgehee");
    double x = st[0], Xi = st[1], Psi = st[3];
    double x2 = x * x;
    return 0.5 * (Xi * Xi + 0.25 * Psi * Psi * x2 * x2) - 0.5 * x2;
}

/// Jacobi constant of the delta = 0 system (RPC3BP) in McGehee variables.
inline double jacobi_constant_mcgehee(const SystemParams& p, const ChartState& st) {
    require_chart(st, Chart::AsteroidMcGehee, "jacobi_constant_mcgehee");
    double x = st[0], Xi = st[1], psi = st[2], Psi = st[3], s = st[4];
    double xi = 2.0 / (x * x);
    double chi = psi - p.q * s;
    Vec2 A{xi * std::cos(chi), xi * std::sin(chi)};
    double V = (1.0 - p.mu) / guarded_dist(A, Vec2{-p.mu, 0.0}, "A-S") +
               p.mu / guarded_dist(A, Vec2{1.0 - p.mu, 0.0}, "A-J");
    double x2 = x * x;
    return 0.5 * (Xi * Xi + 0.25 * Psi * Psi * x2 * x2) - Psi - V;
}

}  // namespace rp4bp
