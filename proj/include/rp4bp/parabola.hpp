#pragma once

#include "chart.hpp"
#include "params.hpp"

namespace rp4bp {

/// A point of the two-parameter family of parabolic homoclinic orbits of the
/// mu = delta = 0 McGehee system.  psi0 labels the perihelion angle; the
/// asymptotic angles are psi0 -+ pi as tau -> -+infinity.
struct ParabolaPoint {
    double tau = 0.0;
    double psi0 = 0.0, Psi0 = 1.0, s0 = 0.0;
    ChartState state;  // AsteroidMcGehee (x, Xi, psi, Psi, s)
    double t = 0.0;    // physical time, t = (Psi0^3/2)(tau + tau^3/3)
};

inline double parabola_time(double Psi0, double tau) {
    return 0.5 * Psi0 * Psi0 * Psi0 * tau * (1.0 + tau * tau / 3.0);
}

/// Inverse of the monotone cubic t(tau).  Closed form: with T = t/Psi0^3 and
/// A = 3T + sqrt(9T^2+1),  tau = A^{1/3} - A^{-1/3}  satisfies
/// tau^3 + 3 tau = A - 1/A = 6T exactly; one Newton step polishes rounding.
inline double tau_of_t(double Psi0, double t) {
    if (!(Psi0 > 0.0)) throw DomainError("tau_of_t: Psi0 must be positive");
    double T = t / (Psi0 * Psi0 * Psi0);
    double A = 3.0 * std::abs(T) + std::sqrt(9.0 * T * T + 1.0);
    double c = std::cbrt(A);
    double tau = c - 1.0 / c;
    if (T < 0.0) tau = -tau;
    // one Newton step on f(tau) = tau + tau^3/3 - 2T
    double f = tau + tau * tau * tau / 3.0 - 2.0 * T;
    double fp = 1.0 + tau * tau;
    tau -= f / fp;
    return tau;
}

/// Closed-form parabola point at parameter tau.
inline ParabolaPoint parabola_at_tau(double psi0, double Psi0, double s0, double tau, int q) {
    if (!(Psi0 > 0.0)) throw DomainError("parabola: Psi0 must be positive");
    ParabolaPoint pt;
    pt.tau = tau;
    pt.psi0 = psi0;
    pt.Psi0 = Psi0;
    pt.s0 = s0;
    pt.t = parabola_time(Psi0, tau);
    double den = 1.0 + tau * tau;
    double x = 2.0 / (Psi0 * std::sqrt(den));
    double Xi = 2.0 * tau / (Psi0 * den);
    double psi = psi0 + 2.0 * std::atan(tau);
    double s = s0 + pt.t / q;
    pt.state = ChartState(Chart::AsteroidMcGehee, {x, Xi, psi, Psi0, s});
    return pt;
}

/// Same family parametrized by physical time.
inline ParabolaPoint parabola_at_time(double psi0, double Psi0, double s0, double t, int q) {
    return parabola_at_tau(psi0, Psi0, s0, tau_of_t(Psi0, t), q);
}

/// tau at which the parabola reaches a given x (x <= 2/Psi0); sign picks the
/// branch (negative: incoming, positive: outgoing).
inline double parabola_tau_at_x(double Psi0, double x, int sign) {
    if (!(x > 0.0 && x <= 2.0 / Psi0 + 1e-15)) throw DomainError("parabola_tau_at_x: x outside range");
    double v = 4.0 / (Psi0 * Psi0 * x * x) - 1.0;
    double tau = std::sqrt(std::max(0.0, v));
    return sign >= 0 ? tau : -tau;
}

}  // namespace rp4bp
