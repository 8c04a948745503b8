#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "orbit_record.hpp"
#include "parabola.hpp"
#include "util.hpp"

namespace rp4bp {

struct MelnikovConfig {
    double Psi_min = 5.0;   // validity floor of the decay estimates (configurable)
    double Psi_hard = 1.8;  // below this the phase loses monotonicity
    double tol = 1e-10;     // absolute accuracy target of the sigma-integral
    double degenerate_scale = 1e-8;  // second-derivative floor for critical points
    int fourier_n = 64;              // samples for the sigma-Fourier analysis
    double fd_Psi = 5e-3;            // relative step of the Psi-derivatives
};

/// One evaluation of the Poincare function, with its error budget.
struct MelnikovEvaluation {
    double psi0 = 0.0, Psi0 = 0.0, s0 = 0.0, sigma = 0.0;
    double value = 0.0;
    double quadrature_error = 0.0;  // summed Gauss-Kronrod discrepancies
    double tail_bound = 0.0;        // analytic bound on everything truncated
};

namespace detail {

/// Rotating-frame potential increment of the RPC3BP (delta = 0 fast path):
/// W(xi, chi) = (1-mu)/|A + mu e1| + mu/|A - (1-mu) e1| - 1/xi,  A = xi e^{i chi}.
inline double rpc3bp_increment(double mu, double xi, double chi) {
    Vec2 A{xi * std::cos(chi), xi * std::sin(chi)};
    double v = 0.0;
    if (mu < 1.0) v += (1.0 - mu) * inv_dist_increment(A, Vec2{-mu, 0.0}, "A-S");
    if (mu > 0.0) v += mu * inv_dist_increment(A, Vec2{1.0 - mu, 0.0}, "A-J");
    return v;
}

inline double kappa_n(double mu, int n) {
    return (1.0 - mu) * std::pow(-mu, n) + mu * std::pow(1.0 - mu, n);
}

/// Mean of the binary increment over chi (multipole, exact to rounding for
/// xi >~ 30): kappa_2/(4 xi^3) + 9 kappa_4/(64 xi^5) + 25 kappa_6/(256 xi^7).
inline double c0_average(double mu, double xi) {
    double i3 = 1.0 / (xi * xi * xi);
    return kappa_n(mu, 2) * 0.25 * i3 + kappa_n(mu, 4) * (9.0 / 64.0) * i3 / (xi * xi) +
           kappa_n(mu, 6) * (25.0 / 256.0) * i3 / (xi * xi * xi * xi);
}

/// Leading cosine coefficients c_m(xi) of the increment, m = 1..4.
inline std::array<double, 4> c_m_leading(double mu, double xi) {
    double i3 = 1.0 / (xi * xi * xi), i4 = i3 / xi, i5 = i4 / xi;
    double k2 = kappa_n(mu, 2), k3 = kappa_n(mu, 3), k4 = kappa_n(mu, 4);
    return {(3.0 / 8.0) * k3 * i4, 0.75 * k2 * i3 + (5.0 / 16.0) * k4 * i5, (5.0 / 8.0) * k3 * i4,
            (35.0 / 64.0) * k4 * i5};
}

struct Phase {
    double Psi0;
    double g(double tau) const { return 2.0 * std::atan(tau) - parabola_time(Psi0, tau); }
    double gp(double tau) const {
        return 2.0 / (1.0 + tau * tau) - 0.5 * Psi0 * Psi0 * Psi0 * (1.0 + tau * tau);
    }
};

}  // namespace detail

/// The Poincare function L0(psi0, Psi0, s0, sigma): the potential increment
/// integrated along the time-shifted parabola.  Composite Gauss-Kronrod
/// panels resolve the rotating phase out to tau_osc; beyond that the
/// chi-averaged part is integrated smoothly to infinity and the truncated
/// oscillatory remainder is replaced by its analytic boundary terms, whose
/// residue goes into tail_bound.
inline MelnikovEvaluation melnikov_L0(const SystemParams& p, double psi0, double Psi0, double s0, double sigma,
                                      const MelnikovConfig& cfg = {}, const PrimariesSource* primaries = nullptr) {
    if (!(Psi0 >= cfg.Psi_hard))
        throw DomainError("melnikov_L0: Psi0 below the hard floor (phase not monotone)");
    if (Psi0 < cfg.Psi_min)
        throw DomainError("melnikov_L0: Psi0 below Psi_min (lower MelnikovConfig::Psi_min to override)");
    MelnikovEvaluation out;
    out.psi0 = psi0;
    out.Psi0 = Psi0;
    out.s0 = s0;
    out.sigma = sigma;

    const bool use_source = (p.delta > 0.0) || (primaries != nullptr);
    std::optional<CircularPrimaries> circ;
    const PrimariesSource* src = primaries;
    if (use_source && !src) {
        circ.emplace(p);
        src = &*circ;
    }
    const double nu = use_source ? src->nu() : 1.0 / p.q;
    detail::Phase ph{Psi0};
    const double P3 = Psi0 * Psi0 * Psi0;
    const double k2 = detail::kappa_n(p.mu, 2);

    // truncation of the oscillation-resolving zone: the boundary terms of the
    // truncated oscillatory part are added analytically, so T only needs the
    // second-order remainder ~ 2400 k2/(Psi^9 T^9) below tol/4
    double T = 3.0;
    {
        double target = std::pow(9600.0 * std::max(k2, 1e-8) / (std::pow(Psi0, 9) * cfg.tol), 1.0 / 9.0);
        T = std::max(T, target);
    }

    // integrand along the shifted parabola, physical composition of arguments
    auto increment_at = [&](double tau, int side) {
        // side = +1: tau >= 0 leg; side = -1: the mirrored leg (delta = 0 fold)
        double tt = side * tau;
        double den = 1.0 + tt * tt;
        double xi = 0.5 * Psi0 * Psi0 * den;
        double psi = psi0 + 2.0 * std::atan(tt);
        double t_par = parabola_time(Psi0, tt);
        if (use_source) {
            double t_arg = s0 / nu + t_par - sigma;
            return delta_V_hat(p, *src, xi, psi, t_arg);
        }
        double chi = psi - (p.q * s0 + (t_par - sigma));
        return detail::rpc3bp_increment(p.mu, xi, chi);
    };
    auto dt_dtau = [&](double tau) { return 0.5 * P3 * (1.0 + tau * tau); };

    using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
    double value = 0.0, qerr = 0.0;
    double tau = 0.0;
    while (tau < T) {
        double width = kPi / (2.0 * std::max(std::abs(ph.gp(tau)), 1.0));
        double tb = std::min(tau + width, T);
        double err = 0.0;
        auto f = [&](double tt) { return (increment_at(tt, +1) + increment_at(tt, -1)) * dt_dtau(tt); };
        value += GK::integrate(f, tau, tb, 0, 0.0, &err);
        qerr += std::abs(err);
        tau = tb;
    }

    // smooth chi-averaged far part, compactified to infinity by v = 1/tau
    {
        double err = 0.0;
        auto favg = [&](double v) {
            double tt = 1.0 / v;
            double xi = 0.5 * Psi0 * Psi0 * (1.0 + tt * tt);
            double c0 = detail::c0_average(p.mu, xi);
            if (use_source && p.delta > 0.0) {
                // planet: chi-averaged quadrupole of a ring of radius |x_P|
                PrimaryPositions b = src->positions(p.mu, p.delta, 0.0);
                double rP2 = dot(b.xP, b.xP);
                c0 += p.delta * rP2 / (4.0 * xi * xi * xi);
            }
            return 2.0 * c0 * dt_dtau(tt) / (v * v);
        };
        value += GK::integrate(favg, 1e-12, 1.0 / T, 12, 1e-14, &err);
        qerr += std::abs(err);
    }

    // analytic boundary terms of the truncated oscillatory part (m = 1..4)
    {
        double w = psi0 - p.q * s0 + sigma;  // the residual-phase combination
        double xiT = 0.5 * Psi0 * Psi0 * (1.0 + T * T);
        auto cm = detail::c_m_leading(p.mu, xiT);
        double F = dt_dtau(T), gT = ph.g(T), gpT = ph.gp(T);
        double rem = 0.0;
        for (int m = 1; m <= 4; ++m) {
            double coef = 2.0 * F * cm[m - 1] / (m * gpT);  // g' is signed; the algebra carries it
            value += -coef * std::cos(m * w) * std::sin(m * gT);
            // second integration-by-parts remainder + multipole truncation of c_m
            rem += std::abs(coef) * (17.0 / (m * T * std::abs(gpT)) + 3.0 / xiT);
        }
        out.tail_bound = rem * (1.0 + 10.0 * p.u());
        if (use_source && p.delta > 0.0) {
            PrimaryPositions b = src->positions(p.mu, p.delta, 0.0);
            double rP = norm(b.xP);
            // dipole of the planet is not averaged away pointwise; bound its
            // oscillatory far contribution
            out.tail_bound += 8.0 * p.delta * rP / (std::pow(Psi0, 7) * std::pow(T, 6)) +
                              p.delta * rP * rP * rP * rP / (std::pow(xiT, 5));
        }
    }

    out.value = value;
    out.quadrature_error = qerr;
    if (out.tail_bound > 100.0 * cfg.tol)
        throw NumericalError("melnikov_L0: tail bound failure (Psi0 too small for the requested tolerance)");
    return out;
}

/// Critical points of sigma -> L0.  The function is an even cosine series in
/// w = psi0 - q s0 + sigma, so w = 0 and w = pi are always critical; whether
/// they are numerically nondegenerate depends on the first harmonic, which is
/// exponentially small in Psi0^3 and resolvable only at small Psi0.
struct CriticalPoints {
    double sigma_minus = 0.0, sigma_plus = 0.0;
    double second_minus = 0.0, second_plus = 0.0;  // d^2 L0 / d sigma^2
    bool degenerate = false;                       // below the resolution floor
    double evenness_residual = 0.0;                // max |sine coefficient|
    double harmonic_amplitude = 0.0;               // max_k k^2 |a_k|
};

inline CriticalPoints melnikov_critical_points(const SystemParams& p, double psi0, double Psi0, double s0,
                                               const MelnikovConfig& cfg = {},
                                               const PrimariesSource* primaries = nullptr) {
    int N = cfg.fourier_n;
    std::vector<double> vals(N);
    parallel_for(N, [&](std::size_t j) {
        double sigma = kTwoPi * j / N - (psi0 - p.q * s0);  // w_j = 2 pi j / N
        vals[j] = melnikov_L0(p, psi0, Psi0, s0, sigma, cfg, primaries).value;
    });
    int K = std::min(8, N / 2 - 1);
    std::vector<double> a(K + 1, 0.0), b(K + 1, 0.0);
    for (int k = 0; k <= K; ++k) {
        for (int j = 0; j < N; ++j) {
            double wj = kTwoPi * j / N;
            a[k] += vals[j] * std::cos(k * wj);
            b[k] += vals[j] * std::sin(k * wj);
        }
        a[k] *= (k == 0 ? 1.0 : 2.0) / N;
        b[k] *= 2.0 / N;
    }
    CriticalPoints out;
    for (int k = 1; k <= K; ++k) {
        out.evenness_residual = std::max(out.evenness_residual, std::abs(b[k]));
        out.harmonic_amplitude = std::max(out.harmonic_amplitude, k * k * std::abs(a[k]));
    }
    auto dL = [&](double w) {
        double v = 0.0;
        for (int k = 1; k <= K; ++k) v += -k * a[k] * std::sin(k * w) + k * b[k] * std::cos(k * w);
        return v;
    };
    auto d2L = [&](double w) {
        double v = 0.0;
        for (int k = 1; k <= K; ++k) v += -k * k * (a[k] * std::cos(k * w) + b[k] * std::sin(k * w));
        return v;
    };
    out.degenerate = out.harmonic_amplitude < cfg.degenerate_scale * std::max(1.0, std::abs(a[0]));
    double w_minus = 0.0, w_plus = kPi;
    if (!out.degenerate) {
        // dense scan + Newton polish of the derivative of the interpolant
        auto polish = [&](double w) {
            for (int it = 0; it < 60; ++it) {
                double f = dL(w), fp = d2L(w);
                if (std::abs(fp) < 1e-300) break;
                double step = f / fp;
                w -= step;
                if (std::abs(step) < 1e-14) break;
            }
            return w;
        };
        double best_minus = 1e300, best_plus = 1e300;
        for (int j = 0; j < 4 * N; ++j) {
            double w0 = kTwoPi * j / (4 * N);
            double w1 = kTwoPi * (j + 1) / (4 * N);
            if (dL(w0) == 0.0 || (dL(w0) < 0.0) != (dL(w1) < 0.0)) {
                double wr = wrap_angle(polish(0.5 * (w0 + w1)));
                double dm = std::abs(wrap_pm(wr - 0.0)), dp = std::abs(wrap_pm(wr - kPi));
                if (dm < best_minus) {
                    best_minus = dm;
                    w_minus = wr;
                }
                if (dp < best_plus) {
                    best_plus = dp;
                    w_plus = wr;
                }
            }
        }
    }
    out.sigma_minus = wrap_angle(w_minus + (p.q * s0 - psi0));
    out.sigma_plus = wrap_angle(w_plus + (p.q * s0 - psi0));
    out.second_minus = d2L(w_minus);
    out.second_plus = d2L(w_plus);
    return out;
}

/// First-order scattering-map model on a Psi grid: the angle shift
/// f(Psi) = d/dPsi of the reduced generating function L0 at the critical
/// phase (w = 0 for the minus channel, w = pi for the plus channel).
struct ScatteringMapModel {
    Branch branch = Branch::Minus;  // channel label (sigma*-)
    SystemParams params;
    std::vector<double> Psi_grid;
    std::vector<double> f_numeric;
    std::vector<double> f_asymptotic;  // -3 pi mu(1-mu)/(2 Psi^4)
    std::vector<double> twist;         // d f / d Psi
    std::vector<double> f_error;       // propagated quadrature error

    double f_at(double Psi) const {
        // cubic Hermite interpolation with the twist as derivative data
        if (Psi_grid.size() < 2) throw DomainError("scattering model: grid too small");
        if (Psi < Psi_grid.front() - 1e-12 || Psi > Psi_grid.back() + 1e-12)
            throw DomainError("scattering model: Psi outside the model grid");
        std::size_t i = 0;
        while (i + 2 < Psi_grid.size() && Psi > Psi_grid[i + 1]) ++i;
        double h = Psi_grid[i + 1] - Psi_grid[i];
        double s = std::clamp((Psi - Psi_grid[i]) / h, 0.0, 1.0);
        double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
        double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
        return h00 * f_numeric[i] + h10 * h * twist[i] + h01 * f_numeric[i + 1] + h11 * h * twist[i + 1];
    }
    double twist_at(double Psi) const {
        std::size_t i = 0;
        while (i + 2 < Psi_grid.size() && Psi > Psi_grid[i + 1]) ++i;
        double s = std::clamp((Psi - Psi_grid[i]) / (Psi_grid[i + 1] - Psi_grid[i]), 0.0, 1.0);
        return (1.0 - s) * twist[i] + s * twist[i + 1];
    }
};

inline double scattering_f_asymptotic(double mu, double Psi) {
    return -mu * (1.0 - mu) * 3.0 * kPi / (2.0 * std::pow(Psi, 4));
}

inline ScatteringMapModel scattering_model(const SystemParams& p, const std::vector<double>& Psi_grid, Branch channel,
                                           const MelnikovConfig& cfg = {}, const PrimariesSource* primaries = nullptr) {
    ScatteringMapModel m;
    m.branch = channel;
    m.params = p;
    m.Psi_grid = Psi_grid;
    double w_star = channel == Branch::Minus ? 0.0 : kPi;
    auto L_at = [&](double Psi, double* err) {
        // psi0 = s0 = 0, sigma = w*; the reduction identity keeps this general
        MelnikovEvaluation e = melnikov_L0(p, 0.0, Psi, 0.0, w_star, cfg, primaries);
        if (err) *err = e.quadrature_error + e.tail_bound;
        return e.value;
    };
    std::size_t n = Psi_grid.size();
    m.f_numeric.resize(n);
    m.twist.resize(n);
    m.f_asymptotic.resize(n);
    m.f_error.resize(n);
    for (double Psi : Psi_grid)
        if (Psi < cfg.Psi_min) throw DomainError("scattering_model: grid point below Psi_min");
    parallel_for(n, [&](std::size_t i) {
        double Psi = Psi_grid[i];
        double h = cfg.fd_Psi * Psi;
        double e1, e2, e3, e4;
        double Lm2 = L_at(Psi - 2 * h, &e1), Lm1 = L_at(Psi - h, &e2), Lp1 = L_at(Psi + h, &e3),
               Lp2 = L_at(Psi + 2 * h, &e4);
        double L0v = L_at(Psi, nullptr);
        // five-point first and second derivatives
        m.f_numeric[i] = (Lm2 - 8.0 * Lm1 + 8.0 * Lp1 - Lp2) / (12.0 * h);
        m.twist[i] = (-Lm2 + 16.0 * Lm1 - 30.0 * L0v + 16.0 * Lp1 - Lp2) / (12.0 * h * h);
        m.f_asymptotic[i] = scattering_f_asymptotic(p.mu, Psi);
        m.f_error[i] = (e1 + e2 + e3 + e4) / (12.0 * h);
    });
    return m;
}

}  // namespace rp4bp
