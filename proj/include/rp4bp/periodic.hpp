#pragma once

#include <boost/numeric/odeint.hpp>

#include "integrate.hpp"
#include "orbit_record.hpp"

namespace rp4bp {

struct PeriodicConfig {
    double C_Zstar = 0.5;        // ball radius around Z* on the section
    double fd_step = 1e-6;       // central-difference step for map Jacobians
    int map_steps = 192;         // fixed-step count for Jacobian map evaluations
    double map_tol = 1e-13;      // adaptive tolerance for map images
    double newton_tol = 5e-13;   // fixed-point residual target
    int newton_max = 40;
    double tune_tol = 3e-13;     // |R - target| stopping for epsilon tuning
    int tune_max = 90;
    double bound_floor = 1e-9;   // absolute slack in inequality checks
    double K_period = 1.0;       // |T/(2 pi q) - 1| <= K sqrt(delta/eps)
    // estimate-suite constants, frozen from the sampling oracles (see
    // calibrate_constants); used only in bound checks, never in solves.
    double M1_bound = 40.0;   // |rho-1|, |Ups|, |G-+1| <= M1 (mu eps^4 + sqrt(delta) eps^{-7/2})
    double M3_bound = 40.0;   // |r^|, |R^| <= M3 sqrt(delta) eps^{-7/2}
    double Mphi_bound = 40.0; // ||phidot| - (1 -+ eps^3)| <= Mphi (mu eps^7 + sqrt(delta/eps))
    double aux_dt = 0.25;     // record slow-grid spacing
    double sample_dt_max = 4.0;
};

/// Result of one section-map evaluation on Sigma_0 = {phi = 0}.
struct SectionMapResult {
    std::array<double, 4> image{};     // (r^, R^, rho, Upsilon)
    Eigen::Matrix4d jacobian;          // d image / d z, when requested
    double return_parameter = kTwoPi;  // rectified-flow parameter advance
    double return_time = 0.0;          // physical |Delta t| of the return
    double theta_advance = 0.0;        // integral of thetadot over the return
    double G_start = 0.0;
};

inline const std::array<double, 4> kZstar{0.0, 0.0, 1.0, 0.0};

namespace detail {

/// Right-hand side of the rectified flow d(z, t, Theta)/d phi on the energy
/// level: the graph G = G(z, phi; E) is solved by warm-started Newton inside
/// every evaluation.
struct RectifiedRHS {
    SystemParams p;
    EnergyLevel E;
    bool truncated = false;
    mutable double Gw = 0.0;

    double solve_G(const double* z, double phi) const {
        double G = Gw;
        for (int it = 0; it < 80; ++it) {
            CometGrad g = truncated ? comet_truncated_grad(p, z[0], z[1], z[2], z[3], phi, G)
                                    : comet_full_grad(p, z[0], z[1], z[2], z[3], phi, G);
            double f = g.H - E.value;
            if (std::abs(f) < 1e-14 * (1.0 + std::abs(E.value))) return G;
            if (std::abs(g.d_G) < 1e-6) break;
            G -= f / g.d_G;
        }
        throw ConvergenceError("energy graph solve failed (outside the graph regime?)");
    }

    void operator()(const std::vector<double>& y, std::vector<double>& dy, double phi) const {
        double G = solve_G(y.data(), phi);
        Gw = G;
        CometGrad g = truncated ? comet_truncated_grad(p, y[0], y[1], y[2], y[3], phi, G)
                                : comet_full_grad(p, y[0], y[1], y[2], y[3], phi, G);
        double inv = 1.0 / g.d_G;
        dy.resize(6);
        dy[0] = g.d_Rh * inv;
        dy[1] = -g.d_rh * inv;
        dy[2] = g.d_Ups * inv;
        dy[3] = -g.d_rho * inv;
        dy[4] = inv;                                     // dt/dphi
        dy[5] = theta_rate_comet(p, y[0], G) * inv;      // dtheta/dphi
    }
};

inline std::vector<double> rectified_integrate(const RectifiedRHS& rhs, std::array<double, 4> z, double phi1,
                                               double tol, int fixed_steps) {
    namespace ode = boost::numeric::odeint;
    std::vector<double> y{z[0], z[1], z[2], z[3], 0.0, 0.0};
    if (fixed_steps > 0) {
        ode::runge_kutta_fehlberg78<std::vector<double>> plain;
        double h = phi1 / fixed_steps;
        for (int k = 0; k < fixed_steps; ++k) plain.do_step(rhs, y, k * h, h);
        return y;
    }
    auto stepper = ode::make_controlled(tol, tol, ode::runge_kutta_fehlberg78<std::vector<double>>());
    double phi = 0.0, dphi = std::min(0.05, phi1);
    std::size_t steps = 0;
    while (phi < phi1) {
        if (++steps > 2'000'000) throw NumericalError("rectified flow: max steps exceeded");
        if (dphi > kPi / 8.0) dphi = kPi / 8.0;  // keep the phi-forcing resolved
        if (phi + dphi > phi1) dphi = phi1 - phi;
        int tries = 0;
        while (stepper.try_step(rhs, y, phi, dphi) != ode::success)
            if (++tries > 60) throw NumericalError("rectified flow: step-size underflow");
    }
    return y;
}

}  // namespace detail

/// Solve the energy level for G at a section point (Newton on the graph).
inline double energy_graph_G(const SystemParams& p, const EnergyLevel& E, const std::array<double, 4>& z,
                             double phi = 0.0, bool truncated = false) {
    detail::RectifiedRHS rhs{p, E, truncated, -E.value};
    return rhs.solve_G(z.data(), phi);
}

/// The graph expansion G = -E + rotator + eps^3 [ ... ] + O(eps^6).
inline double energy_graph_expansion(const SystemParams& p, const EnergyLevel& E, const std::array<double, 4>& z) {
    double a = p.alpha(), e3 = std::pow(p.epsilon, 3);
    double rot = 0.5 * (z[1] * z[1] / a + a * z[0] * z[0]);
    double rho = z[2], Ups = z[3];
    double core = 2.0 * rot - 2.0 * E.value;  // R^2/alpha + alpha r^2 - 2E
    return -E.value + rot + e3 * (0.5 * Ups * Ups + core * core / (8.0 * rho * rho) - 1.0 / rho);
}

/// The Poincare map of Sigma_0 as the 2 pi map of the rectified flow.
/// `with_jacobian` adds a centrally differenced Jacobian over fixed-step
/// re-runs (smooth in the initial condition).
inline SectionMapResult rectified_section_map(const SystemParams& p, const std::array<double, 4>& z,
                                              const EnergyLevel& E, bool truncated, const PeriodicConfig& cfg = {},
                                              bool with_jacobian = false) {
    double d2 = 0.0;
    for (int i = 0; i < 4; ++i) d2 += (z[i] - kZstar[i]) * (z[i] - kZstar[i]);
    if (std::sqrt(d2) > cfg.C_Zstar)
        throw DomainError("rectified_section_map: state outside the section ball B(Z*, C_Z*)");
    detail::RectifiedRHS rhs{p, E, truncated, -E.value};
    SectionMapResult out;
    out.G_start = rhs.solve_G(z.data(), 0.0);
    std::vector<double> y = detail::rectified_integrate(rhs, z, kTwoPi, cfg.map_tol, 0);
    out.image = {y[0], y[1], y[2], y[3]};
    out.return_parameter = kTwoPi;
    out.return_time = std::abs(y[4]);
    out.theta_advance = std::abs(y[5]);
    out.jacobian.setZero();
    if (with_jacobian) {
        for (int j = 0; j < 4; ++j) {
            double h = cfg.fd_step * (1.0 + std::abs(z[j]));
            std::array<double, 4> zp = z, zm = z;
            zp[j] += h;
            zm[j] -= h;
            detail::RectifiedRHS rp{p, E, truncated, -E.value};
            detail::RectifiedRHS rm{p, E, truncated, -E.value};
            std::vector<double> yp = detail::rectified_integrate(rp, zp, kTwoPi, cfg.map_tol, cfg.map_steps);
            std::vector<double> ym = detail::rectified_integrate(rm, zm, kTwoPi, cfg.map_tol, cfg.map_steps);
            for (int i = 0; i < 4; ++i) out.jacobian(i, j) = (yp[i] - ym[i]) / (2.0 * h);
        }
    }
    return out;
}

/// Monodromy multipliers of the section map at a point.
inline std::array<std::complex<double>, 4> section_multipliers(const SystemParams& p, const std::array<double, 4>& z,
                                                               const EnergyLevel& E, bool truncated,
                                                               const PeriodicConfig& cfg = {}) {
    SectionMapResult r = rectified_section_map(p, z, E, truncated, cfg, true);
    Eigen::EigenSolver<Eigen::Matrix4d> es(r.jacobian);
    std::array<std::complex<double>, 4> out;
    for (int i = 0; i < 4; ++i) out[i] = es.eigenvalues()(i);
    std::sort(out.begin(), out.end(), [](auto a, auto b) { return std::arg(a) < std::arg(b); });
    return out;
}

struct FixedPointResult {
    std::array<double, 4> point{};
    double residual = 0.0;
    int iterations = 0;
    std::vector<double> residual_history;
    bool bound_warning = false;  // outside the proof's sigma-ball (reported, not fatal)
};

/// Newton with finite-difference Jacobians; replaces the proof's contraction
/// map (same fixed point, quadratic convergence).
inline FixedPointResult find_fixed_point(const SystemParams& p, const EnergyLevel& E,
                                         const std::array<double, 4>& initial, bool truncated,
                                         const PeriodicConfig& cfg = {}) {
    FixedPointResult res;
    std::array<double, 4> z = initial;
    for (int it = 0; it < cfg.newton_max; ++it) {
        SectionMapResult m = rectified_section_map(p, z, E, truncated, cfg, true);
        Eigen::Vector4d F;
        for (int i = 0; i < 4; ++i) F(i) = m.image[i] - z[i];
        double rn = F.cwiseAbs().maxCoeff();
        res.residual_history.push_back(rn);
        res.residual = rn;
        res.iterations = it + 1;
        if (rn < cfg.newton_tol) break;
        Eigen::Matrix4d A = m.jacobian - Eigen::Matrix4d::Identity();
        Eigen::Vector4d dz = A.partialPivLu().solve(-F);
        for (int i = 0; i < 4; ++i) z[i] += dz(i);
    }
    if (res.residual > 1e-10)
        throw ConvergenceError("find_fixed_point: Newton did not reach the residual target (residual " +
                               std::to_string(res.residual) + ")");
    res.point = z;
    // report (not enforce) the proof's ball estimate
    double sigma = 4.0 * cfg.M1_bound *
                   (p.mu * std::pow(p.epsilon, 4) + std::sqrt(p.delta) * std::pow(p.epsilon, -3.5));
    double dist = 0.0;
    for (int i = 0; i < 4; ++i) dist = std::max(dist, std::abs(z[i] - kZstar[i]));
    res.bound_warning = dist > sigma + cfg.bound_floor;
    return res;
}

/// The proof's contraction map F(Z) = (I - DP0(Z*))^{-1} [Q(Z*,Z) + P1(Z*+Z)],
/// iterated as a verification fallback for the Newton solver.
inline FixedPointResult contraction_fixed_point(const SystemParams& p, const EnergyLevel& E,
                                                const PeriodicConfig& cfg = {}, int max_iter = 400) {
    SectionMapResult base = rectified_section_map(p, kZstar, E, true, cfg, true);
    Eigen::Matrix4d A = (Eigen::Matrix4d::Identity() - base.jacobian).inverse();
    Eigen::Vector4d Z = Eigen::Vector4d::Zero();
    FixedPointResult res;
    for (int it = 0; it < max_iter; ++it) {
        std::array<double, 4> zz;
        for (int i = 0; i < 4; ++i) zz[i] = kZstar[i] + Z(i);
        SectionMapResult full = rectified_section_map(p, zz, E, false, cfg, false);
        Eigen::Vector4d rhs;
        for (int i = 0; i < 4; ++i) rhs(i) = full.image[i] - kZstar[i] - base.jacobian(i, 0) * Z(0) -
                                             base.jacobian(i, 1) * Z(1) - base.jacobian(i, 2) * Z(2) -
                                             base.jacobian(i, 3) * Z(3);
        Eigen::Vector4d Zn = A * rhs;
        double step = (Zn - Z).cwiseAbs().maxCoeff();
        Z = Zn;
        res.iterations = it + 1;
        if (step < 1e-13) break;
    }
    for (int i = 0; i < 4; ++i) res.point[i] = kZstar[i] + Z(i);
    SectionMapResult check = rectified_section_map(p, res.point, E, false, cfg, false);
    double rn = 0.0;
    for (int i = 0; i < 4; ++i) rn = std::max(rn, std::abs(check.image[i] - res.point[i]));
    res.residual = rn;
    return res;
}

/// Rotation ratio R = 2 pi / \int thetadot dt over one section return.
inline double rotation_ratio(const SystemParams& p, const std::array<double, 4>& z, const EnergyLevel& E,
                             bool truncated = false, const PeriodicConfig& cfg = {}, double* T_hat = nullptr) {
    SectionMapResult m = rectified_section_map(p, z, E, truncated, cfg, false);
    if (T_hat) *T_hat = m.return_time;
    return kTwoPi / m.theta_advance;
}

/// Integer window [4/(3 eps0^3), 8/(3 eps0^3)] of admissible resonances.
inline std::pair<long, long> admissible_q_window(double eps0) {
    double lo = 4.0 / (3.0 * std::pow(eps0, 3));
    double hi = 8.0 / (3.0 * std::pow(eps0, 3));
    return {static_cast<long>(std::ceil(lo - 1e-9)), static_cast<long>(std::floor(hi + 1e-9))};
}

struct TuneResult {
    double epsilon = 0.0;
    double ratio_residual = 0.0;
    long q = 0;
    double target = 0.0;
    int evaluations = 0;
    bool monotone = true;
    std::array<double, 4> fixed_point{};
};

/// Brackets eps in [9 eps0/16, 15 eps0/16] and root-finds
/// R(delta, eps) = (q -+ 1)/q.  R is sampled for monotonicity first; a sign
/// change is required either way.
inline TuneResult tune_epsilon(const SystemParams& p0, Branch branch, long q, const PeriodicConfig& cfg = {}) {
    TuneResult out;
    out.q = q;
    double sgn = branch_sign(branch);
    out.target = (q - sgn) / static_cast<double>(q);
    double a = 9.0 * p0.epsilon / 16.0, b = 15.0 * p0.epsilon / 16.0;
    std::array<double, 4> warm = kZstar;
    auto gfun = [&](double eps) {
        SystemParams p = p0.with_epsilon(eps);
        require_perturbative(p);
        EnergyLevel E = EnergyLevel::comet(branch, eps);
        FixedPointResult f = find_fixed_point(p, E, warm, false, cfg);
        warm = f.point;
        out.fixed_point = f.point;
        ++out.evaluations;
        return rotation_ratio(p, f.point, E, false, cfg) - out.target;
    };
    // monotonicity probe
    double prev = 0.0;
    bool first = true;
    int dir_changes = 0;
    double prev_eps = a;
    for (int k = 0; k <= 4; ++k) {
        double eps = a + (b - a) * k / 4.0;
        double g = gfun(eps);
        if (!first && (g - prev) * (branch == Branch::Plus ? 1.0 : -1.0) > 0.0) ++dir_changes;
        prev = g;
        first = false;
        prev_eps = eps;
    }
    (void)prev_eps;
    out.monotone = dir_changes == 0;
    double ga = gfun(a), gb = gfun(b);
    if (ga * gb > 0.0)
        throw DomainError("tune_epsilon: target rotation ratio not bracketed on [9 eps0/16, 15 eps0/16]");
    // bisection with secant acceleration
    double lo = a, hi = b, glo = ga, ghi = gb;
    double best_eps = std::abs(glo) < std::abs(ghi) ? lo : hi;
    double best_g = std::min(std::abs(glo), std::abs(ghi));
    for (int it = 0; it < cfg.tune_max && best_g > cfg.tune_tol; ++it) {
        double mid = 0.5 * (lo + hi);
        if (std::abs(ghi - glo) > 0.0) {
            double sec = lo - glo * (hi - lo) / (ghi - glo);
            if (sec > lo + 0.1 * (hi - lo) && sec < hi - 0.1 * (hi - lo)) mid = sec;
        }
        double gm = gfun(mid);
        if (std::abs(gm) < best_g) {
            best_g = std::abs(gm);
            best_eps = mid;
        }
        if (gm * glo <= 0.0) {
            hi = mid;
            ghi = gm;
        } else {
            lo = mid;
            glo = gm;
        }
        if (hi - lo < 1e-15 * p0.epsilon) break;
    }
    out.epsilon = best_eps;
    out.ratio_residual = best_g;
    if (best_g > 1e-10)
        throw ConvergenceError("tune_epsilon: could not reach the target rotation ratio");
    return out;
}

/// Assemble the full-period orbit in the rotating frame from a tuned fixed
/// point, with closure check, estimate suite, and record construction.
inline PeriodicOrbitRecord assemble_orbit(const SystemParams& p_tuned, Branch branch, long q,
                                          const std::array<double, 4>& zfix, const PeriodicConfig& cfg = {},
                                          const std::string& cfg_hash = "") {
    SystemParams p = p_tuned;
    p.q = static_cast<int>(q);
    EnergyLevel E = EnergyLevel::comet(branch, p.epsilon);
    double sgn = branch_sign(branch);

    SectionMapResult m = rectified_section_map(p, zfix, E, false, cfg, false);
    double T_hat = m.return_time;
    long laps = q - static_cast<long>(sgn);

    // closure measured through the section-map composition: the return map
    // advances phi by exactly 2 pi per lap, so no spurious phase drift enters
    // through the 1/eps^2 scale of q2.
    std::array<double, 4> z_comp = zfix;
    double T = 0.0, theta_total = 0.0;
    for (long k = 0; k < laps; ++k) {
        SectionMapResult mk = rectified_section_map(p, z_comp, E, false, cfg, false);
        z_comp = mk.image;
        T += mk.return_time;
        theta_total += mk.theta_advance;
    }

    double G0 = energy_graph_G(p, E, zfix, 0.0, false);
    ChartState start(Chart::CometPolar, {zfix[0], zfix[1], zfix[2], zfix[3], 0.0, G0});
    IntegratorConfig icfg;
    icfg.abs_tol = icfg.rel_tol = 1e-13;
    Trajectory tr = integrate(p, start, SystemTag::CometPolarFull, {0.0, T}, icfg);

    // theta(t) by per-interval Gauss quadrature of the rate along the dense orbit
    std::size_t n_aux = static_cast<std::size_t>(std::ceil(T / cfg.aux_dt));
    n_aux = std::max<std::size_t>(n_aux, 16);
    double dt = T / static_cast<double>(n_aux);
    static const double gl_x[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                   0.9061798459386640};
    static const double gl_w[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665,
                                   0.2369268850561891};
    PeriodicOrbitRecord rec;
    rec.aux.rh.resize(n_aux);
    rec.aux.Rh.resize(n_aux);
    rec.aux.rho.resize(n_aux);
    rec.aux.Ups.resize(n_aux);
    rec.aux.G.resize(n_aux);
    rec.aux.phi_res.resize(n_aux);
    rec.aux.theta_res.resize(n_aux);
    double a_phi = -kTwoPi * laps / T;
    double a_theta = kTwoPi * q / T;
    double theta = 0.0, theta_c = 0.0;  // Kahan-compensated accumulation
    std::vector<double> theta_grid(n_aux + 1);
    theta_grid[0] = 0.0;
    auto rate_at = [&](double t) {
        auto y = tr.eval(t);
        double G = energy_graph_G(p, E, {y[0], y[1], y[2], y[3]}, y[4], false);
        return theta_rate_comet(p, y[0], G);
    };
    for (std::size_t k = 0; k < n_aux; ++k) {
        double ta = k * dt, hb = dt;
        double inc = 0.0;
        for (int g = 0; g < 5; ++g) inc += gl_w[g] * rate_at(ta + 0.5 * hb * (1.0 + gl_x[g]));
        inc *= 0.5 * hb;
        double yk = inc - theta_c;
        double tk = theta + yk;
        theta_c = (tk - theta) - yk;
        theta = tk;
        theta_grid[k + 1] = theta;
    }
    for (std::size_t k = 0; k < n_aux; ++k) {
        double t = k * dt;
        auto y = tr.eval(t);
        rec.aux.rh[k] = y[0];
        rec.aux.Rh[k] = y[1];
        rec.aux.rho[k] = y[2];
        rec.aux.Ups[k] = y[3];
        rec.aux.G[k] = energy_graph_G(p, E, {y[0], y[1], y[2], y[3]}, y[4], false);
        rec.aux.phi_res[k] = y[4] - a_phi * t;
        rec.aux.theta_res[k] = theta_grid[k] - a_theta * t;
    }
    rec.aux.dt = dt;
    rec.aux.a_phi = a_phi;
    rec.aux.a_theta = a_theta;
    rec.aux.phi0 = 0.0;
    rec.aux.theta0 = 0.0;

    rec.params = p;
    rec.branch = branch;
    rec.epsilon_tuned = p.epsilon;
    rec.period = T;
    rec.T_hat = T_hat;
    rec.rot_num = laps;
    rec.rot_den = q;
    rec.fixed_point = zfix;
    rec.code_version = kCodeVersion;
    rec.config_hash_hex = cfg_hash;

    // closure in the rotating frame (theta on the circle), from the composed map
    auto rot_state = [&](double t, double theta_t) {
        auto y = tr.eval(t);
        double u = p.u();
        double G = energy_graph_G(p, E, {y[0], y[1], y[2], y[3]}, y[4], false);
        double phi = y[4];
        Vec2 uph{std::cos(phi), std::sin(phi)};
        Vec2 v2 = y[3] * uph + (G / y[2]) * perp(uph);
        double e2 = p.epsilon * p.epsilon;
        return std::array<double, 8>{1.0 + u * y[0],
                                     u * y[1],
                                     theta_t,
                                     p.alpha(),
                                     y[2] * std::cos(phi) / e2,
                                     y[2] * std::sin(phi) / e2,
                                     p.delta * p.epsilon * v2[0],
                                     p.delta * p.epsilon * v2[1]};
    };
    {
        auto to_rot = [&](const std::array<double, 4>& z4, double theta_t) {
            double u = p.u();
            double G = energy_graph_G(p, E, z4, 0.0, false);
            double e2 = p.epsilon * p.epsilon;
            return std::array<double, 8>{1.0 + u * z4[0], u * z4[1], theta_t,       p.alpha(),
                                         z4[2] / e2,      0.0,       p.delta * p.epsilon * z4[3],
                                         p.delta * p.epsilon * G / z4[2]};
        };
        auto s0 = to_rot(zfix, 0.0), s1 = to_rot(z_comp, theta_total);
        double worst = 0.0;
        for (int i = 0; i < 8; ++i) {
            double d = (i == 2) ? std::abs(wrap_pm(s1[i] - s0[i])) : std::abs(s1[i] - s0[i]);
            worst = std::max(worst, d);
        }
        rec.closure_residual = worst;
    }

    // estimate suite along the orbit
    OrbitEstimates& est = rec.estimates;
    double e3 = std::pow(p.epsilon, 3);
    for (std::size_t k = 0; k < n_aux; ++k) {
        est.sup_rh = std::max(est.sup_rh, std::abs(rec.aux.rh[k]));
        est.sup_Rh = std::max(est.sup_Rh, std::abs(rec.aux.Rh[k]));
        est.sup_rho_m1 = std::max(est.sup_rho_m1, std::abs(rec.aux.rho[k] - 1.0));
        est.sup_Ups = std::max(est.sup_Ups, std::abs(rec.aux.Ups[k]));
        est.sup_G_pm1 = std::max(est.sup_G_pm1, std::abs(rec.aux.G[k] - sgn));
        auto fy = tr.eval_deriv(k * dt);
        est.sup_phidot_dev = std::max(est.sup_phidot_dev, std::abs(std::abs(fy[4]) - (1.0 - sgn * e3)));
    }
    double u = p.u();
    double envelope = p.mu * std::pow(p.epsilon, 4) + std::sqrt(p.delta) * std::pow(p.epsilon, -3.5);
    est.bound_inner = cfg.M1_bound * envelope;
    est.bound_rhRh = cfg.M3_bound * std::sqrt(p.delta) * std::pow(p.epsilon, -3.5);
    est.bound_phidot = cfg.Mphi_bound * (p.mu * std::pow(p.epsilon, 7) + u);
    est.period_dev = std::abs(T / (kTwoPi * q) - 1.0);
    est.period_bound = cfg.K_period * u;

    // coarse rotating-frame and Cartesian samples
    double sdt = std::min(cfg.sample_dt_max, T / 256.0);
    std::size_t n_s = static_cast<std::size_t>(std::floor(T / sdt)) + 1;
    for (std::size_t k = 0; k < n_s; ++k) {
        double t = std::min(k * sdt, T);
        double th = rec.aux.a_theta * t + rec.interp(rec.aux.theta_res, std::min(t, T * (1.0 - 1e-12)));
        auto s = rot_state(t, th);
        rec.sample_t.push_back(t);
        rec.sample_state.push_back(s);
        PrimaryElements el{s[0], s[2], Vec2{s[4], s[5]}};
        PrimaryPositions b = primary_positions_from_elements(p.mu, p.delta, el);
        rec.cart_t.push_back(t);
        rec.cart_xyz.push_back({b.xS[0], b.xS[1], b.xJ[0], b.xJ[1], b.xP[0], b.xP[1]});
    }
    return rec;
}

/// Constants estimated by the sampling oracles of the continuation argument.
struct SamplingConstants {
    double M0 = 0.0;        // ||P0(z) - z|| <= M0 eps^3 on the ball
    double M1_map = 0.0;    // ||P_delta - P0|| <= M1 (mu eps^7 + sqrt(delta/eps))
    double M2 = 0.0;        // second-order remainder of P0 at Z*
    double M3_map = 0.0;    // (r^, R^)-projection of the perturbation / sqrt(delta/eps)
    double inv_norm = 0.0;  // ||(I - DP0(Z*))^{-1}||_2
};

inline SamplingConstants estimate_constants(const SystemParams& p0, Branch branch,
                                            const std::vector<double>& deltas, const PeriodicConfig& cfg = {},
                                            int n_samples = 12, unsigned seed = 12345) {
    SamplingConstants c;
    EnergyLevel E = EnergyLevel::comet(branch, p0.epsilon);
    std::mt19937_64 g(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    double e3 = std::pow(p0.epsilon, 3);
    SystemParams pz = p0.with_delta(0.0);

    SectionMapResult base = rectified_section_map(pz, kZstar, E, true, cfg, true);
    Eigen::Matrix4d A = Eigen::Matrix4d::Identity() - base.jacobian;
    Eigen::JacobiSVD<Eigen::Matrix4d> svd(A.inverse());
    c.inv_norm = svd.singularValues()(0);

    for (int k = 0; k < n_samples; ++k) {
        std::array<double, 4> z;
        double r2 = 0.0;
        for (int i = 0; i < 4; ++i) {
            z[i] = U(g);
            r2 += z[i] * z[i];
        }
        double scale = cfg.C_Zstar * 0.95 * std::pow(std::abs(U(g)), 0.5) / std::sqrt(std::max(r2, 1e-12));
        for (int i = 0; i < 4; ++i) z[i] = kZstar[i] + scale * z[i];
        SectionMapResult m0 = rectified_section_map(pz, z, E, true, cfg, false);
        double d0 = 0.0;
        for (int i = 0; i < 4; ++i) d0 = std::max(d0, std::abs(m0.image[i] - z[i]));
        c.M0 = std::max(c.M0, d0 / e3);
        // second-order remainder against the linearization at Z*
        Eigen::Vector4d dz;
        for (int i = 0; i < 4; ++i) dz(i) = z[i] - kZstar[i];
        Eigen::Vector4d lin = base.jacobian * dz;
        double q2 = 0.0;
        for (int i = 0; i < 4; ++i) q2 = std::max(q2, std::abs(m0.image[i] - kZstar[i] - lin(i)));
        c.M2 = std::max(c.M2, q2 / std::max(dz.squaredNorm(), 1e-12));
        for (double d : deltas) {
            SystemParams pd = p0.with_delta(d);
            double env = pd.mu * std::pow(pd.epsilon, 7) + pd.u();
            if (env <= 0.0) continue;
            SectionMapResult md = rectified_section_map(pd, z, E, false, cfg, false);
            double dd = 0.0, drr = 0.0;
            for (int i = 0; i < 4; ++i) dd = std::max(dd, std::abs(md.image[i] - m0.image[i]));
            for (int i = 0; i < 2; ++i) drr = std::max(drr, std::abs(md.image[i] - m0.image[i]));
            c.M1_map = std::max(c.M1_map, dd / env);
            if (pd.u() > 0.0) c.M3_map = std::max(c.M3_map, drr / pd.u());
        }
    }
    return c;
}

struct PeriodicPipelineResult {
    TuneResult tune;
    PeriodicOrbitRecord record;
    FixedPointResult fixed_point;
};

/// Full continuation pipeline: pick q (smallest admissible unless given),
/// tune epsilon to the rational target, assemble and check the orbit.
inline PeriodicPipelineResult compute_periodic_orbit(const SystemParams& p0, Branch branch,
                                                     const PeriodicConfig& cfg = {}, long q_opt = 0,
                                                     const std::string& cfg_hash = "") {
    PeriodicPipelineResult out;
    long q = q_opt;
    if (q <= 0) q = admissible_q_window(p0.epsilon).first;
    out.tune = tune_epsilon(p0, branch, q, cfg);
    SystemParams pt = p0.with_epsilon(out.tune.epsilon);
    EnergyLevel E = EnergyLevel::comet(branch, pt.epsilon);
    out.fixed_point = find_fixed_point(pt, E, out.tune.fixed_point, false, cfg);
    out.record = assemble_orbit(pt, branch, q, out.fixed_point.point, cfg, cfg_hash);
    return out;
}

}  // namespace rp4bp
