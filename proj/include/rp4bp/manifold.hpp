#pragma once

#include "integrate.hpp"
#include "melnikov.hpp"
#include "parabola.hpp"

namespace rp4bp {

enum class ManifoldSide { Stable, Unstable };

struct ManifoldConfig {
    double x_shoot = 1e-2;  // initialization radius on the unperturbed parabola
    double x_label = 1e-2;  // radius for asymptotic-label extraction
    IntegratorConfig icfg{};
};

/// Asymptotic orbit labels of a near-parabolic state at small x: the Kepler
/// continuation of the remaining arc is summed in closed form.
struct AsymptoticLabels {
    double psi_infinity = 0.0;  // unwrapped
    double Psi = 0.0;
    double kepler_energy = 0.0;
};

inline AsymptoticLabels asymptotic_labels(const ChartState& mc, bool forward) {
    require_chart(mc, Chart::AsteroidMcGehee, "asymptotic_labels");
    double x = mc[0], Xi = mc[1], psi = mc[2], Psi = mc[3];
    if (!(x > 0.0)) throw DomainError("asymptotic_labels: x must be positive");
    double ratio = Xi / x;
    if (!(std::abs(ratio) < 1.0 - 1e-14))
        throw DomainError("asymptotic_labels: state not on a near-parabolic arc (|Xi/x| >= 1)");
    double tau_c = ratio / std::sqrt(1.0 - ratio * ratio);
    AsymptoticLabels out;
    out.Psi = Psi;
    out.psi_infinity = forward ? psi + (kPi - 2.0 * std::atan(tau_c)) : psi + (-kPi - 2.0 * std::atan(tau_c));
    double x2 = x * x;
    out.kepler_energy = 0.5 * (Xi * Xi + 0.25 * Psi * Psi * x2 * x2) - 0.5 * x2;
    return out;
}

struct ShootResult {
    Trajectory traj;  // AsteroidMcGehee chart
    double t_start = 0.0, t_end = 0.0;
    double psi_fixed_point = 0.0;  // the invariant-orbit label the shot is asymptotic to
    double Psi0 = 0.0;
    double sigma = 0.0;
};

/// Shoot the stable or unstable manifold of the infinity orbit with labels
/// (psi0, Psi0).  The initial condition is the exact unperturbed parabola
/// point at radius x_shoot (the Kepler manifold), which leaves only the
/// O(mu x_shoot^5) far-field correction as initialization error; sigma shifts
/// the encounter timing (perihelion near t = sigma).
inline ShootResult manifold_shoot(const SystemParams& p, double psi0, double Psi0, ManifoldSide side, double sigma,
                                  double s0 = 0.0, const ManifoldConfig& cfg = {},
                                  const PrimariesSource* primaries = nullptr, double t_past_perihelion = -1.0) {
    if (!(Psi0 > 0.0)) throw DomainError("manifold_shoot: Psi0 must be positive");
    require_perturbative(p);
    std::optional<CircularPrimaries> circ;
    const PrimariesSource* src = primaries;
    if (!src && p.delta > 0.0) {
        circ.emplace(p);
        src = &*circ;
    }
    double nu = src ? src->nu() : 1.0 / p.q;
    bool unstable = side == ManifoldSide::Unstable;
    double beta = psi0 + (unstable ? kPi : -kPi);  // perihelion angle of the asymptote
    double tau0 = parabola_tau_at_x(Psi0, cfg.x_shoot, unstable ? -1 : +1);
    double t_par0 = parabola_time(Psi0, tau0);

    // trajectory time = parabola time (perihelion near t = 0); sigma offsets
    // the strobe clock, s(t) = s0 + nu (t - sigma), which is what moves the
    // encounter phase across the fiber family
    double den = 1.0 + tau0 * tau0;
    ChartState st(Chart::AsteroidMcGehee,
                  {2.0 / (Psi0 * std::sqrt(den)), 2.0 * tau0 / (Psi0 * den), beta + 2.0 * std::atan(tau0), Psi0,
                   s0 + nu * (t_par0 - sigma)});

    ShootResult out;
    out.psi_fixed_point = psi0;
    out.Psi0 = Psi0;
    out.sigma = sigma;
    out.t_start = t_par0;
    if (t_past_perihelion >= 0.0)
        out.t_end = unstable ? t_past_perihelion : -t_past_perihelion;
    else
        out.t_end = -t_par0;  // symmetric full excursion
    out.traj = integrate_excursion(p, st, {out.t_start, out.t_end}, cfg.icfg, src);
    return out;
}

/// Verification helper: the measured asymptotic angle advance of one full
/// heteroclinic excursion, minus the unperturbed swing 2 pi.  To first order
/// this is the scattering shift f(Psi).
inline double measure_scattering_shift(const SystemParams& p, double Psi0, double sigma = 0.0, double s0 = 0.0,
                                       const ManifoldConfig& cfg = {}, const PrimariesSource* primaries = nullptr) {
    ShootResult sh = manifold_shoot(p, 0.0, Psi0, ManifoldSide::Unstable, sigma, s0, cfg, primaries);
    // unwrapped angles carry the label bookkeeping across the 2 pi swing
    ChartState raw(Chart::AsteroidMcGehee, sh.traj.eval(sh.t_end));
    AsymptoticLabels lab = asymptotic_labels(raw, true);
    return lab.psi_infinity - kTwoPi;
}

/// Traces of both shot manifolds on the turning-point section {Xi = 0}.
struct SectionTrace {
    double t = 0.0;
    double x = 0.0, psi = 0.0, Psi = 0.0, s = 0.0;
};

inline SectionTrace section_trace(const SystemParams& p, double psi0, double Psi0, ManifoldSide side, double sigma,
                                  double s0 = 0.0, const ManifoldConfig& cfg = {},
                                  const PrimariesSource* primaries = nullptr) {
    double margin = 80.0 + 0.2 * Psi0 * Psi0 * Psi0;
    ShootResult sh = manifold_shoot(p, psi0, Psi0, side, sigma, s0, cfg, primaries,
                                    margin);
    SectionEvent ev{[](double, const std::vector<double>& y) { return y[1]; }, +1, "Xi=0"};
    auto hits = event_crossing(sh.traj, ev, cfg.icfg.event_tol);
    if (hits.empty()) throw NumericalError("section_trace: no turning-point crossing found");
    // the perihelion crossing nearest t = 0
    const EventHit* best = &hits.front();
    for (const auto& h : hits)
        if (std::abs(h.t) < std::abs(best->t)) best = &h;
    auto y = sh.traj.eval(best->t);
    return SectionTrace{best->t, y[0], y[2], y[3], y[4]};
}

/// Encounter phase of a shot: v = beta - q s0 + sigma with beta the
/// perihelion angle of the asymptote (the fixed-point label shifted by pi).
inline double encounter_phase(const SystemParams& p, double psi0_label, ManifoldSide side, double sigma, double s0) {
    double beta = psi0_label + (side == ManifoldSide::Unstable ? kPi : -kPi);
    return beta - p.q * s0 + sigma;
}

/// Psi-splitting of the unstable and stable traces at encounter phase w; its
/// first-order prediction is the w-derivative of the Poincare function
/// (exponentially small in Psi0^3, resolvable only at small Psi0).
inline double splitting_trace_Psi(const SystemParams& p, double Psi0, double w, const ManifoldConfig& cfg = {},
                                  const PrimariesSource* primaries = nullptr) {
    double sigma = w - kPi;  // encounter_phase(label 0, s0 = 0) = pi + sigma
    SectionTrace u = section_trace(p, 0.0, Psi0, ManifoldSide::Unstable, sigma, 0.0, cfg, primaries);
    SectionTrace s = section_trace(p, 0.0, Psi0, ManifoldSide::Stable, sigma, 0.0, cfg, primaries);
    return u.Psi - s.Psi;
}

}  // namespace rp4bp
