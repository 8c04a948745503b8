#pragma once

#include "manifold.hpp"
#include "melnikov.hpp"

namespace rp4bp {

struct ChainsConfig {
    int legs = 3;
    double iota_base = 1e-2;   // node-visit tolerances iota_k = iota_base/(k+1)
    double iota_tilde = 0.1;   // witness-visit tolerance (kept off the infinity set)
    Branch channel = Branch::Minus;
    double witness_tol = 1e-6;
    double Psi_lo = 9.0, Psi_hi = 11.0;
    double region_radius_factor = 1.2;  // return region: factor * Psi_hi^2/2
    ManifoldConfig mcfg{};
    MelnikovConfig melcfg{};

    ChainsConfig() {
        // witness and shadowing work tolerates a lighter averaged-zone
        // boundary; xi >= 500 keeps the dropped oscillation below 1e-9
        mcfg.icfg.x_average = 0.0632;
    }
    double region_radius() const { return region_radius_factor * 0.5 * Psi_hi * Psi_hi; }
};

struct ChainNode {
    double psi = 0.0, Psi = 0.0;
};

struct ChainWitness {
    std::array<double, 4> section_point{};  // (x, Xi = 0, psi, Psi) on the turning section
    double s = 0.0;
    double residual = 1e300;       // trace-matching distance
    double transversal = 0.0;      // d(DeltaPsi)/d(phase) estimate
    double transversal_floor = 0.0;
    bool transversal_resolved = false;
    double sigma_u = 0.0, sigma_s = 0.0;
};

struct TransitionChain {
    Branch branch = Branch::Minus;
    std::vector<ChainNode> nodes;
    std::vector<ChainWitness> witnesses;
    double Psi_lo = 0.0, Psi_hi = 0.0;
    std::vector<std::string> leg_errors;  // per-leg failure reports (chain truncated)
};

struct IterateResult {
    std::vector<ChainNode> nodes;
    double min_twist = 0.0;
    double twist_certificate = 0.0;  // required lower bound C/(Psi_hi)^5
    std::vector<double> Psi_drift;   // |Psi_{k+1} - Psi_k| per step
};

/// Orbit of the scattering-map model (psi, Psi) -> (psi + f(Psi), Psi); the
/// unperturbed map conserves Psi exactly.  A perturbed model (delta > 0,
/// record-driven potential) updates Psi by the psi-gradient of the perturbed
/// generating function, an O(delta) quantity.
inline IterateResult iterate_scattering(const ScatteringMapModel& model, ChainNode start, int n,
                                        const PrimariesSource* perturbed_primaries = nullptr,
                                        const MelnikovConfig& melcfg = {}) {
    IterateResult out;
    out.nodes.push_back(start);
    out.min_twist = 1e300;
    double Psi_hi = model.Psi_grid.back();
    out.twist_certificate = 0.5 * 6.0 * kPi * model.params.mu * (1.0 - model.params.mu) / std::pow(Psi_hi, 5);
    ChainNode z = start;
    for (int k = 0; k < n; ++k) {
        double f = model.f_at(z.Psi);  // throws on grid exit
        out.min_twist = std::min(out.min_twist, model.twist_at(z.Psi));
        double dPsi = 0.0;
        if (perturbed_primaries) {
            const SystemParams& p = model.params;
            double w_star = model.branch == Branch::Minus ? 0.0 : kPi;
            double h = 0.3;
            double Lp = melnikov_L0(p, z.psi + h, z.Psi, 0.0, w_star - (z.psi + h), melcfg, perturbed_primaries).value;
            double Lm = melnikov_L0(p, z.psi - h, z.Psi, 0.0, w_star - (z.psi - h), melcfg, perturbed_primaries).value;
            // psi-dependence beyond the reduced combination is the delta-part
            dPsi = -(Lp - Lm) / (2.0 * h);
        }
        z = ChainNode{z.psi + f, z.Psi + dPsi};
        out.Psi_drift.push_back(std::abs(dPsi));
        out.nodes.push_back(z);
    }
    return out;
}

namespace detail {

struct TracePair {
    SectionTrace u, s;
    double dist = 1e300;
};

inline double trace_distance(const SectionTrace& u, const SectionTrace& s) {
    double dx = u.x - s.x;
    double dpsi = wrap_pm(u.psi - s.psi);
    double dPsi = u.Psi - s.Psi;
    double ds = wrap_pm(u.s - s.s);
    return std::sqrt(dx * dx + dpsi * dpsi + dPsi * dPsi + ds * ds);
}

}  // namespace detail

/// Heteroclinic witness between consecutive nodes: the turning-section traces
/// of W^u(node_a) and W^s(node_b) are matched over the two timing parameters.
inline ChainWitness find_witness(const SystemParams& p, const ChainNode& a, const ChainNode& b,
                                 const ChainsConfig& cfg, const PrimariesSource* primaries = nullptr,
                                 double sigma_hint = 0.0) {
    auto pair_dist = [&](double su, double ss, detail::TracePair* keep = nullptr) {
        SectionTrace tu = section_trace(p, a.psi, a.Psi, ManifoldSide::Unstable, su, 0.0, cfg.mcfg, primaries);
        SectionTrace ts = section_trace(p, b.psi, b.Psi, ManifoldSide::Stable, ss, 0.0, cfg.mcfg, primaries);
        double d = detail::trace_distance(tu, ts);
        if (keep) *keep = detail::TracePair{tu, ts, d};
        return d;
    };
    // coordinate relaxation from the hint: Nelder-Mead on (sigma_u, sigma_s)
    double su = sigma_hint, ss = sigma_hint;
    double step = 0.15;
    detail::TracePair best;
    double d0 = pair_dist(su, ss, &best);
    for (int round = 0; round < 60 && best.dist > 0.2 * cfg.witness_tol; ++round) {
        bool improved = false;
        for (auto [du, ds] : {std::pair{step, 0.0}, {-step, 0.0}, {0.0, step}, {0.0, -step},
                              {step, step}, {-step, -step}}) {
            detail::TracePair cand;
            double d = pair_dist(su + du, ss + ds, &cand);
            if (d < best.dist) {
                best = cand;
                su += du;
                ss += ds;
                improved = true;
                break;
            }
        }
        if (!improved) {
            step *= 0.35;
            if (step < 1e-7) break;
        }
        (void)d0;
    }
    ChainWitness w;
    w.residual = best.dist;
    w.section_point = {best.u.x, 0.0, best.u.psi, best.u.Psi};
    w.s = best.u.s;
    w.sigma_u = su;
    w.sigma_s = ss;
    // transversality estimate: phase-derivative of the Psi-mismatch
    double h = 0.05;
    SectionTrace up = section_trace(p, a.psi, a.Psi, ManifoldSide::Unstable, su + h, 0.0, cfg.mcfg, primaries);
    SectionTrace um = section_trace(p, a.psi, a.Psi, ManifoldSide::Unstable, su - h, 0.0, cfg.mcfg, primaries);
    SectionTrace sp = section_trace(p, b.psi, b.Psi, ManifoldSide::Stable, ss + h, 0.0, cfg.mcfg, primaries);
    SectionTrace sm = section_trace(p, b.psi, b.Psi, ManifoldSide::Stable, ss - h, 0.0, cfg.mcfg, primaries);
    w.transversal = ((up.Psi - sp.Psi) - (um.Psi - sm.Psi)) / (2.0 * h);
    w.transversal_floor = 1e-8 / h;  // shot noise over the step
    w.transversal_resolved = std::abs(w.transversal) > 3.0 * w.transversal_floor;
    return w;
}

/// Finite transition chain: nodes advance along the heteroclinic orientation
/// (psi_{k+1} = psi_k - f(Psi_k); the stated map shift f carries the opposite,
/// future-to-past orientation, and W^u(node_k) meets W^s(node_{k+1}) only for
/// this choice).  Each leg stores a witness with residual and transversality
/// report; legs whose witness search fails truncate the chain with a report.
inline TransitionChain build_chain(const SystemParams& p, const ScatteringMapModel& model, ChainNode start, int legs,
                                   const ChainsConfig& cfg, const PrimariesSource* primaries = nullptr) {
    TransitionChain ch;
    ch.branch = cfg.channel;
    ch.Psi_lo = cfg.Psi_lo;
    ch.Psi_hi = cfg.Psi_hi;
    if (start.Psi < cfg.Psi_lo || start.Psi > cfg.Psi_hi)
        throw DomainError("build_chain: start outside the compact Psi window");
    double f0 = model.f_at(start.Psi);
    if (!(std::abs(f0) > 0.0))
        throw DomainError("build_chain: vanishing shift; a single-node homoclinic chain requires f(Psi) = 0, "
                          "which fails for mu > 0");
    ch.nodes.push_back(start);
    ChainNode z = start;
    for (int k = 0; k < legs; ++k) {
        ChainNode nxt{z.psi - model.f_at(z.Psi), z.Psi};
        if (nxt.Psi < cfg.Psi_lo || nxt.Psi > cfg.Psi_hi) {
            ch.leg_errors.push_back("leg " + std::to_string(k) + ": left the Psi window");
            break;
        }
        try {
            ChainWitness w = find_witness(p, z, nxt, cfg, primaries, 0.0);
            if (w.residual > cfg.witness_tol) {
                ch.leg_errors.push_back("leg " + std::to_string(k) + ": witness residual " +
                                        std::to_string(w.residual) + " above tolerance");
                break;
            }
            ch.witnesses.push_back(w);
        } catch (const std::exception& e) {
            ch.leg_errors.push_back("leg " + std::to_string(k) + ": " + e.what());
            break;
        }
        ch.nodes.push_back(nxt);
        z = nxt;
    }
    return ch;
}

// ---------------------------------------------------------------------------
// Shadowing demonstration.
// ---------------------------------------------------------------------------

struct ShadowLeg {
    long N = 0;              // strobe index of the node visit (apoapsis)
    long N_tilde = 0;        // strobe index of the witness visit (perihelion)
    double dist_node = 0.0;  // distance to the node's fixed point at P^N(a)
    double dist_witness = 0.0;
    double xi_min = 0.0, xi_max = 0.0;  // excursion extremes of |x_A| over the leg
    double iota = 0.0;
};

struct ShadowReport {
    std::vector<ShadowLeg> legs;
    double iota_tilde = 0.0;
    double region_radius = 0.0;
    double jacobi_drift = 0.0;  // relative, over the whole demo
    double energy_offset = 0.0; // Kepler energy of the carrier ellipse
    bool interleaved = true;    // N_k < N~_k < N_{k+1}
    bool visits_ok = true;
    bool excursions_ok = true;  // max >= 2 R and min <= R per leg

    bool passed() const { return interleaved && visits_ok && excursions_ok; }
};

/// Desk-scale shadowing experiment along a finite chain at delta = 0.  A
/// near-parabolic carrier orbit with apoapsis x = iota_min/2 makes one large
/// excursion per leg; node visits are read off at the apoapsis strobes and
/// witness visits at the perihelion strobes, against witnesses chosen on the
/// heteroclinic at the matching encounter phase.  Degenerate tolerances
/// (below integrator resolution) are rejected up front.
inline ShadowReport shadow_demo(const SystemParams& p, const TransitionChain& chain, const ChainsConfig& cfg,
                                const PrimariesSource* primaries = nullptr) {
    if (p.delta != 0.0) throw DomainError("shadow_demo: the desk-scale experiment runs the delta = 0 system");
    if (chain.nodes.size() < 2) throw DomainError("shadow_demo: chain has no legs");
    int legs = static_cast<int>(chain.nodes.size()) - 1;
    std::vector<double> iotas(legs);
    double iota_min = 1e300;
    for (int k = 0; k < legs; ++k) {
        iotas[k] = cfg.iota_base / (k + 1);
        iota_min = std::min(iota_min, iotas[k]);
    }
    if (iota_min < 100.0 * cfg.mcfg.icfg.event_tol || cfg.iota_tilde < 100.0 * cfg.mcfg.icfg.event_tol)
        throw DomainError("shadow_demo: tolerance below integrator resolution");

    double T_strobe = kTwoPi * p.q;
    double Psi0 = chain.nodes[0].Psi;
    double x_apo = 0.5 * iota_min;
    double E0 = -0.5 * x_apo * x_apo;
    double a_ell = 1.0 / (2.0 * std::abs(E0));
    double T_ell_nominal = kTwoPi * std::pow(a_ell, 1.5);

    // carrier initial condition: perihelion of the (Psi0, E0) ellipse with the
    // perihelion angle of node_0's asymptote, at a strobe time
    double ecc = std::sqrt(std::max(0.0, 1.0 + 2.0 * E0 * Psi0 * Psi0));
    double xi_p = Psi0 * Psi0 / (1.0 + ecc);
    double beta0 = chain.nodes[0].psi + kPi;
    ChartState carrier(Chart::AsteroidMcGehee, {std::sqrt(2.0 / xi_p), 0.0, beta0, Psi0, 0.0});

    ShadowReport rep;
    rep.iota_tilde = cfg.iota_tilde;
    rep.region_radius = cfg.region_radius();
    rep.energy_offset = E0;

    IntegratorConfig icfg = cfg.mcfg.icfg;
    icfg.max_steps = 8'000'000;
    double j_ref = jacobi_constant_mcgehee(p, carrier);

    ChartState st = carrier;
    double t_now = 0.0;
    double t_prev_peri = 0.0;
    long prevN = -1;
    for (int k = 0; k < legs; ++k) {
        // one revolution: perihelion -> apoapsis -> next perihelion
        double span = 1.45 * T_ell_nominal;
        Trajectory tr = integrate_excursion(p, st, {t_now, t_now + span}, icfg, primaries);
        SectionEvent apo_ev{[](double, const std::vector<double>& y) { return y[1]; }, -1, "apoapsis"};
        SectionEvent peri_ev{[](double, const std::vector<double>& y) { return y[1]; }, +1, "perihelion"};
        auto apos = event_crossing(tr, apo_ev, icfg.event_tol);
        auto peris = event_crossing(tr, peri_ev, icfg.event_tol);
        if (apos.empty() || peris.empty())
            throw NumericalError("shadow_demo: leg " + std::to_string(k) + " lost its excursion structure");
        double t_apo = apos.front().t;
        double t_peri = 0.0;
        bool have_peri = false;
        for (const auto& h : peris)
            if (h.t > t_apo) {
                t_peri = h.t;
                have_peri = true;
                break;
            }
        if (!have_peri) throw NumericalError("shadow_demo: no perihelion return on leg " + std::to_string(k));

        ShadowLeg leg;
        leg.iota = iotas[k];
        leg.N = std::lround(t_apo / T_strobe);
        leg.N_tilde = std::lround(t_peri / T_strobe);
        if (leg.N_tilde == leg.N) leg.N_tilde = leg.N + 1;  // degenerate only for absurdly short legs

        // node visit at the apoapsis strobe
        {
            auto y = tr.eval(leg.N * T_strobe);
            double dx = std::hypot(y[0], y[1]);
            double dpsi = wrap_pm(y[2] - chain.nodes[k].psi);
            double dPsi = y[3] - chain.nodes[k].Psi;
            leg.dist_node = std::max({dx, std::abs(dpsi), std::abs(dPsi)});
        }
        // witness visit at the perihelion strobe.  With sigma = N~ T - t_peri
        // the heteroclinic's j = 0 strobe sample sits at the same swing time
        // AND the same encounter phase as the carrier's sample (q nu = 1 at
        // delta = 0 ties the two congruences together).
        {
            auto yq = tr.eval(leg.N_tilde * T_strobe);
            double sigma = leg.N_tilde * T_strobe - t_peri;
            ShootResult hs = manifold_shoot(p, chain.nodes[k].psi, chain.nodes[k].Psi, ManifoldSide::Unstable,
                                            sigma, 0.0, cfg.mcfg, primaries, std::abs(sigma) + 60.0);
            auto yh = hs.traj.eval(sigma);
            leg.dist_witness = std::max({std::abs(yh[0] - yq[0]), std::abs(yh[1] - yq[1]),
                                         std::abs(wrap_pm(yh[2] - yq[2])), std::abs(yh[3] - yq[3]),
                                         std::abs(wrap_pm(yh[4] - yq[4]))});
        }
        // excursion extremes of |x_A| over the leg, from the event states
        {
            auto yp0 = tr.eval(std::max(t_prev_peri, tr.t_begin()));
            auto ya = tr.eval(t_apo);
            auto yp1 = tr.eval(t_peri);
            leg.xi_min = std::min(2.0 / (yp0[0] * yp0[0]), 2.0 / (yp1[0] * yp1[0]));
            leg.xi_max = 2.0 / (ya[0] * ya[0]);
        }
        ChartState endst(Chart::AsteroidMcGehee, tr.eval(t_peri));
        rep.jacobi_drift = std::max(rep.jacobi_drift,
                                    std::abs(jacobi_constant_mcgehee(p, endst) - j_ref) / std::abs(j_ref));
        if (prevN >= leg.N || leg.N >= leg.N_tilde) rep.interleaved = false;
        prevN = leg.N_tilde;
        if (leg.dist_node > leg.iota || leg.dist_witness > cfg.iota_tilde) rep.visits_ok = false;
        if (!(leg.xi_max >= 2.0 * rep.region_radius && leg.xi_min <= rep.region_radius)) rep.excursions_ok = false;
        rep.legs.push_back(leg);

        st = ChartState(Chart::AsteroidMcGehee, tr.eval(t_peri));
        t_now = t_peri;
        t_prev_peri = t_peri;
    }
    return rep;
}

inline nlohmann::json chain_to_json(const TransitionChain& ch) {
    nlohmann::json j;
    j["branch"] = branch_name(ch.branch);
    j["Psi_window"] = {ch.Psi_lo, ch.Psi_hi};
    j["nodes"] = nlohmann::json::array();
    for (const auto& n : ch.nodes) j["nodes"].push_back({{"psi", n.psi}, {"Psi", n.Psi}});
    j["witnesses"] = nlohmann::json::array();
    for (const auto& w : ch.witnesses)
        j["witnesses"].push_back({{"point", w.section_point},
                                  {"s", w.s},
                                  {"residual", w.residual},
                                  {"transversal", w.transversal},
                                  {"transversal_floor", w.transversal_floor},
                                  {"transversal_resolved", w.transversal_resolved},
                                  {"sigma_u", w.sigma_u},
                                  {"sigma_s", w.sigma_s}});
    j["leg_errors"] = ch.leg_errors;
    return j;
}

inline nlohmann::json shadow_to_json(const ShadowReport& r) {
    nlohmann::json j;
    j["iota_tilde"] = r.iota_tilde;
    j["region_radius"] = r.region_radius;
    j["jacobi_drift"] = r.jacobi_drift;
    j["energy_offset"] = r.energy_offset;
    j["interleaved"] = r.interleaved;
    j["visits_ok"] = r.visits_ok;
    j["excursions_ok"] = r.excursions_ok;
    j["legs"] = nlohmann::json::array();
    for (const auto& l : r.legs)
        j["legs"].push_back({{"N", l.N},
                             {"N_tilde", l.N_tilde},
                             {"dist_node", l.dist_node},
                             {"dist_witness", l.dist_witness},
                             {"xi_min", l.xi_min},
                             {"xi_max", l.xi_max},
                             {"iota", l.iota}});
    return j;
}

}  // namespace rp4bp
