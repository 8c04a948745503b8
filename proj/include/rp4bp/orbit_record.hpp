#pragma once

#include "hamiltonian.hpp"
#include "io.hpp"
#include "transforms.hpp"

namespace rp4bp {

/// Sup-norm checks of the continuation estimates along an assembled orbit.
struct OrbitEstimates {
    double sup_rh = 0.0, sup_Rh = 0.0, sup_rho_m1 = 0.0, sup_Ups = 0.0, sup_G_pm1 = 0.0, sup_phidot_dev = 0.0;
    double bound_rhRh = 0.0;      // M3 sqrt(delta) eps^{-7/2}
    double bound_inner = 0.0;     // M1 (mu eps^4 + sqrt(delta) eps^{-7/2})
    double bound_phidot = 0.0;    // 2 M1 (mu eps^7 + sqrt(delta/eps))
    double period_dev = 0.0;      // |T/(2 pi q) - 1|
    double period_bound = 0.0;    // K sqrt(delta/eps)
    bool all_hold(double floor = 1e-9) const {
        return sup_rh <= bound_rhRh + floor && sup_Rh <= bound_rhRh + floor && sup_rho_m1 <= bound_inner + floor &&
               sup_Ups <= bound_inner + floor && sup_G_pm1 <= bound_inner + floor &&
               sup_phidot_dev <= bound_phidot + floor && period_dev <= period_bound + floor;
    }
};

/// A computed comet-type periodic orbit of the 3BP.  The RotatingPolar
/// samples are the exchange format; the `aux` block stores the slow chart
/// quantities on a uniform grid for accurate reconstruction (the raw
/// rotating-frame components mix in the fast angles).
struct PeriodicOrbitRecord {
    SystemParams params;  // epsilon field = tuned value
    Branch branch = Branch::Plus;
    double epsilon_tuned = 0.0;
    double period = 0.0;  // T = (q -+ 1) T^
    double T_hat = 0.0;   // section return time
    long rot_num = 0, rot_den = 0;
    std::array<double, 4> fixed_point{};  // (r^, R^, rho, Upsilon) on Sigma_0
    double closure_residual = 0.0;
    OrbitEstimates estimates;

    std::vector<double> sample_t;                     // coarse RotatingPolar samples
    std::vector<std::array<double, 8>> sample_state;  // (r, R, theta, Omega, q2, p2)

    // uniform-grid slow data: n points, dt = period / n, wraps periodically
    struct Aux {
        double dt = 0.0;
        double a_phi = 0.0, a_theta = 0.0;  // secular rates
        double phi0 = 0.0, theta0 = 0.0;
        std::vector<double> rh, Rh, rho, Ups, G, phi_res, theta_res;
        std::size_t size() const { return rho.size(); }
    } aux;

    std::vector<double> cart_t;
    std::vector<std::array<double, 6>> cart_xyz;  // xS, xJ, xP

    std::string code_version = kCodeVersion;
    std::string config_hash_hex;

    bool valid() const { return aux.size() >= 8 && period > 0.0; }

    /// 6-point Lagrange interpolation of one slow column at time t (periodic).
    double interp(const std::vector<double>& col, double t) const {
        std::size_t n = aux.size();
        double tm = std::fmod(t, period);
        if (tm < 0.0) tm += period;
        double u = tm / aux.dt;
        long i0 = static_cast<long>(std::floor(u)) - 2;
        double acc = 0.0;
        for (int a = 0; a < 6; ++a) {
            long ia = i0 + a;
            double ta = static_cast<double>(ia);  // node position in grid units
            double w = 1.0;
            for (int b = 0; b < 6; ++b) {
                if (b == a) continue;
                double tb = static_cast<double>(i0 + b);
                w *= (u - tb) / (ta - tb);
            }
            long idx = ((ia % static_cast<long>(n)) + static_cast<long>(n)) % static_cast<long>(n);
            acc += w * col[static_cast<std::size_t>(idx)];
        }
        return acc;
    }

    PrimaryElements elements_at(double t) const {
        if (!valid()) throw NumericalError("orbit record missing or malformed");
        double u = std::sqrt(params.delta / epsilon_tuned);
        PrimaryElements el;
        el.r = 1.0 + u * interp(aux.rh, t);
        el.theta = aux.theta0 + aux.a_theta * t + interp(aux.theta_res, t);
        double phi = aux.phi0 + aux.a_phi * t + interp(aux.phi_res, t);
        double rho = interp(aux.rho, t);
        double e2 = epsilon_tuned * epsilon_tuned;
        el.q2 = Vec2{rho * std::cos(phi) / e2, rho * std::sin(phi) / e2};
        return el;
    }

    /// Full rotating-frame state (all eight components) reconstructed at t.
    ChartState rotating_state_at(double t) const {
        PrimaryElements el = elements_at(t);
        double u = std::sqrt(params.delta / epsilon_tuned);
        double R = u * interp(aux.Rh, t);
        double Ups = interp(aux.Ups, t), G = interp(aux.G, t), rho = interp(aux.rho, t);
        double phi = aux.phi0 + aux.a_phi * t + interp(aux.phi_res, t);
        Vec2 uph{std::cos(phi), std::sin(phi)};
        Vec2 v2 = Ups * uph + (G / rho) * perp(uph);
        Vec2 p2 = (params.delta * epsilon_tuned) * v2;
        return ChartState(Chart::RotatingPolar,
                          {el.r, R, wrap_angle(el.theta), params.alpha(), el.q2[0], el.q2[1], p2[0], p2[1]});
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["params"] = {{"mu", params.mu}, {"delta", params.delta}, {"epsilon", params.epsilon}, {"q", params.q}};
        j["branch"] = branch_name(branch);
        j["epsilon_tuned"] = epsilon_tuned;
        j["period"] = period;
        j["T_hat"] = T_hat;
        j["rotation_ratio"] = {{"num", rot_num}, {"den", rot_den}};
        j["fixed_point"] = fixed_point;
        j["closure_residual"] = closure_residual;
        j["samples"] = {{"t", sample_t}, {"state", sample_state}};
        j["aux"] = {{"dt", aux.dt},   {"a_phi", aux.a_phi},     {"a_theta", aux.a_theta},
                    {"phi0", aux.phi0}, {"theta0", aux.theta0},   {"rh", aux.rh},
                    {"Rh", aux.Rh},   {"rho", aux.rho},         {"Ups", aux.Ups},
                    {"G", aux.G},     {"phi_res", aux.phi_res}, {"theta_res", aux.theta_res}};
        j["cartesian_samples"] = {{"t", cart_t}, {"xyz", cart_xyz}};
        j["estimates"] = {{"sup_rh", estimates.sup_rh},
                          {"sup_Rh", estimates.sup_Rh},
                          {"sup_rho_m1", estimates.sup_rho_m1},
                          {"sup_Ups", estimates.sup_Ups},
                          {"sup_G_pm1", estimates.sup_G_pm1},
                          {"sup_phidot_dev", estimates.sup_phidot_dev},
                          {"bound_rhRh", estimates.bound_rhRh},
                          {"bound_inner", estimates.bound_inner},
                          {"bound_phidot", estimates.bound_phidot},
                          {"period_dev", estimates.period_dev},
                          {"period_bound", estimates.period_bound}};
        j["code_version"] = code_version;
        j["config_hash"] = config_hash_hex;
        return j;
    }

    static PeriodicOrbitRecord from_json(const nlohmann::json& j) {
        PeriodicOrbitRecord r;
        r.params.mu = j["params"]["mu"];
        r.params.delta = j["params"]["delta"];
        r.params.epsilon = j["params"]["epsilon"];
        r.params.q = j["params"]["q"];
        r.branch = j["branch"] == "plus" ? Branch::Plus : Branch::Minus;
        r.epsilon_tuned = j["epsilon_tuned"];
        r.period = j["period"];
        r.T_hat = j["T_hat"];
        r.rot_num = j["rotation_ratio"]["num"];
        r.rot_den = j["rotation_ratio"]["den"];
        r.fixed_point = j["fixed_point"];
        r.closure_residual = j["closure_residual"];
        r.sample_t = j["samples"]["t"].get<std::vector<double>>();
        r.sample_state = j["samples"]["state"].get<std::vector<std::array<double, 8>>>();
        const auto& a = j["aux"];
        r.aux.dt = a["dt"];
        r.aux.a_phi = a["a_phi"];
        r.aux.a_theta = a["a_theta"];
        r.aux.phi0 = a["phi0"];
        r.aux.theta0 = a["theta0"];
        r.aux.rh = a["rh"].get<std::vector<double>>();
        r.aux.Rh = a["Rh"].get<std::vector<double>>();
        r.aux.rho = a["rho"].get<std::vector<double>>();
        r.aux.Ups = a["Ups"].get<std::vector<double>>();
        r.aux.G = a["G"].get<std::vector<double>>();
        r.aux.phi_res = a["phi_res"].get<std::vector<double>>();
        r.aux.theta_res = a["theta_res"].get<std::vector<double>>();
        r.cart_t = j["cartesian_samples"]["t"].get<std::vector<double>>();
        r.cart_xyz = j["cartesian_samples"]["xyz"].get<std::vector<std::array<double, 6>>>();
        const auto& e = j["estimates"];
        r.estimates.sup_rh = e["sup_rh"];
        r.estimates.sup_Rh = e["sup_Rh"];
        r.estimates.sup_rho_m1 = e["sup_rho_m1"];
        r.estimates.sup_Ups = e["sup_Ups"];
        r.estimates.sup_G_pm1 = e["sup_G_pm1"];
        r.estimates.sup_phidot_dev = e["sup_phidot_dev"];
        r.estimates.bound_rhRh = e["bound_rhRh"];
        r.estimates.bound_inner = e["bound_inner"];
        r.estimates.bound_phidot = e["bound_phidot"];
        r.estimates.period_dev = e["period_dev"];
        r.estimates.period_bound = e["period_bound"];
        r.code_version = j["code_version"];
        r.config_hash_hex = j["config_hash"];
        return r;
    }

    /// Content-addressed file name from the defining parameters.
    std::string default_filename() const {
        nlohmann::json key = {{"mu", params.mu}, {"delta", params.delta}, {"epsilon", params.epsilon},
                              {"q", params.q},   {"branch", branch_name(branch)}};
        return "orbit_" + fnv1a_hex(key.dump()) + ".json";
    }
};

/// Cartesian primary positions at an arbitrary time (reduced mod the period).
inline PrimaryPositions primaries_at_time(const PeriodicOrbitRecord& rec, double t) {
    return primary_positions_from_elements(rec.params.mu, rec.params.delta, rec.elements_at(t));
}

/// PrimariesSource view over a record, for the RP4BP potential.
class RecordPrimaries final : public PrimariesSource {
public:
    explicit RecordPrimaries(const PeriodicOrbitRecord& rec) : rec_(&rec) {
        if (!rec.valid()) throw NumericalError("orbit record missing or malformed");
    }
    double period() const override { return rec_->period; }
    PrimaryElements elements(double t) const override { return rec_->elements_at(t); }

private:
    const PeriodicOrbitRecord* rec_;
};

}  // namespace rp4bp
