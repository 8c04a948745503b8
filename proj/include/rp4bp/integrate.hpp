#pragma once

#include <boost/numeric/odeint.hpp>
#include <algorithm>
#include <functional>

#include "transforms.hpp"
#include "vector_field.hpp"

namespace rp4bp {

struct IntegratorConfig {
    double rel_tol = 1e-12;
    double abs_tol = 1e-12;
    double max_step = 1e7;
    int method_order = 8;  // RKF78 core; >= 7 required
    double event_tol = 1e-10;
    double initial_step = 1e-3;
    std::size_t max_steps = 4'000'000;
    // near-infinity chart switch for the asteroid systems
    bool chart_switch = true;
    double x_switch = 0.05;
    // excursion handling of the rotating-binary forcing (period ~ 2 pi in t):
    // below x_average the exact angle-averaged far field is used (Psi frozen);
    // above it the step size is capped so the forcing stays resolved.
    double x_average = 0.0316;   // xi ~ 2000, oscillation amplitude ~ mu/xi^3 < 1e-10
    double osc_step_cap = 0.5;

    void validate() const {
        if (!(rel_tol > 0.0 && abs_tol > 0.0 && event_tol > 0.0))
            throw std::invalid_argument("IntegratorConfig: tolerances must be positive");
        if (method_order < 7) throw std::invalid_argument("IntegratorConfig: method_order must be >= 7");
    }
};

namespace detail {

inline constexpr int kDenseNodes = 4;   // s = 0, 1/3, 2/3, 1
inline constexpr int kDenseCoeff = 8;   // septic Hermite: value + derivative per node

/// Coefficients of the degree-7 Hermite interpolant matching value and
/// derivative at s = 0, 1/3, 2/3, 1, keeping the interpolation error at the
/// same order as the RKF78 local error.
inline const Eigen::Matrix<double, 8, 8>& septic_basis_inverse() {
    static const Eigen::Matrix<double, 8, 8> inv = [] {
        Eigen::Matrix<double, 8, 8> M;
        const double nodes[4] = {0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0};
        for (int n = 0; n < 4; ++n) {
            double s = nodes[n];
            double pw = 1.0;
            for (int k = 0; k < 8; ++k, pw *= s) M(2 * n, k) = pw;
            M(2 * n + 1, 0) = 0.0;
            pw = 1.0;
            for (int k = 1; k < 8; ++k, pw *= s) M(2 * n + 1, k) = k * pw;
        }
        return Eigen::Matrix<double, 8, 8>(M.inverse());
    }();
    return inv;
}

}  // namespace detail

/// One dense-output segment: a septic per component on [t0, t0+h].
struct DenseSegment {
    double t0 = 0.0, h = 0.0;
    std::vector<double> coeff;  // dim x 8, row-major

    double eval(double t, std::size_t i) const {
        double s = (t - t0) / h;
        const double* c = &coeff[8 * i];
        double v = c[7];
        for (int k = 6; k >= 0; --k) v = v * s + c[k];
        return v;
    }
    double eval_deriv(double t, std::size_t i) const {
        double s = (t - t0) / h;
        const double* c = &coeff[8 * i];
        double v = 7.0 * c[7];
        for (int k = 6; k >= 1; --k) v = v * s + k * c[k];
        return v;
    }
};

/// Dense trajectory in a single chart.  Internal angle coordinates are kept
/// unwrapped; `state_at` returns the normalized representative.
class Trajectory {
public:
    Chart chart = Chart::AsteroidMcGehee;

    void reserve(std::size_t n) { segments_.reserve(n); }

    /// Node data: values y[4] and derivatives f[4] at s = 0, 1/3, 2/3, 1.
    void push_segment(double ta, double tb, const std::array<const std::vector<double>*, 4>& y,
                      const std::array<const std::vector<double>*, 4>& f) {
        std::size_t dim = y[0]->size();
        DenseSegment seg;
        seg.t0 = ta;
        seg.h = tb - ta;
        seg.coeff.resize(8 * dim);
        const auto& Minv = detail::septic_basis_inverse();
        Eigen::Matrix<double, 8, 1> rhs, c;
        for (std::size_t i = 0; i < dim; ++i) {
            rhs << (*y[0])[i], seg.h * (*f[0])[i], (*y[1])[i], seg.h * (*f[1])[i], (*y[2])[i], seg.h * (*f[2])[i],
                (*y[3])[i], seg.h * (*f[3])[i];
            c = Minv * rhs;
            for (int k = 0; k < 8; ++k) seg.coeff[8 * i + k] = c(k);
        }
        segments_.push_back(std::move(seg));
    }

    bool empty() const { return segments_.empty(); }
    std::size_t size() const { return segments_.size(); }
    const DenseSegment& segment(std::size_t k) const { return segments_[k]; }

    double t_begin() const { return segments_.front().t0; }
    double t_end() const { return segments_.back().t0 + segments_.back().h; }

    /// Raw (unwrapped) state at time t.
    std::vector<double> eval(double t) const {
        const DenseSegment& s = locate(t);
        std::size_t dim = s.coeff.size() / 8;
        std::vector<double> y(dim);
        for (std::size_t i = 0; i < dim; ++i) y[i] = s.eval(t, i);
        return y;
    }

    std::vector<double> eval_deriv(double t) const {
        const DenseSegment& s = locate(t);
        std::size_t dim = s.coeff.size() / 8;
        std::vector<double> y(dim);
        for (std::size_t i = 0; i < dim; ++i) y[i] = s.eval_deriv(t, i) / s.h;
        return y;
    }

    ChartState state_at(double t) const {
        ChartState st(chart, eval(t));
        st.normalize_angles();
        return st;
    }

    /// Sort/flip segments so that t0 is increasing (after backward runs).
    void orient() {
        if (segments_.size() > 1 && segments_.front().t0 > segments_.back().t0)
            std::reverse(segments_.begin(), segments_.end());
    }

private:
    std::vector<DenseSegment> segments_;

    const DenseSegment& locate(double t) const {
        if (empty()) throw NumericalError("empty trajectory");
        auto it = std::upper_bound(segments_.begin(), segments_.end(), t,
                                   [](double tv, const DenseSegment& s) { return tv < s.t0; });
        if (it != segments_.begin()) --it;
        // allow slight extrapolation at the ends
        return *it;
    }
};

namespace detail {

struct RawField {
    const SystemParams* p;
    SystemTag tag;
    const PrimariesSource* primaries;

    void operator()(const std::vector<double>& y, std::vector<double>& dy, double /*t*/) const {
        dy.resize(y.size());
        eval_field_raw(*p, tag, y.data(), dy.data(), y.size(), primaries);
    }
};

/// Systems whose fast forcing enters only through linearly evolving angles
/// (s, phi) give the step controller no error signal; their steps must stay
/// below the forcing period or the O(mu x^6)-size oscillations alias into
/// spurious drift of the conserved quantities.
inline double forcing_step_cap(SystemTag tag, const SystemParams& p, double configured) {
    bool forced = p.mu > 0.0 || p.delta > 0.0;
    switch (tag) {
        case SystemTag::AsteroidCartesian:
        case SystemTag::AsteroidPolar:
        case SystemTag::AsteroidMcGehee:
        case SystemTag::McGeheeModel:
        case SystemTag::QP:
            return forced ? configured : std::numeric_limits<double>::infinity();
        case SystemTag::CometPolarFull:
            return p.mu > 0.0 ? 0.8 * configured : std::numeric_limits<double>::infinity();
        default: return std::numeric_limits<double>::infinity();
    }
}

}  // namespace detail

/// Adaptive integration with dense output.  t_span may run backward
/// (t1 < t0); the stored segments are oriented with increasing time.
inline Trajectory integrate(const SystemParams& p, const ChartState& state0, SystemTag tag,
                            std::pair<double, double> t_span, const IntegratorConfig& cfg = {},
                            const PrimariesSource* primaries = nullptr) {
    cfg.validate();
    require_chart(state0, system_chart(tag), "integrate");
    namespace ode = boost::numeric::odeint;
    using state_t = std::vector<double>;

    detail::RawField rhs{&p, tag, primaries};
    auto stepper = ode::make_controlled(cfg.abs_tol, cfg.rel_tol, ode::runge_kutta_fehlberg78<state_t>());
    ode::runge_kutta_fehlberg78<state_t> plain;

    double t = t_span.first, t1 = t_span.second;
    double dir = (t1 >= t) ? 1.0 : -1.0;
    state_t y = state0.coords;
    state_t f0(y.size()), z1(y.size()), fz1(y.size()), z2(y.size()), fz2(y.size()), f1(y.size());
    rhs(y, f0, t);

    Trajectory traj;
    traj.chart = system_chart(tag);

    double dt = dir * std::min(cfg.initial_step, std::abs(t1 - t));
    std::size_t steps = 0;
    double cap = std::min(cfg.max_step, detail::forcing_step_cap(tag, p, cfg.osc_step_cap));
    while (dir * (t1 - t) > 0.0) {
        if (++steps > cfg.max_steps) throw NumericalError("integrate: max steps exceeded");
        if (std::abs(dt) > cap) dt = dir * cap;
        if (dir * (t + dt - t1) > 0.0) dt = t1 - t;
        double t_prev = t;
        state_t y_prev = y;
        int tries = 0;
        while (true) {
            ode::controlled_step_result res = stepper.try_step(rhs, y, t, dt);
            if (res == ode::success) break;
            if (++tries > 60 || std::abs(dt) < 1e-14 * (1.0 + std::abs(t)))
                throw NumericalError("integrate: step-size underflow (near-singular dynamics)");
        }
        double h = t - t_prev;
        // interior nodes at thirds for the septic interpolant
        z1 = y_prev;
        plain.do_step(rhs, z1, t_prev, h / 3.0);
        z2 = z1;
        plain.do_step(rhs, z2, t_prev + h / 3.0, h / 3.0);
        rhs(z1, fz1, t_prev + h / 3.0);
        rhs(z2, fz2, t_prev + 2.0 * h / 3.0);
        rhs(y, f1, t);
        if (h > 0.0)
            traj.push_segment(t_prev, t, {&y_prev, &z1, &z2, &y}, {&f0, &fz1, &fz2, &f1});
        else
            traj.push_segment(t, t_prev, {&y, &z2, &z1, &y_prev}, {&f1, &fz2, &fz1, &f0});
        f0 = f1;
    }
    traj.orient();
    return traj;
}

/// Fixed-step RKF78 endpoint map: smooth in the initial condition, which
/// keeps finite-difference flow Jacobians free of controller noise.
inline std::vector<double> integrate_fixed(const SystemParams& p, const std::vector<double>& y0, SystemTag tag,
                                           double t0, double t1, int n_steps,
                                           const PrimariesSource* primaries = nullptr) {
    namespace ode = boost::numeric::odeint;
    detail::RawField rhs{&p, tag, primaries};
    ode::runge_kutta_fehlberg78<std::vector<double>> plain;
    std::vector<double> y = y0;
    double h = (t1 - t0) / n_steps;
    for (int k = 0; k < n_steps; ++k) plain.do_step(rhs, y, t0 + k * h, h);
    return y;
}

// ---------------------------------------------------------------------------
// Event detection on dense output.
// ---------------------------------------------------------------------------

struct SectionEvent {
    std::function<double(double t, const std::vector<double>& y)> fn;
    int direction = 0;  // +1: increasing crossings, -1: decreasing, 0: both
    std::string name = "event";
};

struct EventHit {
    double t;
    ChartState state;
    int direction;
};

/// Locate sign changes of the event function along a trajectory, refining
/// each bracket on the dense output to cfg-level time tolerance.
inline std::vector<EventHit> event_crossing(const Trajectory& traj, const SectionEvent& ev, double event_tol = 1e-10) {
    std::vector<EventHit> hits;
    if (traj.empty()) return hits;
    const int kProbe = 8;
    auto value = [&](double t) { return ev.fn(t, traj.eval(t)); };
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const DenseSegment& s = traj.segment(k);
        double ta = s.t0, h = s.h;
        double prev_t = ta, prev_v = value(ta);
        for (int j = 1; j <= kProbe; ++j) {
            double tj = ta + h * j / kProbe;
            double vj = value(tj);
            if (k == 0 && j == 1 && prev_v == 0.0) {
                // the trajectory starts exactly on the section: not a return
                prev_t = tj;
                prev_v = vj;
                continue;
            }
            if (prev_v == 0.0 || (prev_v < 0.0) != (vj < 0.0)) {
                double lo = prev_t, hi = tj, vlo = prev_v;
                if (vlo == 0.0) {
                    hi = lo;
                } else {
                    for (int it = 0; it < 200 && (hi - lo) > event_tol; ++it) {
                        double mid = 0.5 * (lo + hi);
                        double vm = value(mid);
                        if ((vm < 0.0) == (vlo < 0.0)) {
                            lo = mid;
                            vlo = vm;
                        } else {
                            hi = mid;
                        }
                    }
                }
                double tr = 0.5 * (lo + hi);
                double slope = (value(std::min(tr + 10.0 * event_tol, traj.t_end())) -
                                value(std::max(tr - 10.0 * event_tol, traj.t_begin())));
                int dirn = slope > 0.0 ? +1 : -1;
                if (ev.direction == 0 || ev.direction == dirn) {
                    // skip duplicate roots at segment joints
                    if (hits.empty() || std::abs(hits.back().t - tr) > 10.0 * event_tol)
                        hits.push_back(EventHit{tr, traj.state_at(tr), dirn});
                }
            }
            prev_t = tj;
            prev_v = vj;
        }
    }
    return hits;
}

// ---------------------------------------------------------------------------
// Near-infinity excursion integrator.  Three zones by radial variable:
//   x >= x_switch           exact field, McGehee chart;
//   x_average <= x < x_switch  exact field, QP chart (polynomial degeneracy);
//   x < x_average           angle-averaged far field, QP chart.
// In the exact-field zones the step is capped so the rotating-binary forcing
// (period ~ 2 pi) stays resolved; skipping over it aliases the oscillating
// O(mu x^6) terms into spurious Psi drift.  Segments are always stored as
// McGehee data, so the caller sees a single chart.
// ---------------------------------------------------------------------------

inline Trajectory integrate_excursion(const SystemParams& p, const ChartState& state0,
                                      std::pair<double, double> t_span, const IntegratorConfig& cfg = {},
                                      const PrimariesSource* primaries = nullptr) {
    cfg.validate();
    require_chart(state0, Chart::AsteroidMcGehee, "integrate_excursion");
    namespace ode = boost::numeric::odeint;
    using state_t = std::vector<double>;

    TransformDescriptor qp_tr{TransformName::QPChart, p};
    auto to_qp = [&](const state_t& ym) {
        return detail::apply_impl(qp_tr, ChartState(Chart::AsteroidMcGehee, ym), Direction::Forward, false).coords;
    };
    auto from_qp = [&](const state_t& yq) {
        return detail::apply_impl(qp_tr, ChartState(Chart::QP, yq), Direction::Inverse, false).coords;
    };
    auto mc_field = [&](const state_t& ym, bool averaged) {
        state_t d(ym.size());
        eval_field_raw(p, averaged ? SystemTag::AsteroidMcGeheeAveraged : SystemTag::AsteroidMcGehee, ym.data(),
                       d.data(), ym.size(), primaries);
        return d;
    };

    detail::RawField rhs_mc{&p, SystemTag::AsteroidMcGehee, primaries};
    detail::RawField rhs_qp{&p, SystemTag::QP, primaries};
    detail::RawField rhs_qp_avg{&p, SystemTag::QPAveraged, primaries};
    auto stepper = ode::make_controlled(cfg.abs_tol, cfg.rel_tol, ode::runge_kutta_fehlberg78<state_t>());
    ode::runge_kutta_fehlberg78<state_t> plain;

    const bool forced = (p.mu > 0.0 || p.delta > 0.0);
    enum class Zone { Near, Mid, Far };
    auto zone_of = [&](double x, Zone cur) {
        // 5% hysteresis bands to avoid flip-flopping at the thresholds
        if (!cfg.chart_switch) return x < cfg.x_average ? Zone::Far : Zone::Near;
        switch (cur) {
            case Zone::Near: return x < cfg.x_switch ? (x < cfg.x_average ? Zone::Far : Zone::Mid) : Zone::Near;
            case Zone::Mid:
                if (x > 1.05 * cfg.x_switch) return Zone::Near;
                if (x < cfg.x_average) return Zone::Far;
                return Zone::Mid;
            case Zone::Far: return x > 1.05 * cfg.x_average ? (x >= cfg.x_switch ? Zone::Near : Zone::Mid) : Zone::Far;
        }
        return cur;
    };

    double t = t_span.first, t1 = t_span.second;
    double dir = (t1 >= t) ? 1.0 : -1.0;
    state_t y = state0.coords;  // always McGehee between steps
    Zone zone = zone_of(y[0], Zone::Near);

    Trajectory traj;
    traj.chart = Chart::AsteroidMcGehee;
    double dt = dir * std::min(cfg.initial_step, std::abs(t1 - t));
    std::size_t steps = 0;
    state_t f_cache = mc_field(y, zone == Zone::Far);
    while (dir * (t1 - t) > 0.0) {
        if (++steps > cfg.max_steps) throw NumericalError("integrate_excursion: max steps exceeded");
        double cap = cfg.max_step;
        if (forced && zone != Zone::Far) cap = std::min(cap, cfg.osc_step_cap);
        if (std::abs(dt) > cap) dt = dir * cap;
        if (dir * (t + dt - t1) > 0.0) dt = t1 - t;
        double t_prev = t;
        state_t ym_mc_prev = y;
        state_t f_prev = f_cache;

        bool use_qp = (zone != Zone::Near);
        bool averaged = (zone == Zone::Far);
        state_t yw = use_qp ? to_qp(y) : y;
        const detail::RawField& rhs = averaged ? rhs_qp_avg : (use_qp ? rhs_qp : rhs_mc);
        int tries = 0;
        while (true) {
            ode::controlled_step_result res = stepper.try_step(rhs, yw, t, dt);
            if (res == ode::success) break;
            if (++tries > 60 || std::abs(dt) < 1e-14 * (1.0 + std::abs(t)))
                throw NumericalError("integrate_excursion: step-size underflow");
        }
        double h = t - t_prev;
        state_t w1 = use_qp ? to_qp(ym_mc_prev) : ym_mc_prev;
        plain.do_step(rhs, w1, t_prev, h / 3.0);
        state_t w2 = w1;
        plain.do_step(rhs, w2, t_prev + h / 3.0, h / 3.0);
        state_t z1 = use_qp ? from_qp(w1) : w1;
        state_t z2 = use_qp ? from_qp(w2) : w2;
        state_t y_new = use_qp ? from_qp(yw) : yw;
        state_t fz1 = mc_field(z1, averaged);
        state_t fz2 = mc_field(z2, averaged);
        state_t f1 = mc_field(y_new, averaged);
        if (h > 0.0)
            traj.push_segment(t_prev, t, {&ym_mc_prev, &z1, &z2, &y_new}, {&f_prev, &fz1, &fz2, &f1});
        else
            traj.push_segment(t, t_prev, {&y_new, &z2, &z1, &ym_mc_prev}, {&f1, &fz2, &fz1, &f_prev});
        y = y_new;
        Zone nz = zone_of(y[0], zone);
        if (nz != zone) {
            zone = nz;
            f_cache = mc_field(y, zone == Zone::Far);
            dt = dir * std::min(std::abs(dt), cfg.osc_step_cap);
        } else {
            f_cache = f1;
        }
        if (!(y[0] > 0.0)) throw NumericalError("integrate_excursion: x left the chart (escape through x = 0?)");
    }
    traj.orient();
    return traj;
}

}  // namespace rp4bp
