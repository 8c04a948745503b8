#include "test_helpers.hpp"

#include "rp4bp/integrate.hpp"
#include "rp4bp/parabola.hpp"

using namespace rp4bp;
using namespace rp4bp::testing;
using Catch::Approx;

TEST_CASE("circular Kepler orbit closes after 2 pi") {
    SystemParams p{0.0, 0.0, 0.1, 7};
    ChartState st(Chart::AsteroidCartesian, {1.0, 0.0, 0.0, 1.0, 0.0});
    Trajectory tr = integrate(p, st, SystemTag::AsteroidCartesian, {0.0, kTwoPi});
    auto y = tr.eval(kTwoPi);
    CHECK(std::abs(y[0] - 1.0) < 1e-8);
    CHECK(std::abs(y[1]) < 1e-8);
    CHECK(std::abs(y[2]) < 1e-8);
    CHECK(std::abs(y[3] - 1.0) < 1e-8);
}

TEST_CASE("parabola transit tracks the closed form") {
    SystemParams p{0.0, 0.0, 0.1, 7};
    double Psi0 = 3.0, psi0 = 0.7, s0 = 0.2;
    ParabolaPoint a = parabola_at_tau(psi0, Psi0, s0, -5.0, p.q);
    ParabolaPoint b = parabola_at_tau(psi0, Psi0, s0, +5.0, p.q);
    Trajectory tr = integrate(p, a.state, SystemTag::AsteroidMcGehee, {a.t, b.t});
    double worst = 0.0;
    for (int k = 0; k <= 400; ++k) {
        double tau = -5.0 + 10.0 * k / 400.0;
        ParabolaPoint ref = parabola_at_tau(psi0, Psi0, s0, tau, p.q);
        auto y = tr.eval(ref.t);
        for (int i = 0; i < 4; ++i) worst = std::max(worst, std::abs(y[i] - ref.state[i]));
    }
    CHECK(worst < 1e-7);
}

TEST_CASE("closed-form parabola satisfies the exact McGehee ODE") {
    SystemParams p{0.0, 0.0, 0.1, 9};
    for (double Psi0 : {2.0, 10.0}) {
        for (double tau : {-2.0, 0.0, 0.7, 3.0}) {
            ParabolaPoint pt = parabola_at_tau(1.1, Psi0, 0.4, tau, p.q);
            auto f = eval_vector_field(p, pt.state, SystemTag::AsteroidMcGehee);
            // derivative of the closed form w.r.t. tau, divided by dt/dtau
            double h = 1e-6;
            ParabolaPoint pp = parabola_at_tau(1.1, Psi0, 0.4, tau + h, p.q);
            ParabolaPoint pm = parabola_at_tau(1.1, Psi0, 0.4, tau - h, p.q);
            double dtdtau = 0.5 * Psi0 * Psi0 * Psi0 * (1.0 + tau * tau);
            for (int i = 0; i < 4; ++i) {
                double num = (pp.state[i] - pm.state[i]) / (2.0 * h) / dtdtau;
                CHECK(f[i] == Approx(num).margin(1e-9));
            }
        }
    }
    // residual of the analytic derivative itself
    double Psi0 = 10.0, tau = 0.7;
    ParabolaPoint pt = parabola_at_tau(0.0, Psi0, 0.0, tau, 9);
    auto f = eval_vector_field(p, pt.state, SystemTag::AsteroidMcGehee);
    double den = 1.0 + tau * tau;
    double dx = -4.0 * tau / (std::pow(Psi0, 4) * std::pow(den, 2.5));
    double dXi = 4.0 * (1.0 - tau * tau) / (std::pow(Psi0, 4) * std::pow(den, 3));
    double dpsi = 4.0 / (std::pow(Psi0, 3) * std::pow(den, 2));  // 2/(1+tau^2) / (dt/dtau)
    CHECK(std::abs(f[0] - dx) < 1e-12);
    CHECK(std::abs(f[1] - dXi) < 1e-12);
    CHECK(std::abs(f[2] - dpsi) < 1e-12);
    CHECK(std::abs(f[3]) < 1e-15);
}

TEST_CASE("tau_of_t inverts the cubic to 1e-13 relative") {
    CHECK(tau_of_t(1.7, 0.0) == 0.0);
    double Psi0 = 1.7;
    double t1 = 2.0 * std::pow(Psi0, 3) / 3.0;  // tau = 1
    CHECK(tau_of_t(Psi0, t1) == Approx(1.0).epsilon(1e-12));
    auto g = rng(13);
    for (int k = 0; k < 200; ++k) {
        double tau = uniform(g, -50.0, 50.0);
        double P = uniform(g, 0.5, 20.0);
        double back = tau_of_t(P, parabola_time(P, tau));
        CHECK(back == Approx(tau).epsilon(1e-13).margin(1e-13));
    }
    // large-t asymptotics tau ~ (6t/Psi0^3)^{1/3}
    double t = 1e6;
    CHECK(tau_of_t(1.0, t) == Approx(std::cbrt(6.0 * t)).epsilon(1e-3));
}

TEST_CASE("conserved quantities drift below 1e-9 relative") {
    SECTION("Kepler energy and Psi over one parabola transit") {
        SystemParams p{0.0, 0.0, 0.1, 7};
        ParabolaPoint a = parabola_at_tau(0.0, 2.5, 0.0, -6.0, p.q);
        Trajectory tr = integrate(p, a.state, SystemTag::AsteroidMcGehee,
                                  {a.t, parabola_time(2.5, 6.0)});
        double scale = 1.0;
        double e0 = kepler_energy_mcgehee(tr.state_at(tr.t_begin()));
        for (int k = 0; k <= 50; ++k) {
            double t = tr.t_begin() + (tr.t_end() - tr.t_begin()) * k / 50.0;
            ChartState st = tr.state_at(t);
            CHECK(std::abs(kepler_energy_mcgehee(st) - e0) < 1e-9 * scale);
            CHECK(std::abs(st[3] - 2.5) < 1e-9 * 2.5);
        }
    }
    SECTION("Jacobi constant of the RPC3BP over 10 periods") {
        SystemParams p{0.5, 0.0, 0.1, 7};
        // bounded orbit: xi = 6, circularish velocity
        ChartState polar(Chart::AsteroidPolar, {6.0, 0.0, 0.0, std::sqrt(6.0) * 0.95, 0.0});
        ChartState mc = apply({TransformName::McGehee, p}, polar);
        double Tkep = kTwoPi * std::pow(6.0, 1.5);
        CircularPrimaries src(p);
        Trajectory tr = integrate(p, mc, SystemTag::AsteroidMcGehee, {0.0, 10.0 * Tkep}, {}, &src);
        double j0 = jacobi_constant_mcgehee(p, tr.state_at(0.0));
        double worst = 0.0;
        for (int k = 0; k <= 100; ++k) {
            ChartState st(Chart::AsteroidMcGehee, tr.eval(10.0 * Tkep * k / 100.0));
            worst = std::max(worst, std::abs(jacobi_constant_mcgehee(p, st) - j0));
        }
        CHECK(worst / std::abs(j0) < 1e-8);
    }
    SECTION("energy of the delta = 0 comet system over 10 periods") {
        SystemParams p{0.5, 0.0, 0.1, 1000};
        ChartState st(Chart::CometPolar, {0.0, 0.0, 1.0, 0.0, 0.0, 1.0});
        double T = kTwoPi / (1.0 - 1e-3);
        Trajectory tr = integrate(p, st, SystemTag::CometPolarFull, {0.0, 10.0 * T});
        double h0 = eval_hamiltonian(p, tr.state_at(0.0), HamTag::CometPolarFull);
        double worst = 0.0;
        for (int k = 0; k <= 60; ++k) {
            double h = eval_hamiltonian(p, tr.state_at(10.0 * T * k / 60.0), HamTag::CometPolarFull);
            worst = std::max(worst, std::abs(h - h0));
        }
        CHECK(worst / std::abs(h0) < 1e-9);
    }
    SECTION("H_rot energy drift at small delta") {
        SystemParams p{0.5, 1e-8, 0.1, 1000};
        ChartState rot(Chart::RotatingPolar,
                       {1.0 + 1e-5, 1e-6, 0.0, p.alpha(), 100.0, 0.0, 0.0, 1e-9});
        Trajectory tr = integrate(p, rot, SystemTag::RotatingPolar3BP, {0.0, 10.0 * kTwoPi});
        double h0 = eval_hamiltonian(p, tr.state_at(0.0), HamTag::RotatingPolar3BP);
        double h1 = eval_hamiltonian(p, tr.state_at(10.0 * kTwoPi), HamTag::RotatingPolar3BP);
        CHECK(std::abs(h1 - h0) / std::abs(h0) < 1e-9);
    }
}

TEST_CASE("dense output accuracy at off-step points") {
    SystemParams p{0.5, 0.0, 0.1, 1000};
    ChartState st(Chart::CometPolar, {0.3, -0.2, 1.1, 0.2, 0.0, 1.0});
    IntegratorConfig cfg;
    Trajectory tr = integrate(p, st, SystemTag::CometPolarFull, {0.0, 20.0}, cfg);
    auto g = rng(31);
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
        double t = uniform(g, 0.5, 19.5);
        IntegratorConfig tight = cfg;
        tight.abs_tol = tight.rel_tol = 1e-14;
        Trajectory ref = integrate(p, st, SystemTag::CometPolarFull, {0.0, t}, tight);
        auto yd = tr.eval(t);
        auto yr = ref.eval(t);
        for (std::size_t i = 0; i < yd.size(); ++i) worst = std::max(worst, std::abs(yd[i] - yr[i]));
    }
    CHECK(worst < 10.0 * cfg.rel_tol * 10.0);  // 10x tolerance with O(state) ~ 10 scale
}

TEST_CASE("time reversal returns the initial state") {
    SystemParams p{0.5, 0.0, 0.1, 7};
    ChartState polar(Chart::AsteroidPolar, {6.0, 0.1, 0.3, 2.2, 0.0});
    ChartState mc = apply({TransformName::McGehee, p}, polar);
    Trajectory fwd = integrate(p, mc, SystemTag::AsteroidMcGehee, {0.0, 40.0});
    ChartState end(Chart::AsteroidMcGehee, fwd.eval(40.0));
    Trajectory bwd = integrate(p, end, SystemTag::AsteroidMcGehee, {40.0, 0.0});
    auto y0 = bwd.eval(0.0);
    for (int i = 0; i < 5; ++i) CHECK(std::abs(y0[i] - mc[i]) < 1e-8);
}

TEST_CASE("event crossings") {
    SECTION("linear scalar event") {
        SystemParams p{0.0, 0.0, 0.1, 7};
        ChartState st(Chart::AsteroidCartesian, {1.0, 0.0, 0.0, 1.0, 0.0});
        Trajectory tr = integrate(p, st, SystemTag::AsteroidCartesian, {0.0, kTwoPi});
        SectionEvent ev{[](double t, const std::vector<double>&) { return t - kPi; }, 0, "t=pi"};
        auto hits = event_crossing(tr, ev, 1e-11);
        REQUIRE(hits.size() == 1);
        CHECK(hits[0].t == Approx(kPi).margin(1e-10));
    }
    SECTION("stroboscopic events of sdot = nu") {
        SystemParams p{0.0, 0.0, 0.1, 2};  // T = 4 pi
        double s_start = 0.3;              // slightly past the section, so crossings are interior
        ChartState st(Chart::AsteroidMcGehee, {0.3, 0.0, 0.0, 3.0, s_start});
        double T = kTwoPi * 2.0;
        Trajectory tr = integrate(p, st, SystemTag::AsteroidMcGehee, {0.0, 3.2 * T});
        SectionEvent ev{[](double, const std::vector<double>& y) { return std::sin(0.5 * y[4]); }, 0, "s=0"};
        auto hits = event_crossing(tr, ev, 1e-11);
        REQUIRE(hits.size() == 3);
        double t_off = -s_start / (0.5);  // nu = 1/2
        for (std::size_t k = 0; k < hits.size(); ++k) {
            CHECK(hits[k].t == Approx((k + 1) * T + t_off).margin(1e-9));
            CHECK(hits[k].direction == (k % 2 == 0 ? -1 : 1));  // sin(s/2) alternates
        }
    }
}

TEST_CASE("excursion integrator: zones, conservation, and consistency") {
    SECTION("mu = 0: excursion path agrees with the plain path exactly") {
        SystemParams p{0.0, 0.0, 0.1, 7};
        ParabolaPoint a = parabola_at_tau(0.0, 3.0, 0.0, -1.0, p.q);
        ChartState st = a.state;
        double E_target = -0.5 * 0.02 * 0.02;
        st.coords[1] = -std::sqrt(st[1] * st[1] + 2.0 * E_target);
        double T = 1.05 * kTwoPi * std::pow(1.0 / (2.0 * std::abs(E_target)), 1.5);
        Trajectory sw = integrate_excursion(p, st, {0.0, T});
        IntegratorConfig plain;
        plain.chart_switch = false;
        plain.x_average = 0.0;  // no averaged zone either
        Trajectory pl = integrate(p, st, SystemTag::AsteroidMcGehee, {0.0, T}, plain);
        auto ya = sw.eval(T), yb = pl.eval(T);
        for (int i = 0; i < 5; ++i) CHECK(std::abs(ya[i] - yb[i]) < 1e-8 * (1.0 + std::abs(yb[i])));
    }
    SECTION("mu = 1/2: Jacobi constant survives a full far excursion") {
        SystemParams p{0.5, 0.0, 0.1, 7};
        ParabolaPoint a = parabola_at_tau(0.0, 3.0, 0.0, -1.0, p.q);
        ChartState st = a.state;
        double E_target = -0.5 * 0.02 * 0.02;
        st.coords[1] = -std::sqrt(st[1] * st[1] + 2.0 * E_target);
        double T = 1.1 * kTwoPi * std::pow(1.0 / (2.0 * std::abs(E_target)), 1.5);
        IntegratorConfig cfg;
        Trajectory sw = integrate_excursion(p, st, {0.0, T}, cfg);
        double xmin = 1.0;
        for (int k = 0; k <= 600; ++k) xmin = std::min(xmin, sw.eval(T * k / 600.0)[0]);
        CHECK(xmin < cfg.x_average);  // the averaged far zone was actually visited
        double j0 = jacobi_constant_mcgehee(p, sw.state_at(0.0));
        double worst = 0.0;
        for (int k = 0; k <= 100; ++k) {
            ChartState s(Chart::AsteroidMcGehee, sw.eval(T * k / 100.0));
            worst = std::max(worst, std::abs(jacobi_constant_mcgehee(p, s) - j0));
        }
        CHECK(worst / std::abs(j0) < 1e-8);
    }
}

TEST_CASE("near-collision run raises an error") {
    SystemParams p{0.5, 0.0, 0.1, 7};
    CircularPrimaries src(p);
    PrimaryPositions b = src.positions(p.mu, p.delta, 0.0);
    // released at rest just above Jupiter: free fall onto the primary
    ChartState st(Chart::AsteroidCartesian, {b.xJ[0] + 1e-4, b.xJ[1], 0.0, 0.0, 0.0});
    CHECK_THROWS(integrate(p, st, SystemTag::AsteroidCartesian, {0.0, 1.0}, {}, &src));
}
