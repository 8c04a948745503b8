#include "test_helpers.hpp"

#include "rp4bp/periodic.hpp"

using namespace rp4bp;
using namespace rp4bp::testing;
using Catch::Approx;

TEST_CASE("energy graph") {
    SystemParams p{0.5, 0.0, 0.1, 1000};
    SECTION("branch energies give G = +-1 at the unperturbed orbit") {
        EnergyLevel Ep = EnergyLevel::comet(Branch::Plus, 0.1);
        CHECK(energy_graph_G(p, Ep, kZstar, 0.0, true) == Approx(1.0).margin(1e-6));
        EnergyLevel Em = EnergyLevel::comet(Branch::Minus, 0.1);
        CHECK(energy_graph_G(p, Em, kZstar, 0.0, true) == Approx(-1.0).margin(1e-6));
    }
    SECTION("solved G restores the energy to 1e-12") {
        auto g = rng(41);
        EnergyLevel E = EnergyLevel::comet(Branch::Plus, 0.1);
        for (int k = 0; k < 30; ++k) {
            std::array<double, 4> z{uniform(g, -0.3, 0.3), uniform(g, -0.3, 0.3), uniform(g, 0.85, 1.15),
                                    uniform(g, -0.3, 0.3)};
            double phi = uniform(g, 0.0, kTwoPi);
            double G = energy_graph_G(p, E, z, phi, false);
            ChartState st(Chart::CometPolar, {z[0], z[1], z[2], z[3], phi, G});
            CHECK(std::abs(eval_hamiltonian(p, st, HamTag::CometPolarFull) - E.value) < 1e-12);
        }
    }
    SECTION("eps -> 0 collapse: G = -E") {
        SystemParams ps = p.with_epsilon(1e-5);
        EnergyLevel E{-0.7, Branch::Plus};
        CHECK(energy_graph_G(ps, E, kZstar, 0.0, true) == Approx(0.7).margin(1e-12));
    }
    SECTION("graph matches the expansion to O(eps^6)") {
        auto g = rng(43);
        double C_obs = 0.0;
        for (double eps : {0.05, 0.1, 0.2}) {
            SystemParams pe = p.with_epsilon(eps);
            EnergyLevel E = EnergyLevel::comet(Branch::Plus, eps);
            double worst = 0.0;
            for (int k = 0; k < 20; ++k) {
                std::array<double, 4> z{uniform(g, -0.3, 0.3), uniform(g, -0.3, 0.3), uniform(g, 0.85, 1.15),
                                        uniform(g, -0.3, 0.3)};
                double G = energy_graph_G(pe, E, z, 0.0, true);
                worst = std::max(worst, std::abs(G - energy_graph_expansion(pe, E, z)));
            }
            C_obs = std::max(C_obs, worst / std::pow(eps, 6));
            CHECK(worst < 10.0 * std::pow(eps, 6));
        }
        INFO("observed eps^6 coefficient " << C_obs);
        CHECK(C_obs < 10.0);
    }
    SECTION("no convergence outside the graph regime") {
        SystemParams pb = p.with_epsilon(0.6);
        EnergyLevel E{-40.0, Branch::Plus};  // no graph branch near G0 = 40 with eps^3 G^2/2 dominating
        std::array<double, 4> z{0.0, 0.0, 0.05, 0.0};
        CHECK_THROWS_AS(energy_graph_G(pb, E, z, 0.0, true), ConvergenceError);
    }
}

TEST_CASE("truncated section map fixes Z* and has the analytic multipliers") {
    SystemParams p{0.5, 0.0, 0.1, 1000};
    SECTION("Z* is fixed to 1e-10") {
        for (Branch b : {Branch::Plus, Branch::Minus}) {
            EnergyLevel E = EnergyLevel::comet(b, 0.1);
            SectionMapResult m = rectified_section_map(p, kZstar, E, true);
            for (int i = 0; i < 4; ++i) CHECK(std::abs(m.image[i] - kZstar[i]) < 1e-10);
            CHECK(m.return_time == Approx(kTwoPi / (1.0 - branch_sign(b) * 1e-3)).epsilon(1e-10));
        }
    }
    SECTION("multipliers match exp(+- i 2 pi eps^3/(-1 +- eps^3)) to 1e-6") {
        for (double eps : {0.05, 0.1, 0.2}) {
            for (Branch b : {Branch::Plus, Branch::Minus}) {
                SystemParams pe = p.with_epsilon(eps);
                EnergyLevel E = EnergyLevel::comet(b, eps);
                auto lam = section_multipliers(pe, kZstar, E, true);
                double e3 = eps * eps * eps;
                double omega = kTwoPi * e3 / std::abs(-1.0 + branch_sign(b) * e3);
                std::array<double, 4> expect_arg{-omega, -omega, omega, omega};
                for (int i = 0; i < 4; ++i) {
                    CHECK(std::abs(std::abs(lam[i]) - 1.0) < 1e-8);
                    CHECK(std::abs(std::arg(lam[i]) - expect_arg[i]) < 1e-6);
                }
            }
        }
    }
    SECTION("(I - DP0)^{-1} norm bounded by 2/eps^3") {
        for (double eps : {0.05, 0.1, 0.2}) {
            SystemParams pe = p.with_epsilon(eps);
            SamplingConstants c = estimate_constants(pe, Branch::Plus, {}, {}, 4);
            CHECK(c.inv_norm <= 2.0 / (eps * eps * eps));
            CHECK(c.inv_norm > 1.0);
        }
    }
}

TEST_CASE("map displacement oracle: ||P0(z) - z|| <= M0 eps^3 on the ball") {
    SystemParams p{0.5, 0.0, 0.1, 1000};
    double M0 = 0.0;
    for (double eps : {0.08, 0.1, 0.13}) {
        SamplingConstants c = estimate_constants(p.with_epsilon(eps), Branch::Plus, {}, {}, 10);
        M0 = std::max(M0, c.M0);
    }
    INFO("M0 = " << M0);
    CHECK(M0 < 1e3);
    CHECK(M0 > 0.1);  // the displacement really is of order eps^3
}

TEST_CASE("fixed points of the full map") {
    PeriodicConfig cfg;
    SECTION("delta = 0 truncated: Z* exactly") {
        SystemParams p{0.5, 0.0, 0.1, 1000};
        EnergyLevel E = EnergyLevel::comet(Branch::Plus, 0.1);
        FixedPointResult f = find_fixed_point(p, E, kZstar, true, cfg);
        for (int i = 0; i < 4; ++i) CHECK(std::abs(f.point[i] - kZstar[i]) < 1e-12);
    }
    SECTION("delta = 0 full: within the mu eps^4 ball, (r^, R^) = 0") {
        SystemParams p{0.5, 0.0, 0.1, 1000};
        EnergyLevel E = EnergyLevel::comet(Branch::Plus, 0.1);
        SamplingConstants c = estimate_constants(p, Branch::Plus, {0.0}, cfg, 8);
        FixedPointResult f = find_fixed_point(p, E, kZstar, false, cfg);
        CHECK(f.residual < 1e-11);
        double sigma = 4.0 * std::max(c.M1_map, 1.0) * c.inv_norm * std::pow(0.1, 3) * p.mu * std::pow(0.1, 7) /
                       std::pow(0.1, 3);
        // displacement of the inner pair stays within the amplified map perturbation
        CHECK(std::abs(f.point[2] - 1.0) < std::max(sigma, 1e-6));
        CHECK(std::abs(f.point[3]) < std::max(sigma, 1e-6));
        CHECK(std::abs(f.point[0]) < 1e-10);
        CHECK(std::abs(f.point[1]) < 1e-10);
    }
    SECTION("delta = 1e-10: Newton converges quadratically from a coarse start") {
        SystemParams p{0.5, 1e-10, 0.1, 1000};
        EnergyLevel E = EnergyLevel::comet(Branch::Plus, 0.1);
        std::array<double, 4> z0{0.08, -0.05, 1.07, 0.05};
        FixedPointResult f = find_fixed_point(p, E, z0, false, cfg);
        CHECK(f.residual < 1e-11);
        CHECK(f.iterations <= 10);
        // convergence-order check on the residual history
        const auto& r = f.residual_history;
        REQUIRE(r.size() >= 3);
        for (std::size_t k = 0; k + 1 < r.size(); ++k) {
            if (r[k] < 1e-11 || r[k + 1] < 5e-13) continue;
            CHECK(r[k + 1] < 0.3 * r[k]);  // at least strongly superlinear above the noise floor
        }
        bool quadratic_window = false;
        for (std::size_t k = 0; k + 1 < r.size(); ++k)
            if (r[k] < 1e-2 && r[k] > 1e-10 && r[k + 1] < 3.0 * r[k] * r[k] / std::max(r[0], 1e-2))
                quadratic_window = true;
        CHECK(quadratic_window);
    }
    SECTION("contraction-map fallback agrees with Newton") {
        SystemParams p{0.5, 1e-12, 0.1, 1000};
        EnergyLevel E = EnergyLevel::comet(Branch::Plus, 0.1);
        FixedPointResult fn = find_fixed_point(p, E, kZstar, false, cfg);
        FixedPointResult fc = contraction_fixed_point(p, E, cfg);
        CHECK(fc.residual < 1e-10);
        for (int i = 0; i < 4; ++i) CHECK(std::abs(fc.point[i] - fn.point[i]) < 1e-9);
    }
}

TEST_CASE("rotation ratio") {
    PeriodicConfig cfg;
    SECTION("delta = 0: thetadot == 1, so R = 2 pi / T^ exactly") {
        // (mu = 0 itself degenerates the rotator, alpha = 0; the identity
        // thetadot == 1 needs only delta = 0)
        SystemParams p{0.5, 0.0, 0.1, 1000};
        EnergyLevel E = EnergyLevel::comet(Branch::Plus, 0.1);
        FixedPointResult f = find_fixed_point(p, E, kZstar, false, cfg);
        double Th = 0.0;
        double R = rotation_ratio(p, f.point, E, false, cfg, &Th);
        CHECK(R == Approx(kTwoPi / Th).epsilon(1e-12));
        SystemParams p0{0.0, 0.0, 0.1, 1000};
        CHECK_THROWS_AS(rectified_section_map(p0, kZstar, E, true, cfg), DomainError);
    }
    SECTION("delta = 0, eps = 0.1, branch +: R = 1 - 1e-3 + O(1e-7)") {
        SystemParams p{0.5, 0.0, 0.1, 1000};
        EnergyLevel E = EnergyLevel::comet(Branch::Plus, 0.1);
        FixedPointResult f = find_fixed_point(p, E, kZstar, false, cfg);
        double R = rotation_ratio(p, f.point, E, false, cfg);
        CHECK(std::abs(R - (1.0 - 1e-3)) < 1e-6);
    }
    SECTION("delta = 1e-10: |R - (1 -+ eps^3)| <= K sqrt(delta/eps)") {
        SystemParams p{0.5, 1e-10, 0.1, 1000};
        for (Branch b : {Branch::Plus, Branch::Minus}) {
            EnergyLevel E = EnergyLevel::comet(b, 0.1);
            FixedPointResult f = find_fixed_point(p, E, kZstar, false, cfg);
            double R = rotation_ratio(p, f.point, E, false, cfg);
            CHECK(std::abs(R - (1.0 - branch_sign(b) * 1e-3)) < 1.0 * std::sqrt(1e-10 / 0.1) + 1e-6);
        }
    }
}

TEST_CASE("admissible resonance window") {
    auto [lo, hi] = admissible_q_window(0.16);
    CHECK(lo == 326);
    CHECK(hi == 651);
    // the endpoints really honor the rational-target interval of branch +
    double e03 = std::pow(0.16, 3);
    CHECK((lo - 1.0) / lo >= 1.0 - 0.75 * e03 - 1e-12);
    CHECK((lo - 1.0) / lo <= 1.0 - 0.375 * e03 + 1e-12);
    CHECK(488 >= lo);
    CHECK(488 <= hi);
}

TEST_CASE("epsilon tuning hits the rational target") {
    PeriodicConfig cfg;
    SECTION("delta = 0, q = 1000: eps_tuned near 1/10") {
        SystemParams p{0.5, 0.0, 0.12, 1000};
        TuneResult t = tune_epsilon(p, Branch::Plus, 1000, cfg);
        CHECK(t.ratio_residual < 1e-10);
        CHECK(std::abs(t.epsilon - 0.1) < 1e-3);
        CHECK(t.monotone);
        CHECK(t.epsilon > 9.0 * 0.12 / 16.0);
        CHECK(t.epsilon < 15.0 * 0.12 / 16.0);
    }
    SECTION("out-of-range target is rejected") {
        SystemParams p{0.5, 0.0, 0.12, 1000};
        CHECK_THROWS_AS(tune_epsilon(p, Branch::Plus, 40, cfg), DomainError);
    }
}

TEST_CASE("assembled record at delta = 0 is the circular limit") {
    PeriodicConfig cfg;
    SystemParams p0{0.5, 0.0, 0.16, 326};
    PeriodicPipelineResult pr = compute_periodic_orbit(p0, Branch::Plus, cfg, 326);
    const PeriodicOrbitRecord& rec = pr.record;
    CHECK(rec.closure_residual < 1e-8);
    CHECK(rec.rot_num == 325);
    CHECK(rec.rot_den == 326);
    CHECK(rec.estimates.period_dev < 1e-9);  // T = 2 pi q exactly at delta = 0
    CHECK(rec.estimates.all_hold(cfg.bound_floor));
    // r == 1, R == 0, p2 == 0, thetadot == 1
    for (std::size_t k = 0; k < rec.sample_t.size(); k += 7) {
        const auto& s = rec.sample_state[k];
        CHECK(s[0] == Approx(1.0).margin(1e-14));
        CHECK(std::abs(s[1]) < 1e-14);
        CHECK(std::abs(s[6]) < 1e-20);
        CHECK(std::abs(s[7]) < 1e-20);
        // |q2| in the 1/eps^2 band
        double q2n = std::hypot(s[4], s[5]);
        double e2 = rec.epsilon_tuned * rec.epsilon_tuned;
        CHECK(std::abs(q2n - 1.0 / e2) <
              (cfg.M1_bound * (p0.mu * std::pow(rec.epsilon_tuned, 4)) + 1e-9) / e2);
    }
    CHECK(rec.aux.a_theta == Approx(1.0).epsilon(1e-10));  // thetadot == 1 at delta = 0
    for (std::size_t k = 0; k < rec.aux.size(); k += 97) CHECK(std::abs(rec.aux.theta_res[k]) < 1e-8);

    SECTION("serialization round-trips bit-identically") {
        nlohmann::json j = rec.to_json();
        PeriodicOrbitRecord back = PeriodicOrbitRecord::from_json(nlohmann::json::parse(j.dump()));
        CHECK(back.to_json().dump() == j.dump());
        CHECK(std::memcmp(&back.period, &rec.period, sizeof(double)) == 0);
    }
    SECTION("primaries from the record") {
        // delta = 0: x_S = -mu (cos theta, sin theta), |x_S| = mu
        auto g = rng(77);
        for (int k = 0; k < 50; ++k) {
            double t = uniform(g, 0.0, rec.period);
            PrimaryPositions b = primaries_at_time(rec, t);
            CHECK(norm(b.xS) == Approx(p0.mu).margin(1e-9));
            Vec2 cm = (1.0 - p0.mu) * b.xS + p0.mu * b.xJ + 0.0 * b.xP;
            CHECK(norm(cm) < 1e-9);
        }
        // periodicity: t and t + T agree (reduction happens first, exactly)
        PrimaryPositions b1 = primaries_at_time(rec, 17.17);
        PrimaryPositions b2 = primaries_at_time(rec, 17.17 + rec.period);
        CHECK(norm(b1.xS - b2.xS) < 1e-9);
        CHECK(norm(b1.xP - b2.xP) < 1e-9);
    }
}

TEST_CASE("rectified section return located by events on the time flow") {
    SystemParams p{0.5, 0.0, 0.1, 1000};
    EnergyLevel E = EnergyLevel::comet(Branch::Plus, 0.1);
    double G0 = energy_graph_G(p, E, kZstar, 0.0, true);
    ChartState st(Chart::CometPolar, {0.0, 0.0, 1.0, 0.0, 0.0, G0});
    double That = kTwoPi / (1.0 - 1e-3);
    Trajectory tr = integrate(p, st, SystemTag::CometPolarTruncated, {0.0, 1.5 * That});
    SectionEvent ev{[](double, const std::vector<double>& y) { return std::sin(0.5 * y[4]); }, 0, "phi=0"};
    auto hits = event_crossing(tr, ev, 1e-11);
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].t == Approx(That).epsilon(1e-9));
    // the rectified-flow parameter advance at the first return is 2 pi
    CHECK(tr.eval(hits[0].t)[4] == Approx(-kTwoPi).margin(1e-9));
}
