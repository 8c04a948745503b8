#include "test_helpers.hpp"
#include "state_gen.hpp"

using namespace rp4bp;
using namespace rp4bp::testing;
using Catch::Approx;

TEST_CASE("Jacobi forward on coincident primaries") {
    SystemParams p{0.4, 1e-3, 0.1, 500};
    ChartState st(Chart::CartesianSixBody, {0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0});
    ChartState j = apply({TransformName::Jacobi, p}, st);
    CHECK(j[2] == Approx(0.0).margin(1e-15));  // Q1
    CHECK(j[3] == Approx(0.0).margin(1e-15));
    CHECK(j[4] == Approx(1.0).margin(1e-15));  // Q2
    CHECK(j[5] == Approx(0.0).margin(1e-15));
}

TEST_CASE("Cartesian pull-back of a rotating-frame state") {
    double a = 3.7, delta = 2e-3, mu = 0.31;
    SystemParams p{mu, delta, 0.1, 500};
    ChartState rot(Chart::RotatingPolar, {1.0, 0.0, 0.0, p.alpha(), a, 0.0, 0.0, 0.0});
    ChartState c = apply({TransformName::CartesianPullback, p}, rot);
    CHECK(c[4] == Approx(a / (1.0 + delta)).margin(1e-14));  // x_P
    CHECK(c[5] == Approx(0.0).margin(1e-14));
    CHECK(c[0] == Approx(-mu - delta * a / (1.0 + delta)).margin(1e-14));  // x_S
    CHECK(c[1] == Approx(0.0).margin(1e-14));
    // center of mass and total momentum vanish
    Vec2 cm = (1 - mu) * Vec2{c[0], c[1]} + mu * Vec2{c[2], c[3]} + delta * Vec2{c[4], c[5]};
    CHECK(norm(cm) < 1e-14);
    CHECK(std::abs(c[6] + c[8] + c[10]) < 1e-14);
    CHECK(std::abs(c[7] + c[9] + c[11]) < 1e-14);
}

TEST_CASE("McGehee map and inverse") {
    SystemParams p{0.5, 0.0, 0.1, 500};
    ChartState st(Chart::AsteroidPolar, {200.0, 0.1, 1.0, 5.0, 0.3});
    ChartState m = apply({TransformName::McGehee, p}, st);
    CHECK(m[0] == Approx(0.1).margin(1e-15));
    ChartState back = apply({TransformName::McGehee, p}, m, Direction::Inverse);
    CHECK(back[0] == Approx(200.0).margin(1e-10));
}

TEST_CASE("round trips: forward then inverse is the identity") {
    SystemParams p{0.37, 1e-4, 0.12, 700};
    auto g = rng(99);
    std::vector<TransformName> all = certified_transforms();
    all.push_back(TransformName::QPChart);
    all.push_back(TransformName::Identity);
    for (TransformName t : all) {
        double worst = 0.0;
        for (int k = 0; k < 200; ++k) {
            ChartState st = random_source_state(t, p, g);
            worst = std::max(worst, roundtrip_error({t, p}, st));
        }
        INFO("transform " << transform_name(t));
        CHECK(worst < 1e-12);
    }
}

TEST_CASE("conformal symplecticity certificates") {
    auto g = rng(5);
    SECTION("declared factors at random regular states") {
        SystemParams p{0.37, 1e-4, 0.12, 700};
        for (TransformName t : certified_transforms()) {
            double worst = 0.0;
            for (int k = 0; k < 40; ++k) {
                ChartState st = random_source_state(t, p, g);
                worst = std::max(worst, symplectic_residual({t, p}, st));
            }
            INFO("transform " << transform_name(t));
            CHECK(worst < 1e-8);
        }
    }
    SECTION("identity is exact") {
        SystemParams p{0.37, 1e-4, 0.12, 700};
        ChartState st = random_source_state(TransformName::Identity, p, g);
        CHECK(symplectic_residual({TransformName::Identity, p}, st) == 0.0);
    }
    SECTION("QPChart carries no certificate") {
        SystemParams p{0.37, 1e-4, 0.12, 700};
        ChartState st = random_source_state(TransformName::QPChart, p, g);
        CHECK_THROWS_AS(symplectic_residual({TransformName::QPChart, p}, st), DomainError);
    }
}

TEST_CASE("composite chain Cartesian -> CometPolar and back") {
    SystemParams p{0.29, 5e-5, 0.14, 600};
    auto g = rng(21);
    TransformDescriptor chain[] = {{TransformName::Jacobi, p},
                                   {TransformName::Polar1, p},
                                   {TransformName::Hadjidemetriou, p},
                                   {TransformName::Rescale1, p},
                                   {TransformName::Rescale2, p},
                                   {TransformName::CometPolar, p}};
    for (int k = 0; k < 100; ++k) {
        // a state on the reduced slice: theta = 0, Omega = alpha
        ChartState rot = random_source_state(TransformName::Rescale1, p, g);
        ChartState cart = apply({TransformName::CartesianPullback, p}, rot);
        ChartState st = cart;
        for (auto& d : chain) st = apply(d, st);
        REQUIRE(st.chart == Chart::CometPolar);
        for (int i = 5; i >= 0; --i) st = apply(chain[i], st, Direction::Inverse);
        REQUIRE(st.chart == Chart::CartesianSixBody);
        double worst = 0.0;
        for (std::size_t i = 0; i < 12; ++i)
            worst = std::max(worst, std::abs(st[i] - cart[i]) / (1.0 + std::abs(cart[i])));
        CHECK(worst < 1e-10);
    }
}

TEST_CASE("domain errors") {
    SystemParams p{0.3, 1e-4, 0.1, 500};
    ChartState bad_polar(Chart::AsteroidPolar, {-1.0, 0, 0, 5, 0});
    CHECK_THROWS_AS(apply({TransformName::McGehee, p}, bad_polar), DomainError);
    ChartState rot(Chart::RotatingPolar, {1.0, 0.0, 0.5, p.alpha(), 3, 0, 0, 0});
    CHECK_THROWS_AS(apply({TransformName::Rescale1, p}, rot), DomainError);  // theta != 0
    ChartState wrong(Chart::CometPolar, {0, 0, 1, 0, 0, 1});
    CHECK_THROWS_AS(apply({TransformName::McGehee, p}, wrong), ChartMismatchError);
    SystemParams d0 = p.with_delta(0.0);
    ChartState ok(Chart::RotatingPolar, {1.0, 0.0, 0.0, d0.alpha(), 3, 0, 0, 0});
    CHECK_THROWS_AS(apply({TransformName::Rescale1, d0}, ok), DomainError);  // delta = 0 rescale undefined
}
