#pragma once

#include <random>

#include "rp4bp/transforms.hpp"

namespace rp4bp::testing {

/// Domain-respecting random states for each transform's source chart.
/// Reduction constraints (vanishing total momentum, center of mass at the
/// origin, the theta = 0 / Omega = alpha slice) are built in where the
/// transform requires them.
inline ChartState random_source_state(TransformName t, const SystemParams& p, std::mt19937_64& g) {
    auto U = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(g); };
    auto jacobi_like = [&](bool zero_P0) {
        Vec2 Q1{U(-1.5, 1.5), U(-1.5, 1.5)};
        if (norm(Q1) < 0.3) Q1[0] += 0.5;
        Vec2 Q2{U(2.0, 5.0), U(-3.0, 3.0)};
        Vec2 P1{U(-0.5, 0.5), U(-0.5, 0.5)}, P2{U(-0.2, 0.2), U(-0.2, 0.2)};
        Vec2 P0 = zero_P0 ? Vec2{0.0, 0.0} : Vec2{U(-0.3, 0.3), U(-0.3, 0.3)};
        Vec2 Q0 = (-p.mu) * Q1 - (p.delta / (1.0 + p.delta)) * Q2;
        return ChartState(Chart::Jacobi, {Q0[0], Q0[1], Q1[0], Q1[1], Q2[0], Q2[1], P0[0], P0[1], P1[0], P1[1],
                                          P2[0], P2[1]});
    };
    switch (t) {
        case TransformName::Identity:
            return ChartState(Chart::AsteroidMcGehee, {U(0.05, 0.5), U(-0.3, 0.3), U(0, kTwoPi), U(2, 8), U(0, kTwoPi)});
        case TransformName::Jacobi: {
            ChartState j = jacobi_like(false);
            return detail::apply_impl(TransformDescriptor{TransformName::Jacobi, p}, j, Direction::Inverse, false);
        }
        case TransformName::Polar1: return jacobi_like(false);
        case TransformName::Hadjidemetriou: {
            ChartState j = jacobi_like(true);
            return detail::apply_impl(TransformDescriptor{TransformName::Polar1, p}, j, Direction::Forward, false);
        }
        case TransformName::CartesianPullback:
        case TransformName::Rescale1: {
            bool slice = (t == TransformName::Rescale1);
            double r = U(0.8, 1.2), R = U(-0.3, 0.3);
            double theta = slice ? 0.0 : U(0.1, kTwoPi - 0.1);
            double Omega = slice ? p.alpha() : U(-1.0, 1.0);
            return ChartState(Chart::RotatingPolar,
                              {r, R, theta, Omega, U(2.0, 5.0), U(-3.0, 3.0), U(-0.2, 0.2), U(-0.2, 0.2)});
        }
        case TransformName::Rescale2:
            return ChartState(Chart::RescaledTilde,
                              {U(-1, 1), U(-1, 1), U(2.0, 5.0), U(-3.0, 3.0), U(-0.5, 0.5), U(-0.5, 0.5)});
        case TransformName::CometPolar:
            return ChartState(Chart::RescaledHat,
                              {U(-1, 1), U(-1, 1), U(0.6, 1.8), U(-1.0, 1.0), U(-1.0, 1.0), U(-1.0, 1.0)});
        case TransformName::AsteroidPolar:
            return ChartState(Chart::AsteroidCartesian,
                              {U(2.0, 20.0), U(-10.0, 10.0), U(-0.5, 0.5), U(-0.5, 0.5), U(0, kTwoPi)});
        case TransformName::McGehee:
            return ChartState(Chart::AsteroidPolar, {U(5.0, 200.0), U(-0.4, 0.4), U(0, kTwoPi), U(2, 8), U(0, kTwoPi)});
        case TransformName::QPChart:
            return ChartState(Chart::AsteroidMcGehee, {U(0.02, 0.6), U(-0.3, 0.3), U(0, kTwoPi), U(2, 8), U(0, kTwoPi)});
    }
    throw std::logic_error("random_source_state: unhandled transform");
}

/// Max componentwise round-trip error, angles compared on the circle.
inline double roundtrip_error(const TransformDescriptor& d, const ChartState& st) {
    ChartState back = apply(d, apply(d, st, Direction::Forward), Direction::Inverse);
    auto angles = chart_angle_indices(st.chart);
    double worst = 0.0;
    for (std::size_t i = 0; i < st.size(); ++i) {
        bool ang = false;
        for (auto a : angles) ang = ang || (a == i);
        double diff = ang ? std::abs(wrap_pm(back[i] - st[i])) : std::abs(back[i] - st[i]);
        worst = std::max(worst, diff / (1.0 + std::abs(st[i])));
    }
    return worst;
}

inline const std::vector<TransformName>& certified_transforms() {
    static const std::vector<TransformName> v = {
        TransformName::Jacobi,   TransformName::Polar1,     TransformName::Hadjidemetriou,
        TransformName::CartesianPullback, TransformName::Rescale1, TransformName::Rescale2,
        TransformName::CometPolar, TransformName::AsteroidPolar, TransformName::McGehee};
    return v;
}

}  // namespace rp4bp::testing
