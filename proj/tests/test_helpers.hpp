#pragma once

#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "rp4bp/hamiltonian.hpp"
#include "rp4bp/vector_field.hpp"

namespace rp4bp::testing {

inline std::mt19937_64 rng(unsigned seed = 20240817u) { return std::mt19937_64(seed); }

inline double uniform(std::mt19937_64& g, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(g);
}

/// Central finite-difference gradient of a Hamiltonian along one coordinate.
template <typename F>
double fd_partial(F&& f, std::vector<double> y, std::size_t i, double h_scale = 1e-6) {
    double h = h_scale * (1.0 + std::abs(y[i]));
    double orig = y[i];
    y[i] = orig + h;
    double fp = f(y);
    y[i] = orig - h;
    double fmv = f(y);
    return (fp - fmv) / (2.0 * h);
}

/// Symplectic-gradient consistency oracle: compares the hand-coded field with
/// Omega^{-1} dH evaluated by central finite differences of eval_hamiltonian.
/// `pairs` lists (position, momentum, weight) triples of the chart's 2-form,
/// i.e. the field must satisfy  qdot = dH/dp / w,  pdot = -dH/dq / w.
struct CanonicalPair {
    std::size_t q, p;
    double w = 1.0;  // coefficient of dq ^ dp; McGehee carries -4/x^3
};

inline double field_vs_fd_max_rel(const SystemParams& par, const ChartState& st, SystemTag sys, HamTag ham,
                                  const std::vector<CanonicalPair>& pairs, const PrimariesSource* src = nullptr,
                                  double h_scale = 1e-6) {
    std::vector<double> field = eval_vector_field(par, st, sys, src);
    auto H = [&](const std::vector<double>& y) {
        return eval_hamiltonian(par, ChartState(st.chart, y), ham, src);
    };
    double worst = 0.0;
    for (const auto& pr : pairs) {
        double dH_dp = fd_partial(H, st.coords, pr.p, h_scale);
        double dH_dq = fd_partial(H, st.coords, pr.q, h_scale);
        double scale = 1.0 + std::abs(field[pr.q]) + std::abs(field[pr.p]);
        worst = std::max(worst, std::abs(field[pr.q] - dH_dp / pr.w) / scale);
        worst = std::max(worst, std::abs(field[pr.p] + dH_dq / pr.w) / scale);
    }
    return worst;
}

}  // namespace rp4bp::testing
