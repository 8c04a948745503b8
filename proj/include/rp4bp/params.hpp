#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace rp4bp {

/// Sun/Jupiter mass ratio mu, planet mass delta, comet rescaling epsilon,
/// resonance integer q.  alpha = mu*(1-mu) is always recomputed.
struct SystemParams {
    double mu = 0.5;
    double delta = 0.0;
    double epsilon = 0.1;
    int q = 1000;

    double alpha() const { return mu * (1.0 - mu); }

    void validate() const {
        if (!(mu >= 0.0 && mu <= 0.5))
            throw std::invalid_argument("SystemParams: mu must lie in [0, 1/2]");
        if (!(delta >= 0.0))
            throw std::invalid_argument("SystemParams: delta must be >= 0");
        if (!(epsilon > 0.0 && epsilon < 1.0))
            throw std::invalid_argument("SystemParams: epsilon must lie in (0,1)");
        if (q < 2)
            throw std::invalid_argument("SystemParams: q must be an integer >= 2");
    }

    SystemParams with_epsilon(double eps) const {
        SystemParams p = *this;
        p.epsilon = eps;
        return p;
    }
    SystemParams with_delta(double d) const {
        SystemParams p = *this;
        p.delta = d;
        return p;
    }

    /// sqrt(delta/epsilon), the small factor of both rescaling remainders.
    double u() const { return std::sqrt(delta / epsilon); }
};

enum class Branch { Plus, Minus };

inline double branch_sign(Branch b) { return b == Branch::Plus ? +1.0 : -1.0; }
inline const char* branch_name(Branch b) { return b == Branch::Plus ? "plus" : "minus"; }

/// Energy level of a comet-type system; for the truncated system the branch
/// pins value = -(sign) - eps^3/2.
struct EnergyLevel {
    double value = 0.0;
    Branch branch = Branch::Plus;

    static EnergyLevel comet(Branch b, double eps) {
        return EnergyLevel{-branch_sign(b) - 0.5 * eps * eps * eps, b};
    }
};

// Error taxonomy shared by all evaluation and solver layers.
struct CollisionError : std::runtime_error {
    explicit CollisionError(const std::string& m) : std::runtime_error(m) {}
};
struct ChartMismatchError : std::runtime_error {
    explicit ChartMismatchError(const std::string& m) : std::runtime_error(m) {}
};
struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& m) : std::runtime_error(m) {}
};
struct ConvergenceError : std::runtime_error {
    explicit ConvergenceError(const std::string& m) : std::runtime_error(m) {}
};
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& m) : std::runtime_error(m) {}
};

/// Separations below this raise CollisionError instead of regularizing.
inline constexpr double kCollisionFloor = 1e-8;

/// Gate for operations that assume the perturbative regime delta <= delta1 * eps^7.
/// delta1 is far larger than the sufficient constant of the contraction argument,
/// which would exclude parameter ranges that converge fine numerically.
inline void require_perturbative(const SystemParams& p, double delta1 = 0.1) {
    if (p.delta > delta1 * std::pow(p.epsilon, 7))
        throw DomainError("parameters outside perturbative regime: delta > delta1*eps^7 (delta=" +
                          std::to_string(p.delta) + ", eps=" + std::to_string(p.epsilon) + ")");
}

inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Representative in [0, 2pi).
inline double wrap_angle(double a) {
    double w = std::fmod(a, kTwoPi);
    if (w < 0.0) w += kTwoPi;
    if (w == kTwoPi) w = 0.0;
    return w;
}

/// Signed representative in (-pi, pi].
inline double wrap_pm(double a) {
    double w = std::fmod(a, kTwoPi);
    if (w > kPi) w -= kTwoPi;
    if (w <= -kPi) w += kTwoPi;
    return w;
}

}  // namespace rp4bp
