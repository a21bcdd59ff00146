#pragma once

// Resilient control-update policies.
//
//   EventTime   : wait for ||e|| = sigma ||x||; fall back to period delta1 after
//                 a missing acknowledgment or when x(t_k) = 0.
//   PureTime    : period delta2 after a success, delta1 after a failure.
//   SelfTrigger : t_{k+1} = t_k + delta2 - (delta2 - delta1) varphi(||chi||),
//                 chi being the model-based prediction of x(t_k).
//   IdealEvent  : event rule with infinitely fast retries under DoS (the
//                 simulator retries at the instant the jamming interval ends).
//
// delta2 is bounded by the time the scalar Riccati solution
//   phi' = |Phi| + (|Phi| + |BK|) phi + |BK| phi^2,  phi(0) = 0
// takes to reach sigma; that time lower-bounds event-triggered inter-sample times.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "dosres/plant.hpp"

namespace dosres {

enum class LogicKind { EventTime, PureTime, SelfTrigger, IdealEvent };

inline const char* to_string(LogicKind kind) {
    switch (kind) {
        case LogicKind::EventTime: return "event_time";
        case LogicKind::PureTime: return "pure_time";
        case LogicKind::SelfTrigger: return "self_trigger";
        case LogicKind::IdealEvent: return "ideal_event";
    }
    return "unknown";
}

/// Class-K map into [0, 1] used by the self-triggered rule.
struct Varphi {
    enum class Kind { Zero, SaturatedLinear };

    Kind kind = Kind::Zero;
    double scale = 0.0;  // slope of the linear part

    [[nodiscard]] double operator()(double s) const {
        if (kind == Kind::Zero) return 0.0;
        return std::min(1.0, scale * std::max(0.0, s));
    }

    static Varphi zero() { return {}; }
    static Varphi saturated_linear(double scale) {
        if (!(scale > 0.0) || !std::isfinite(scale)) throw InputError("Varphi: scale must be positive");
        return {Kind::SaturatedLinear, scale};
    }

    friend bool operator==(const Varphi&, const Varphi&) = default;
};

struct TriggerConfig {
    double sigma = 0.1;
    double delta1 = 0.01;
    double delta2 = 0.01;
    Varphi varphi;

    void validate() const {
        if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InputError("TriggerConfig: sigma must be positive");
        if (!(delta1 > 0.0)) throw InputError("TriggerConfig: delta1 must be positive");
        if (!(delta2 >= delta1) || !std::isfinite(delta2)) {
            throw InputError("TriggerConfig: need 0 < delta1 <= delta2");
        }
    }

    friend bool operator==(const TriggerConfig&, const TriggerConfig&) = default;
};

namespace detail {

inline double riccati_rhs(double phi, double a, double b) { return a + (a + b) * phi + b * phi * phi; }

inline double riccati_rk4(double phi, double h, double a, double b) {
    const double k1 = riccati_rhs(phi, a, b);
    const double k2 = riccati_rhs(phi + 0.5 * h * k1, a, b);
    const double k3 = riccati_rhs(phi + 0.5 * h * k2, a, b);
    const double k4 = riccati_rhs(phi + h * k3, a, b);
    return phi + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace detail

/// Time at which phi' = a + (a + b) phi + b phi^2, phi(0) = 0 reaches sigma,
/// with a = ||Phi||, b = ||BK||. Step-doubling RK4, then bisection on the
/// length of the final step.
inline double riccati_delta2(double phi_norm, double bk_norm, double sigma) {
    if (!(phi_norm > 0.0) || !std::isfinite(phi_norm)) throw InputError("riccati_delta2: phi_norm must be positive");
    if (!(bk_norm >= 0.0) || !std::isfinite(bk_norm)) throw InputError("riccati_delta2: bk_norm must be >= 0");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InputError("riccati_delta2: sigma must be positive");

    const double a = phi_norm;
    const double b = bk_norm;
    constexpr double tol = 1e-14;

    double t = 0.0;
    double phi = 0.0;
    // phi grows at least at rate a, so sigma / a bounds the answer from above.
    double h = 1e-3 * sigma / a;
    while (true) {
        const double full = detail::riccati_rk4(phi, h, a, b);
        const double half = detail::riccati_rk4(detail::riccati_rk4(phi, 0.5 * h, a, b), 0.5 * h, a, b);
        const double err = std::abs(half - full) / 15.0;
        if (!std::isfinite(err) || err > tol * std::max(1.0, std::abs(half))) {
            h *= 0.5;
            continue;
        }
        if (half >= sigma) break;
        t += h;
        phi = half + (half - full) / 15.0;
        h *= std::clamp(0.9 * std::pow(tol * std::max(1.0, std::abs(phi)) / std::max(err, 1e-300), 0.2), 0.2, 2.0);
    }
    // sigma is crossed inside [t, t + h]: bisect the final step length.
    double lo = 0.0;
    double hi = h;
    while (hi - lo > 1e-15 * std::max(t + hi, 1e-300)) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        const double v = detail::riccati_rk4(detail::riccati_rk4(phi, 0.5 * mid, a, b), 0.5 * mid, a, b);
        (!(v < sigma) ? hi : lo) = mid;
    }
    return t + 0.5 * (lo + hi);
}

inline double riccati_delta2(const LtiPlant& plant, double sigma) {
    return riccati_delta2(spectral_norm(plant.phi()), spectral_norm(plant.bk()), sigma);
}

/// Throws unless delta2 respects the Riccati bound for this plant.
inline void validate_against(const TriggerConfig& config, const LtiPlant& plant) {
    config.validate();
    const double bound = riccati_delta2(plant, config.sigma);
    if (config.delta2 > bound * (1.0 + 1e-12)) {
        throw InputError("TriggerConfig: delta2 = " + std::to_string(config.delta2) +
                         " exceeds the Riccati bound " + std::to_string(bound));
    }
}

/// chi(t2, t1) = [e^{Phi (t2 - t1)} + int_{t1}^{t2} e^{Phi (t2 - s)} BK ds] x(t1).
inline RealVector predict_state(const LtiPlant& plant, const RealVector& x_at_t1, double t1, double t2) {
    if (!(t2 >= t1)) throw InputError("predict_state: need t2 >= t1");
    if (x_at_t1.size() != plant.states()) throw DimensionError("predict_state: state length mismatch");
    if (t2 == t1) return x_at_t1;
    const auto n = plant.states();
    RealMatrix aug = RealMatrix::Zero(2 * n, 2 * n);
    aug.topLeftCorner(n, n) = plant.phi();
    aug.topRightCorner(n, n) = plant.bk();
    const RealMatrix e = mat_exp(aug, t2 - t1);
    return (e.topLeftCorner(n, n) + e.topRightCorner(n, n)) * x_at_t1;
}

/// Alternative to the closed-loop predictor: propagates the held-input dynamics
/// x' = A x + BK x(t1) from x(t1), i.e. the exact state at t2 when no update
/// succeeds in between and the input is held.
inline RealVector predict_state_hold_dynamics(const LtiPlant& plant, const RealVector& x_at_t1, double t1, double t2) {
    if (!(t2 >= t1)) throw InputError("predict_state_hold_dynamics: need t2 >= t1");
    if (t2 == t1) return x_at_t1;
    return exact_hold_step(plant, x_at_t1, x_at_t1, t2 - t1);
}

enum class Predictor { ClosedLoop, HoldDynamics };

inline constexpr double kZeroStateThreshold = 1e-12;

/// Event/time rule. `find_event(t_from, t_max)` returns the first time in
/// (t_from, t_max] with ||e|| = sigma ||x||, or nullopt.
template <typename EventFinder>
double next_update_prop1(const LoopState& state, const TriggerConfig& config, EventFinder&& find_event) {
    if (state.last_attempt_failed || state.x.norm() <= kZeroStateThreshold) {
        return state.t + config.delta1;
    }
    const double cap = state.t + config.delta2 * 1e6;
    const std::optional<double> hit = find_event(state.t, cap);
    return hit ? *hit : cap;
}

inline double next_update_prop2(const LoopState& state, const TriggerConfig& config) {
    return state.t + (state.last_attempt_failed ? config.delta1 : config.delta2);
}

inline double next_update_prop3(const LoopState& state, const LtiPlant& plant, const TriggerConfig& config,
                                Predictor predictor = Predictor::ClosedLoop) {
    double chi_norm = 0.0;
    if (std::isfinite(state.t_held) && state.x_held.norm() > 0.0) {
        const RealVector chi = predictor == Predictor::ClosedLoop
                                   ? predict_state(plant, state.x_held, state.t_held, state.t)
                                   : predict_state_hold_dynamics(plant, state.x_held, state.t_held, state.t);
        chi_norm = chi.norm();
    }
    const double w = std::clamp(config.varphi(chi_norm), 0.0, 1.0);
    return state.t + config.delta2 - (config.delta2 - config.delta1) * w;
}

}  // namespace dosres
