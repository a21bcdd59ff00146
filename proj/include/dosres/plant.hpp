#pragma once

// LTI process with sample-and-hold state feedback:
//   x' = A x + B K x_held,
// where x_held is the last successfully transmitted sample.

#include <cmath>
#include <limits>
#include <string>

#include "dosres/matrix_core.hpp"

namespace dosres {

enum class InputMode {
    HoldLast,       // actuator keeps applying K x_held while jammed
    ZeroDuringDos,  // actuator input is zero while jammed
};

/// The triple (A, B, K) with the closed-loop matrix Phi = A + B K cached.
/// Construction checks dimensions and that Phi is Hurwitz.
class LtiPlant {
public:
    LtiPlant(RealMatrix a, RealMatrix b, RealMatrix k, InputMode mode = InputMode::HoldLast)
        : a_(std::move(a)), b_(std::move(b)), k_(std::move(k)), mode_(mode) {
        detail::require_square(a_, "LtiPlant");
        detail::require_finite(a_, "LtiPlant");
        detail::require_finite(b_, "LtiPlant");
        detail::require_finite(k_, "LtiPlant");
        const auto n = a_.rows();
        if (b_.rows() != n || b_.cols() == 0) {
            throw DimensionError("LtiPlant: B must be " + std::to_string(n) + "xm, got " + detail::shape_of(b_));
        }
        if (k_.rows() != b_.cols() || k_.cols() != n) {
            throw DimensionError("LtiPlant: K must be " + std::to_string(b_.cols()) + "x" + std::to_string(n) +
                                 ", got " + detail::shape_of(k_));
        }
        bk_ = b_ * k_;
        phi_ = a_ + bk_;
        if (!is_hurwitz(phi_)) {
            throw InfeasibleError("LtiPlant: A + BK is not Hurwitz");
        }
    }

    [[nodiscard]] const RealMatrix& a() const noexcept { return a_; }
    [[nodiscard]] const RealMatrix& b() const noexcept { return b_; }
    [[nodiscard]] const RealMatrix& k() const noexcept { return k_; }
    [[nodiscard]] const RealMatrix& bk() const noexcept { return bk_; }
    [[nodiscard]] const RealMatrix& phi() const noexcept { return phi_; }
    [[nodiscard]] InputMode input_mode() const noexcept { return mode_; }
    [[nodiscard]] Eigen::Index states() const noexcept { return a_.rows(); }
    [[nodiscard]] Eigen::Index inputs() const noexcept { return b_.cols(); }

private:
    RealMatrix a_;
    RealMatrix b_;
    RealMatrix k_;
    InputMode mode_;
    RealMatrix bk_;
    RealMatrix phi_;
};

/// Closed-loop state between events.
struct LoopState {
    double t = 0.0;
    RealVector x;
    RealVector x_held;  // x(t_{k(t)}); zero before the first successful update
    double t_held = -std::numeric_limits<double>::infinity();  // t_{k(t)}
    bool last_attempt_failed = false;
};

inline RealMatrix closed_loop_matrix(const LtiPlant& plant) { return plant.a() + plant.b() * plant.k(); }

inline RealVector error_vector(const LoopState& state) { return state.x_held - state.x; }

/// exp([[A, BK], [0, 0]] dt). Applied to [x0; x_held] it gives [x(dt); x_held].
/// With `hold_active` false the BK block is zero (input switched off).
inline RealMatrix hold_transition(const LtiPlant& plant, double dt, bool hold_active = true) {
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw InputError("hold_transition: dt must be positive and finite");
    }
    const auto n = plant.states();
    RealMatrix aug = RealMatrix::Zero(2 * n, 2 * n);
    aug.topLeftCorner(n, n) = plant.a();
    if (hold_active) {
        aug.topRightCorner(n, n) = plant.bk();
    }
    return mat_exp(aug, dt);
}

inline RealVector apply_transition(const RealMatrix& transition, const RealVector& x0, const RealVector& x_held) {
    const auto n = x0.size();
    return transition.topLeftCorner(n, n) * x0 + transition.topRightCorner(n, n) * x_held;
}

/// Exact solution at time dt of x' = A x + BK x_held, x(0) = x0.
inline RealVector exact_hold_step(const LtiPlant& plant, const RealVector& x0, const RealVector& x_held, double dt,
                                  bool hold_active = true) {
    if (x0.size() != plant.states() || x_held.size() != plant.states()) {
        throw DimensionError("exact_hold_step: state vectors must have length " + std::to_string(plant.states()));
    }
    return apply_transition(hold_transition(plant, dt, hold_active), x0, x_held);
}

}  // namespace dosres
