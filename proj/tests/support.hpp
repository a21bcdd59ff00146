#pragma once

// Oracles and random-instance builders shared by the unit and acceptance tests.
// Nothing here calls into the library routine it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "dosres/dosres.hpp"

namespace dosres::testing {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline RealMatrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double lo, double hi) {
    RealMatrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = uniform(rng, lo, hi);
    }
    return m;
}

/// Random (A, B, K) with A + BK = -(cI + S) + W, S >= 0 and W skew, so the
/// closed loop is Hurwitz while A itself may be unstable.
inline LtiPlant random_stable_plant(std::mt19937_64& rng, Eigen::Index n, InputMode mode = InputMode::HoldLast) {
    const RealMatrix a = random_matrix(rng, n, n, -1.0, 1.0);
    const RealMatrix b = RealMatrix::Identity(n, n) + random_matrix(rng, n, n, -0.3, 0.3);
    const RealMatrix r = random_matrix(rng, n, n, -0.7, 0.7);
    const RealMatrix w0 = random_matrix(rng, n, n, -1.0, 1.0);
    const double c = uniform(rng, 1.0, 3.0);
    const RealMatrix target = -(c * RealMatrix::Identity(n, n) + r * r.transpose()) + (w0 - w0.transpose());
    const RealMatrix k = b.fullPivLu().solve(target - a);
    return LtiPlant(a, b, k, mode);
}

/// Fixed-step classical RK4 on x' = A x + c with c = BK x_held constant.
inline RealVector rk4_hold(const LtiPlant& plant, const RealVector& x0, const RealVector& x_held, double dt,
                           double step) {
    const RealVector drive = plant.bk() * x_held;
    auto f = [&](const RealVector& x) -> RealVector { return plant.a() * x + drive; };
    const auto n_steps = static_cast<long>(std::ceil(dt / step - 1e-9));
    const double h = dt / static_cast<double>(n_steps);
    RealVector x = x0;
    for (long i = 0; i < n_steps; ++i) {
        const RealVector k1 = f(x);
        const RealVector k2 = f(x + 0.5 * h * k1);
        const RealVector k3 = f(x + 0.5 * h * k2);
        const RealVector k4 = f(x + h * k3);
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return x;
}

/// Closed form of the time for phi' = (1 + phi)(a + b phi), phi(0) = 0, to reach sigma.
inline double riccati_closed_form(double a, double b, double sigma) {
    if (b == 0.0) return std::log1p(sigma) / a;
    if (a == b) return sigma / (a * (1.0 + sigma));
    return (std::log1p(sigma) - std::log1p(sigma * b / a)) / (a - b);
}

/// Quadratic-root oracle for omega*(zeta) = 1 when mu = theta = 1:
/// bk ((1 + s) + 1 + (1 + s) bk / z) = lambda + z, i.e.
/// z^2 + (lambda - bk (2 + s)) z - (1 + s) bk^2 = 0.
inline double rho_star_quadratic(double lambda, double bk, double sigma) {
    const double p = lambda - bk * (2.0 + sigma);
    const double q = -(1.0 + sigma) * bk * bk;
    return (-p + std::sqrt(p * p - 4.0 * q)) / 2.0;
}

struct ImpulseSpec {
    double ell = 0.0;
    TabulatedFunction delta;
};

/// Solves xi(t) = w1 + int_{l0}^t w2 xi + sum_{l0 < l_k < t} delta_k(t) xi(l_k)
/// by Picard iteration on a uniform grid (step h, trapezoid rule). Impulse
/// points must lie on the grid. Returns xi at the grid points (left limits).
inline std::vector<double> picard_gronwall(double w1, double w2, double ell0, const std::vector<ImpulseSpec>& impulses,
                                           double t_end, double h, int* iterations = nullptr) {
    const auto n = static_cast<std::size_t>(std::llround((t_end - ell0) / h));
    std::vector<double> grid(n + 1);
    for (std::size_t i = 0; i <= n; ++i) grid[i] = ell0 + static_cast<double>(i) * h;
    std::vector<std::size_t> index;
    for (const auto& imp : impulses) index.push_back(static_cast<std::size_t>(std::llround((imp.ell - ell0) / h)));

    // left[i]: sum over l_k < t_i; right[i]: sum over l_k <= t_i (right limit).
    std::vector<double> left(n + 1, w1), right(n + 1, w1);
    for (int it = 0; it < 100000; ++it) {
        std::vector<double> new_left(n + 1), new_right(n + 1);
        double integral = 0.0;
        double diff = 0.0;
        for (std::size_t i = 0; i <= n; ++i) {
            if (i > 0) integral += 0.5 * h * w2 * (right[i - 1] + left[i]);
            double jump_left = 0.0, jump_right = 0.0;
            for (std::size_t k = 0; k < impulses.size(); ++k) {
                if (index[k] == 0) continue;  // l_k must exceed l0
                const double term = impulses[k].delta(grid[i]) * left[index[k]];
                if (index[k] < i) jump_left += term;
                if (index[k] <= i) jump_right += term;
            }
            new_left[i] = w1 + integral + jump_left;
            new_right[i] = w1 + integral + jump_right;
            diff = std::max({diff, std::abs(new_left[i] - left[i]), std::abs(new_right[i] - right[i])});
        }
        left.swap(new_left);
        right.swap(new_right);
        if (diff < 1e-10) {
            if (iterations) *iterations = it + 1;
            break;
        }
    }
    return left;
}

/// Lebesgue measure of the jammed set in [0, t] by midpoint membership counting.
inline double brute_force_xi(const DosSequence& seq, double t, double step) {
    double total = 0.0;
    for (double s = 0.5 * step; s < t; s += step) {
        if (is_jammed(seq, s)) total += step;
    }
    return total;
}

inline SimConfig make_config(const LtiPlant& plant, LogicKind logic, const TriggerConfig& trig, const DosSequence& dos,
                             const DosBudget& budget, const RealVector& x0, double horizon) {
    SimConfig c{plant};
    c.logic = logic;
    c.trigger = trig;
    c.dos = dos;
    c.budget = budget;
    c.x0 = x0;
    c.horizon = horizon;
    c.record_step = trig.delta1 / 4.0;
    return c;
}

}  // namespace dosres::testing
