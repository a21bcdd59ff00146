#pragma once

// Dense linear-algebra kernel: matrix exponential, spectral and logarithmic
// norms, continuous Lyapunov solves and the exponential envelope constants
// (mu, lambda) / (theta, rho) that every bound in the library is built from.
//
// Sizes are desk scale (n <= 8). Everything here is a pure function.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dosres/errors.hpp"

namespace dosres {

using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

/// ||e^{Phi t}|| <= mu * exp(-lambda t) for all t >= 0.
struct DecayEnvelope {
    double mu = 1.0;
    double lambda = 1.0;

    [[nodiscard]] double at(double t) const { return mu * std::exp(-lambda * t); }
};

/// ||e^{A t}|| <= theta * exp(rho t) for all t >= 0.
struct GrowthEnvelope {
    double theta = 1.0;
    double rho = 0.0;

    [[nodiscard]] double at(double t) const { return theta * std::exp(rho * t); }
};

namespace detail {

inline std::string shape_of(const RealMatrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline void require_finite(const RealMatrix& m, const char* what) {
    if (!m.allFinite()) {
        throw InputError(std::string(what) + ": matrix has non-finite entries");
    }
}

inline void require_square(const RealMatrix& m, const char* what) {
    if (m.rows() != m.cols() || m.rows() == 0) {
        throw DimensionError(std::string(what) + ": expected a non-empty square matrix, got " + shape_of(m));
    }
}

inline double one_norm(const RealMatrix& m) {
    return m.cwiseAbs().colwise().sum().maxCoeff();
}

// 200 log-spaced points in [t_max * 1e-6, t_max] plus t = 0.
inline std::vector<double> validation_grid(double t_max, std::size_t points = 200) {
    std::vector<double> grid;
    grid.reserve(points + 1);
    grid.push_back(0.0);
    const double lo = std::log(t_max * 1e-6);
    const double hi = std::log(t_max);
    for (std::size_t i = 0; i < points; ++i) {
        const double s = static_cast<double>(i) / static_cast<double>(points - 1);
        grid.push_back(std::exp(lo + s * (hi - lo)));
    }
    return grid;
}

inline Eigen::VectorXd symmetric_eigenvalues(const RealMatrix& s) {
    Eigen::SelfAdjointEigenSolver<RealMatrix> solver(s, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) {
        throw SolvabilityError("symmetric eigenvalue decomposition failed to converge");
    }
    return solver.eigenvalues();  // ascending
}

}  // namespace detail

/// e^{M t} by scaling and squaring around a degree-18 Taylor core.
inline RealMatrix mat_exp(const RealMatrix& m, double t) {
    detail::require_square(m, "mat_exp");
    detail::require_finite(m, "mat_exp");
    if (!std::isfinite(t)) {
        throw InputError("mat_exp: non-finite time");
    }
    const auto n = m.rows();
    RealMatrix a = m * t;
    const double norm = detail::one_norm(a);
    int squarings = 0;
    if (norm > 0.5) {
        squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
        a /= std::ldexp(1.0, squarings);
    }
    // ||a||_1 <= 0.5, so the truncation error 0.5^19/19! is far below eps.
    constexpr int order = 18;
    RealMatrix result = RealMatrix::Identity(n, n);
    for (int k = order; k >= 1; --k) {
        result = RealMatrix::Identity(n, n) + (a * result) / static_cast<double>(k);
    }
    for (int i = 0; i < squarings; ++i) {
        result = result * result;
    }
    return result;
}

/// Largest singular value.
inline double spectral_norm(const RealMatrix& m) {
    detail::require_finite(m, "spectral_norm");
    if (m.size() == 0) {
        return 0.0;
    }
    Eigen::JacobiSVD<RealMatrix> svd(m);
    return svd.singularValues()(0);
}

/// Logarithmic norm: largest eigenvalue of (M + M^T) / 2.
inline double log_norm(const RealMatrix& m) {
    detail::require_square(m, "log_norm");
    detail::require_finite(m, "log_norm");
    const RealMatrix sym = 0.5 * (m + m.transpose());
    return detail::symmetric_eigenvalues(sym).maxCoeff();
}

/// Solves Phi^T P + P Phi + Q = 0 for symmetric P > 0.
///
/// The n^2 x n^2 Kronecker form is factored directly with one step of
/// iterative refinement. A singular system, or a solution that is not
/// positive definite, means Phi is not Hurwitz and raises SolvabilityError.
inline RealMatrix solve_lyapunov(const RealMatrix& phi, const RealMatrix& q) {
    detail::require_square(phi, "solve_lyapunov");
    detail::require_square(q, "solve_lyapunov");
    detail::require_finite(phi, "solve_lyapunov");
    detail::require_finite(q, "solve_lyapunov");
    if (phi.rows() != q.rows()) {
        throw DimensionError("solve_lyapunov: Phi is " + detail::shape_of(phi) + " but Q is " + detail::shape_of(q));
    }
    const double q_norm = spectral_norm(q);
    if ((q - q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, q_norm)) {
        throw InputError("solve_lyapunov: Q is not symmetric");
    }

    const auto n = phi.rows();
    const RealMatrix eye = RealMatrix::Identity(n, n);
    const RealMatrix phi_t = phi.transpose();
    // Column-major vec: vec(Phi^T P) = (I (x) Phi^T) vec(P), vec(P Phi) = (Phi^T (x) I) vec(P).
    RealMatrix kron(n * n, n * n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            kron.block(i * n, j * n, n, n) = eye(i, j) * phi_t + phi_t(i, j) * eye;
        }
    }
    Eigen::FullPivLU<RealMatrix> lu(kron);
    lu.setThreshold(1e-12);
    if (!lu.isInvertible()) {
        throw SolvabilityError("solve_lyapunov: singular system (Phi not Hurwitz or has mirrored eigenvalues)");
    }

    auto residual_of = [&](const RealMatrix& p) -> RealMatrix { return phi_t * p + p * phi + q; };

    const Eigen::VectorXd rhs = -Eigen::Map<const Eigen::VectorXd>(q.data(), n * n);
    Eigen::VectorXd vec_p = lu.solve(rhs);
    RealMatrix p = Eigen::Map<RealMatrix>(vec_p.data(), n, n);
    p = 0.5 * (p + p.transpose());

    RealMatrix r = residual_of(p);
    if (spectral_norm(r) > 1e-12 * std::max(1.0, q_norm)) {
        const Eigen::VectorXd corr_rhs = -Eigen::Map<const Eigen::VectorXd>(r.data(), n * n);
        Eigen::VectorXd corr = lu.solve(corr_rhs);
        RealMatrix dp = Eigen::Map<RealMatrix>(corr.data(), n, n);
        p += 0.5 * (dp + dp.transpose());
        r = residual_of(p);
    }
    if (spectral_norm(r) > 1e-8 * q_norm) {
        throw SolvabilityError("solve_lyapunov: residual " + std::to_string(spectral_norm(r)) + " above tolerance");
    }
    if (detail::symmetric_eigenvalues(p).minCoeff() <= 0.0) {
        throw SolvabilityError("solve_lyapunov: solution not positive definite, Phi is not Hurwitz");
    }
    return p;
}

/// True when every eigenvalue of `m` lies strictly in the open left half plane.
inline bool is_hurwitz(const RealMatrix& m) {
    detail::require_square(m, "is_hurwitz");
    detail::require_finite(m, "is_hurwitz");
    Eigen::EigenSolver<RealMatrix> solver(m, false);
    if (solver.info() != Eigen::Success) {
        return false;
    }
    return solver.eigenvalues().real().maxCoeff() < 0.0;
}

/// Checks ||e^{M t}|| <= bound(t) * (1 + 1e-9) on the validation grid up to t_max.
template <typename Bound>
bool envelope_holds_on_grid(const RealMatrix& m, Bound&& bound, double t_max) {
    for (double t : detail::validation_grid(t_max)) {
        if (spectral_norm(mat_exp(m, t)) > bound(t) * (1.0 + 1e-9)) {
            return false;
        }
    }
    return true;
}

/// (mu, lambda) for a Hurwitz Phi from the Lyapunov certificate with Q = I:
/// mu = sqrt(alpha2 / alpha1), lambda = 1 / (2 alpha2), where alpha1/alpha2
/// are the extreme eigenvalues of P. The result is grid-validated on
/// [0, 50 / lambda]; a failed validation throws.
inline DecayEnvelope decay_envelope(const RealMatrix& phi) {
    detail::require_square(phi, "decay_envelope");
    RealMatrix p;
    try {
        p = solve_lyapunov(phi, RealMatrix::Identity(phi.rows(), phi.cols()));
    } catch (const SolvabilityError& e) {
        throw InfeasibleError(std::string("decay_envelope: Phi is not Hurwitz (") + e.what() + ")");
    }
    const Eigen::VectorXd eig = detail::symmetric_eigenvalues(p);
    const double alpha1 = eig.minCoeff();
    const double alpha2 = eig.maxCoeff();
    DecayEnvelope env{std::max(1.0, std::sqrt(alpha2 / alpha1)), 1.0 / (2.0 * alpha2)};
    if (!envelope_holds_on_grid(phi, [&](double t) { return env.at(t); }, 50.0 / env.lambda)) {
        throw InfeasibleError("decay_envelope: grid validation of ||e^{Phi t}|| <= mu e^{-lambda t} failed");
    }
    return env;
}

/// theta = 1, rho = max(0, log_norm(A)); grid-validated on [0, 50 / max(rho, 1)].
inline GrowthEnvelope growth_envelope(const RealMatrix& a) {
    detail::require_square(a, "growth_envelope");
    GrowthEnvelope env{1.0, std::max(0.0, log_norm(a))};
    if (!envelope_holds_on_grid(a, [&](double t) { return env.at(t); }, 50.0 / std::max(env.rho, 1.0))) {
        throw InfeasibleError("growth_envelope: grid validation of ||e^{A t}|| <= e^{rho t} failed");
    }
    return env;
}

}  // namespace dosres
