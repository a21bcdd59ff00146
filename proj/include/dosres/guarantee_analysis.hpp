#pragma once

// Stability certificates for the sampled-data loop under DoS.
//
// Trajectory route: with ||e^{Phi t}|| <= mu e^{-lambda t} and
// ||e^{A t}|| <= theta e^{rho t}, the loop is GES whenever
//   lambda - sigma mu ||BK|| > 0   and   tau > (lambda + rho*) / (lambda - sigma mu ||BK||) * inflation,
// with alpha = mu e^{kappa (lambda + rho*) inflation},
//      beta  = lambda - sigma mu ||BK|| - (lambda + rho*) inflation / tau.
// inflation = 1 + Delta* / tau* accounts for finite retry rates; it is 1 for
// the ideal rule.
//
// Lyapunov route: P solves Phi^T P + P Phi + Q = 0 and the loop is GES when
//   gamma1 - sigma gamma2 > 0   and   tau > (w1 + w2) / w1.
//
// Also hosts the impulsive Gronwall bound
//   xi(t) <= w1 e^{w2 (t - l0)} prod_{l0 < l_k < t} (1 + delta_k(t)).

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dosres/dos_model.hpp"
#include "dosres/plant.hpp"

namespace dosres {

/// Envelope data of a plant shared by all trajectory-route bounds.
struct PlantEnvelopes {
    DecayEnvelope decay;    // of Phi
    GrowthEnvelope growth;  // of A
    double bk_norm = 0.0;
    double phi_norm = 0.0;
};

inline PlantEnvelopes envelopes_of(const LtiPlant& plant) {
    return {decay_envelope(plant.phi()), growth_envelope(plant.a()), spectral_norm(plant.bk()),
            spectral_norm(plant.phi())};
}

/// omega*(zeta) = omega2 [(1 + sigma) + theta + theta (1 + sigma) ||BK|| / zeta] / (lambda + zeta),
/// with omega2 = mu ||BK||.
inline double omega_star(double lambda, double omega2, double sigma, double theta, double bk_norm, double zeta) {
    if (omega2 == 0.0) return 0.0;
    const double theta1 = theta * (1.0 + sigma) * bk_norm;
    return omega2 * ((1.0 + sigma) + theta + theta1 / zeta) / (lambda + zeta);
}

/// Smallest zeta >= rho_floor with omega*(zeta) <= 1. omega* is strictly
/// decreasing on zeta > 0, so this is bracket expansion plus bisection.
inline double rho_star(double lambda, double omega2, double sigma, double theta, double bk_norm, double rho_floor) {
    auto w = [&](double z) { return omega_star(lambda, omega2, sigma, theta, bk_norm, z); };
    const double lo_start = std::max(rho_floor, 1e-12);
    if (w(lo_start) <= 1.0) return rho_floor > 0.0 ? rho_floor : (omega2 == 0.0 ? 0.0 : lo_start);
    double lo = lo_start;
    double hi = std::max(1.0, 2.0 * lo);
    while (w(hi) > 1.0) {
        lo = hi;
        hi *= 2.0;
    }
    while (hi - lo > 1e-12 * std::max(1.0, hi)) {
        const double mid = 0.5 * (lo + hi);
        (w(mid) <= 1.0 ? hi : lo) = mid;
    }
    return hi;
}

/// delta_n(t) = e^{(lambda + rho*) tau_n(t)} - 1.
inline double delta_n_of_t(double lambda, double rho_star_value, double tau_n_t) {
    return std::expm1((lambda + rho_star_value) * tau_n_t);
}

struct TrajectoryConstants {
    double mu = 1.0;
    double lambda = 1.0;
    double theta = 1.0;
    double rho = 0.0;
    double sigma = 0.0;
    double bk_norm = 0.0;
    double omega2 = 0.0;  // mu ||BK||
    double omega3 = 0.0;  // sigma omega2
    double theta1 = 0.0;  // theta (1 + sigma) ||BK||
    double rho_star = 0.0;
    double inflation = 1.0;  // 1 + Delta* / tau*
    double kappa = 0.0;
    double tau = 0.0;
    double tau_min = 0.0;
    double alpha = 1.0;
    double beta = 0.0;
    bool sigma_feasible = false;  // lambda - sigma mu ||BK|| > 0
    bool tau_feasible = false;    // tau > tau_min

    [[nodiscard]] bool feasible() const { return sigma_feasible && tau_feasible; }
    [[nodiscard]] double nominal_margin() const { return lambda - sigma * mu * bk_norm; }
    [[nodiscard]] double theta2_at(double r) const { return theta + theta1 / r; }
    [[nodiscard]] double omega4_at(double r) const { return omega2 * (1.0 + sigma) + omega2 * theta2_at(r); }
    [[nodiscard]] double omega_star_at(double zeta) const {
        return omega_star(lambda, omega2, sigma, theta, bk_norm, zeta);
    }
    /// omega1 = mu ||x(0)|| depends on the trajectory.
    [[nodiscard]] double omega1(double x0_norm) const { return mu * x0_norm; }
    [[nodiscard]] double delta_n(double tau_n_t) const { return delta_n_of_t(lambda, rho_star, tau_n_t); }
};

/// Finite-sampling-rate robustness of an attempt sequence against a DoS signal.
struct SamplingRobustness {
    double delta_star = 0.0;                                   // sup_n Delta_{S_n}
    double tau_star = std::numeric_limits<double>::infinity();  // inf_n tau_n
    std::vector<double> delta_s;                               // Delta_{S_n}, one per interval
    DosSequence sequence;

    [[nodiscard]] double inflation() const {
        if (delta_star == 0.0) return 1.0;
        return 1.0 + delta_star / tau_star;
    }

    /// End of the extended interval bar H_n = [h_n, h_n + tau_n + Delta_{S_n}).
    [[nodiscard]] double bar_end(std::size_t n) const {
        const double extra = n < delta_s.size() ? delta_s[n] : 0.0;
        return sequence[n].end() + extra;
    }

    [[nodiscard]] bool in_xi_bar(double t) const {
        for (std::size_t n = 0; n < sequence.size(); ++n) {
            if (sequence[n].onset > t) break;
            if (t < bar_end(n)) return true;
        }
        return false;
    }

    /// |bar Xi(t)| = sum_{n < n(t)} (tau_n + Delta_{S_n}) + min(tau_{n(t)} + Delta_{S_{n(t)}}, t - h_{n(t)}).
    [[nodiscard]] double xi_bar(double t) const {
        const long last = n_of_t(sequence, t);
        double total = 0.0;
        for (long n = 0; n < last; ++n) {
            const auto i = static_cast<std::size_t>(n);
            total += bar_end(i) - sequence[i].onset;
        }
        if (last >= 0) {
            const auto i = static_cast<std::size_t>(last);
            total += std::min(bar_end(i) - sequence[i].onset, t - sequence[i].onset);
        }
        return total;
    }
};

/// Builds S_n, Delta_{S_n}, Delta* and tau* from sorted attempt times.
/// Delta_k = t_{k+1} - t_k is only known for attempts with a successor; an
/// interval with no such attempt gets Delta_{S_n} = 0.
inline SamplingRobustness measure_robustness(const std::vector<double>& attempts, const DosSequence& seq) {
    if (!std::is_sorted(attempts.begin(), attempts.end())) {
        throw InputError("measure_robustness: attempt times must be sorted");
    }
    SamplingRobustness r;
    r.sequence = seq;
    r.tau_star = seq.min_duration();
    r.delta_s.assign(seq.size(), 0.0);
    for (std::size_t n = 0; n < seq.size(); ++n) {
        const auto& iv = seq[n];
        auto it = std::lower_bound(attempts.begin(), attempts.end(), iv.onset);
        for (; it != attempts.end() && *it < iv.end(); ++it) {
            if (std::next(it) == attempts.end()) break;
            r.delta_s[n] = std::max(r.delta_s[n], *std::next(it) - *it);
        }
        r.delta_star = std::max(r.delta_star, r.delta_s[n]);
    }
    return r;
}

/// Robustness with prescribed worst-case Delta* and tau* (e.g. delta1 and the
/// minimum DoS duration), for a-priori certificates.
inline SamplingRobustness worst_case_robustness(double delta_star, double tau_star) {
    if (!(delta_star >= 0.0)) throw InputError("worst_case_robustness: Delta* must be >= 0");
    if (!(tau_star > 0.0)) throw InputError("worst_case_robustness: tau* must be positive");
    SamplingRobustness r;
    r.delta_star = delta_star;
    r.tau_star = tau_star;
    return r;
}

/// Trajectory-route certificate at budget (kappa, tau) with the given inflation.
inline TrajectoryConstants trajectory_bounds(const PlantEnvelopes& env, double sigma, double kappa, double tau,
                                             double inflation) {
    if (!(sigma > 0.0)) throw InputError("trajectory_bounds: sigma must be positive");
    if (!(inflation >= 1.0)) throw InputError("trajectory_bounds: inflation must be >= 1");
    TrajectoryConstants c;
    c.mu = env.decay.mu;
    c.lambda = env.decay.lambda;
    c.theta = env.growth.theta;
    c.rho = env.growth.rho;
    c.sigma = sigma;
    c.bk_norm = env.bk_norm;
    c.omega2 = c.mu * c.bk_norm;
    c.omega3 = sigma * c.omega2;
    c.theta1 = c.theta * (1.0 + sigma) * c.bk_norm;
    c.rho_star = rho_star(c.lambda, c.omega2, sigma, c.theta, c.bk_norm, c.rho);
    c.inflation = inflation;
    c.kappa = kappa;
    c.tau = tau;

    const double margin = c.nominal_margin();
    const double rate = c.lambda + c.rho_star;
    c.sigma_feasible = margin > 0.0;
    c.tau_min = c.sigma_feasible ? rate / margin * inflation : std::numeric_limits<double>::infinity();
    c.tau_feasible = c.sigma_feasible && tau > c.tau_min;
    c.alpha = c.mu * std::exp(kappa * rate * inflation);
    c.beta = margin - rate * inflation / tau;
    return c;
}

inline TrajectoryConstants theorem1_bounds(const PlantEnvelopes& env, double sigma, double kappa, double tau) {
    return trajectory_bounds(env, sigma, kappa, tau, 1.0);
}

inline TrajectoryConstants theorem1_bounds(const LtiPlant& plant, double sigma, double kappa, double tau) {
    return theorem1_bounds(envelopes_of(plant), sigma, kappa, tau);
}

inline TrajectoryConstants theorem2_bounds(const PlantEnvelopes& env, double sigma, double kappa, double tau,
                                           const SamplingRobustness& robustness) {
    if (!(robustness.tau_star > 0.0)) throw InputError("theorem2_bounds: tau* must be positive");
    return trajectory_bounds(env, sigma, kappa, tau, robustness.inflation());
}

inline TrajectoryConstants theorem2_bounds(const LtiPlant& plant, double sigma, double kappa, double tau,
                                           const SamplingRobustness& robustness) {
    return theorem2_bounds(envelopes_of(plant), sigma, kappa, tau, robustness);
}

struct LyapunovConstants {
    RealMatrix p;
    double alpha1 = 0.0;  // min eig P
    double alpha2 = 0.0;  // max eig P
    double gamma1 = 0.0;  // min eig Q
    double gamma2 = 0.0;  // ||K^T B^T P + P B K||
    double sigma = 0.0;
    double omega1_l = 0.0;  // (gamma1 - gamma2 sigma) / alpha2
    double omega2_l = 0.0;  // gamma2 (2 + sigma) / alpha1
    double inflation = 1.0;
    double kappa = 0.0;
    double tau = 0.0;
    double tau_min = 0.0;  // (omega1 + omega2) / omega1, times inflation
    double alpha = 1.0;
    double beta = 0.0;
    bool sigma_feasible = false;  // gamma1 - sigma gamma2 > 0
    bool tau_feasible = false;

    [[nodiscard]] bool feasible() const { return sigma_feasible && tau_feasible; }
    [[nodiscard]] double lyapunov(const RealVector& x) const { return x.dot(p * x); }
};

/// Lyapunov-route certificate. `inflation` > 1 applies the same finite-retry
/// accounting as the trajectory route (|bar Xi| <= |Xi| (1 + Delta*/tau*));
/// inflation = 1 gives the ideal-rule constants.
inline LyapunovConstants theorem3_lyapunov(const LtiPlant& plant, const RealMatrix& q, double sigma, double kappa,
                                           double tau, double inflation = 1.0) {
    if (!(sigma > 0.0)) throw InputError("theorem3_lyapunov: sigma must be positive");
    if (!(inflation >= 1.0)) throw InputError("theorem3_lyapunov: inflation must be >= 1");
    LyapunovConstants c;
    c.p = solve_lyapunov(plant.phi(), q);
    const Eigen::VectorXd p_eig = detail::symmetric_eigenvalues(c.p);
    const Eigen::VectorXd q_eig = detail::symmetric_eigenvalues(q);
    if (q_eig.minCoeff() <= 0.0) throw InputError("theorem3_lyapunov: Q must be positive definite");
    c.alpha1 = p_eig.minCoeff();
    c.alpha2 = p_eig.maxCoeff();
    c.gamma1 = q_eig.minCoeff();
    const RealMatrix cross = plant.bk().transpose() * c.p + c.p * plant.bk();
    c.gamma2 = spectral_norm(cross);
    c.sigma = sigma;
    c.omega1_l = (c.gamma1 - c.gamma2 * sigma) / c.alpha2;
    c.omega2_l = c.gamma2 * (2.0 + sigma) / c.alpha1;
    c.inflation = inflation;
    c.kappa = kappa;
    c.tau = tau;
    c.sigma_feasible = c.gamma1 - sigma * c.gamma2 > 0.0;
    const double sum = c.omega1_l + c.omega2_l;
    c.tau_min = c.sigma_feasible ? sum / c.omega1_l * inflation : std::numeric_limits<double>::infinity();
    c.tau_feasible = c.sigma_feasible && tau > c.tau_min;
    c.alpha = std::sqrt(std::exp(kappa * sum * inflation) * c.alpha2 / c.alpha1);
    c.beta = (c.omega1_l - sum * inflation / tau) / 2.0;
    return c;
}

// ---------------------------------------------------------------------------
// Impulsive Gronwall bound

/// Piecewise-linear interpolant of nondecreasing samples; constant beyond the ends.
class TabulatedFunction {
public:
    TabulatedFunction(std::vector<double> t, std::vector<double> v) : t_(std::move(t)), v_(std::move(v)) {
        if (t_.empty() || t_.size() != v_.size()) throw InputError("TabulatedFunction: need matching, non-empty samples");
        for (std::size_t i = 1; i < t_.size(); ++i) {
            if (!(t_[i] > t_[i - 1])) throw InputError("TabulatedFunction: abscissae must increase");
            if (v_[i] < v_[i - 1]) throw InputError("TabulatedFunction: values must be nondecreasing");
        }
    }

    [[nodiscard]] double operator()(double x) const {
        if (x <= t_.front()) return v_.front();
        if (x >= t_.back()) return v_.back();
        const auto it = std::upper_bound(t_.begin(), t_.end(), x);
        const auto i = static_cast<std::size_t>(it - t_.begin());
        const double w = (x - t_[i - 1]) / (t_[i] - t_[i - 1]);
        return v_[i - 1] + w * (v_[i] - v_[i - 1]);
    }

private:
    std::vector<double> t_;
    std::vector<double> v_;
};

struct Impulse {
    double ell = 0.0;
    std::function<double(double)> delta;  // nondecreasing, >= 0
};

/// omega1 e^{omega2 (t - ell0)} prod_{ell0 < ell_k < t} (1 + delta_k(t)).
inline double gronwall_bound(double omega1, double omega2, double ell0, const std::vector<Impulse>& impulses,
                             double t) {
    double prev = ell0;
    for (std::size_t k = 0; k < impulses.size(); ++k) {
        const double ell = impulses[k].ell;
        if (ell < ell0 || (k > 0 && !(ell > prev))) {
            throw InputError("gronwall_bound: impulse points must satisfy ell0 <= ell1 < ell2 < ...");
        }
        prev = ell;
    }
    double value = omega1 * std::exp(omega2 * (t - ell0));
    for (const auto& imp : impulses) {
        if (imp.ell > ell0 && imp.ell < t) value *= 1.0 + imp.delta(t);
    }
    return value;
}

// ---------------------------------------------------------------------------
// Flat "name = value" reports

class KeyValueReport {
public:
    void add(std::string name, double value) {
        std::ostringstream os;
        os << std::setprecision(17) << value;
        entries_.emplace_back(std::move(name), os.str());
    }
    void add(std::string name, bool value) { entries_.emplace_back(std::move(name), value ? "true" : "false"); }
    void add(std::string name, std::string value) { entries_.emplace_back(std::move(name), std::move(value)); }
    void add(std::string name, const char* value) { add(std::move(name), std::string(value)); }

    [[nodiscard]] const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

    [[nodiscard]] const std::string* find(const std::string& name) const {
        for (const auto& [k, v] : entries_) {
            if (k == name) return &v;
        }
        return nullptr;
    }

    friend std::ostream& operator<<(std::ostream& os, const KeyValueReport& r) {
        for (const auto& [k, v] : r.entries_) os << k << " = " << v << '\n';
        return os;
    }

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

inline void append_to(KeyValueReport& report, const std::string& prefix, const TrajectoryConstants& c) {
    report.add(prefix + "rho_star", c.rho_star);
    report.add(prefix + "omega2", c.omega2);
    report.add(prefix + "omega3", c.omega3);
    report.add(prefix + "theta1", c.theta1);
    report.add(prefix + "inflation", c.inflation);
    report.add(prefix + "sigma_feasible", c.sigma_feasible);
    report.add(prefix + "tau_min", c.tau_min);
    report.add(prefix + "tau_feasible", c.tau_feasible);
    report.add(prefix + "alpha", c.alpha);
    report.add(prefix + "beta", c.beta);
}

inline void append_to(KeyValueReport& report, const std::string& prefix, const LyapunovConstants& c) {
    report.add(prefix + "alpha1", c.alpha1);
    report.add(prefix + "alpha2", c.alpha2);
    report.add(prefix + "gamma1", c.gamma1);
    report.add(prefix + "gamma2", c.gamma2);
    report.add(prefix + "omega1_L", c.omega1_l);
    report.add(prefix + "omega2_L", c.omega2_l);
    report.add(prefix + "inflation", c.inflation);
    report.add(prefix + "sigma_feasible", c.sigma_feasible);
    report.add(prefix + "tau_min", c.tau_min);
    report.add(prefix + "tau_feasible", c.tau_feasible);
    report.add(prefix + "alpha", c.alpha);
    report.add(prefix + "beta", c.beta);
}

}  // namespace dosres
