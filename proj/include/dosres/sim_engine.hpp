#pragma once

// Hybrid closed-loop simulator.
//
// Between events the state follows x' = A x + BK x_held exactly (augmented
// matrix exponential). At each attempt time the packet goes through unless
// the channel is jammed; a success copies x into x_held. Transmission and
// acknowledgment are instantaneous, and jamming blocks both at once.
//
// The trace holds rows on the record grid, at every DoS breakpoint and at
// every attempt. A successful attempt gets two rows at the same t: the state
// just before the jump (attempt = 0) and just after it (attempt = 1).

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "dosres/dos_model.hpp"
#include "dosres/guarantee_analysis.hpp"
#include "dosres/plant.hpp"
#include "dosres/trigger_logic.hpp"

namespace dosres {

inline constexpr double kDivergenceThreshold = 1e12;

struct SimConfig {
    explicit SimConfig(LtiPlant p) : plant(std::move(p)) {}

    LtiPlant plant;
    LogicKind logic = LogicKind::PureTime;
    TriggerConfig trigger;
    DosSequence dos;
    DosBudget budget;
    RealVector x0;
    double horizon = 10.0;
    double record_step = 0.0025;
    double crossing_tol = 1e-9;
    Predictor predictor = Predictor::ClosedLoop;

    void validate() const {
        validate_against(trigger, plant);
        budget.validate();
        if (!(horizon > 0.0) || !std::isfinite(horizon)) throw InputError("SimConfig: horizon must be positive");
        if (!(record_step > 0.0)) throw InputError("SimConfig: record_step must be positive");
        if (record_step > trigger.delta1 / 4.0 * (1.0 + 1e-12)) {
            throw InputError("SimConfig: record_step must not exceed delta1 / 4");
        }
        if (!(crossing_tol > 0.0)) throw InputError("SimConfig: crossing_tol must be positive");
        if (x0.size() != plant.states() || !x0.allFinite()) {
            throw DimensionError("SimConfig: x0 must be a finite vector of length " + std::to_string(plant.states()));
        }
        if (const auto check = check_slow_average(dos, budget, horizon); !check) {
            throw InputError("SimConfig: DoS sequence violates the budget at t = " + std::to_string(check.time));
        }
    }
};

struct TraceSample {
    double t = 0.0;
    RealVector x;
    RealVector u;
    double e_norm = 0.0;
    double x_norm = 0.0;
    bool jammed = false;
    bool attempt = false;
    bool success = false;
};

struct AttemptRecord {
    double t = 0.0;
    bool success = false;
};

/// State at a DoS onset h_n, with x(t_{k(h_n)}) the sample held at that instant.
struct OnsetSnapshot {
    std::size_t n = 0;
    double h = 0.0;
    RealVector x;
    RealVector x_held;
};

struct Trace {
    std::vector<TraceSample> samples;
    std::vector<AttemptRecord> attempts;
    std::vector<OnsetSnapshot> dos_onsets;
    double pending_attempt = std::numeric_limits<double>::infinity();  // next scheduled attempt after the run
    bool diverged = false;
    double divergence_time = std::numeric_limits<double>::quiet_NaN();

    /// Attempt times, optionally followed by the pending one so the last
    /// executed attempt has a defined Delta_k.
    [[nodiscard]] std::vector<double> attempt_times(bool include_pending = true) const {
        std::vector<double> out;
        out.reserve(attempts.size() + 1);
        for (const auto& a : attempts) out.push_back(a.t);
        if (include_pending && std::isfinite(pending_attempt)) out.push_back(pending_attempt);
        return out;
    }

    [[nodiscard]] std::vector<double> success_times() const {
        std::vector<double> out;
        for (const auto& a : attempts) {
            if (a.success) out.push_back(a.t);
        }
        return out;
    }
};

/// First time in [t_from, t_max] where ||x_held - x(t)|| >= sigma ||x(t)|| under
/// x' = A x + BK x_held (BK dropped when `hold_active` is false).
///
/// g(t) = ||e|| - sigma ||x|| is scanned on a grid of step
/// min(max_step / 8, (t_max - t_from) / 64) and the first sign change is
/// bisected down to `crossing_tol`; the returned time is the last point known
/// to satisfy g <= 0. Returns t_from if g(t_from) >= 0 with x != 0, and
/// nullopt if x = 0 or no crossing happens before t_max.
inline std::optional<double> find_event_crossing(const LtiPlant& plant, const RealVector& x, const RealVector& x_held,
                                                 double sigma, double t_from, double t_max, double max_step,
                                                 double crossing_tol, bool hold_active = true) {
    if (x.size() != plant.states() || x_held.size() != plant.states()) {
        throw DimensionError("find_event_crossing: state length mismatch");
    }
    if (!(t_max > t_from)) return std::nullopt;
    auto g = [&](const RealVector& xt) { return (x_held - xt).norm() - sigma * xt.norm(); };
    if (x.norm() <= kZeroStateThreshold && x_held.norm() <= kZeroStateThreshold) return std::nullopt;
    if (g(x) >= 0.0) return t_from;

    const double step = std::min(max_step / 8.0, (t_max - t_from) / 64.0);
    const RealMatrix transition = hold_transition(plant, step, hold_active);
    RealVector prev = x;
    double t_prev = t_from;
    for (std::size_t i = 1;; ++i) {
        double t_next = t_from + static_cast<double>(i) * step;
        const bool last = t_next >= t_max;
        if (last) t_next = t_max;
        const RealVector next = last ? exact_hold_step(plant, prev, x_held, t_next - t_prev, hold_active)
                                     : apply_transition(transition, prev, x_held);
        if (g(next) >= 0.0) {
            double lo = 0.0;
            double hi = t_next - t_prev;
            while (hi - lo > crossing_tol) {
                const double mid = 0.5 * (lo + hi);
                if (mid <= lo || mid >= hi) break;
                const RealVector xm = exact_hold_step(plant, prev, x_held, mid, hold_active);
                (g(xm) >= 0.0 ? hi : lo) = mid;
            }
            return t_prev + lo;
        }
        if (last) return std::nullopt;
        prev = next;
        t_prev = t_next;
    }
}

namespace detail {

// Memoizes hold transitions by (dt, hold flag); the record grid reuses one dt.
class TransitionCache {
public:
    explicit TransitionCache(const LtiPlant& plant) : plant_(plant) {}

    const RealMatrix& get(double dt, bool hold_active) {
        const auto key = std::make_pair(dt, hold_active);
        if (auto it = cache_.find(key); it != cache_.end()) return it->second;
        if (cache_.size() >= 256) cache_.clear();
        return cache_.emplace(key, hold_transition(plant_, dt, hold_active)).first->second;
    }

private:
    const LtiPlant& plant_;
    std::map<std::pair<double, bool>, RealMatrix> cache_;
};

}  // namespace detail

/// Runs the closed loop over [0, horizon]. Divergence (||x|| > 1e12) stops
/// the run and is flagged on the trace.
inline Trace run(const SimConfig& config) {
    config.validate();
    const LtiPlant& plant = config.plant;
    const DosSequence& dos = config.dos;
    const bool zero_mode = plant.input_mode() == InputMode::ZeroDuringDos;
    const double horizon = config.horizon;

    std::vector<double> breakpoints;
    for (const auto& iv : dos.intervals()) {
        if (iv.onset <= horizon) breakpoints.push_back(iv.onset);
        if (iv.end() <= horizon) breakpoints.push_back(iv.end());
    }
    std::sort(breakpoints.begin(), breakpoints.end());
    breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end()), breakpoints.end());

    LoopState state;
    state.t = 0.0;
    state.x = config.x0;
    state.x_held = RealVector::Zero(plant.states());

    Trace trace;
    detail::TransitionCache cache(plant);
    double last_row_t = -1.0;

    auto hold_active = [&](double t) { return !zero_mode || !is_jammed(dos, t); };
    auto emit = [&](bool attempt, bool success) {
        TraceSample s;
        s.t = state.t;
        s.x = state.x;
        s.jammed = is_jammed(dos, state.t);
        s.u = (zero_mode && s.jammed) ? RealVector::Zero(plant.inputs()) : RealVector(plant.k() * state.x_held);
        s.e_norm = (state.x_held - state.x).norm();
        s.x_norm = state.x.norm();
        s.attempt = attempt;
        s.success = success;
        trace.samples.push_back(std::move(s));
        last_row_t = state.t;
    };

    std::size_t next_bp = 0;
    std::size_t next_onset = 0;
    double next_attempt = 0.0;
    std::size_t record_index = 0;
    double next_record = 0.0;
    bool recheck_event = false;

    auto next_breakpoint_after = [&](double t) {
        auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), t);
        return it == breakpoints.end() ? std::numeric_limits<double>::infinity() : *it;
    };

    // Event finder as seen by a logic that monitors the true state. In
    // zero-input mode the dynamics switch at DoS breakpoints, so the search
    // stops there and is resumed when the breakpoint is reached.
    auto find_event = [&](double from, double t_max) -> std::optional<double> {
        double limit = std::min(t_max, horizon);
        bool truncated = false;
        if (zero_mode) {
            const double bp = next_breakpoint_after(from);
            if (bp < limit) {
                limit = bp;
                truncated = true;
            }
        }
        auto hit = find_event_crossing(plant, state.x, state.x_held, config.trigger.sigma, from, limit,
                                       config.trigger.delta1, config.crossing_tol, hold_active(from));
        recheck_event = !hit && truncated;
        return hit;
    };

    auto schedule_after_attempt = [&]() -> double {
        switch (config.logic) {
            case LogicKind::PureTime: return next_update_prop2(state, config.trigger);
            case LogicKind::SelfTrigger: return next_update_prop3(state, plant, config.trigger, config.predictor);
            case LogicKind::EventTime: return next_update_prop1(state, config.trigger, find_event);
            case LogicKind::IdealEvent: {
                if (state.last_attempt_failed) {
                    // Retry the instant the current jamming interval ends.
                    const long n = n_of_t(dos, std::nextafter(state.t, std::numeric_limits<double>::infinity()));
                    return dos[static_cast<std::size_t>(n)].end();
                }
                return next_update_prop1(state, config.trigger, find_event);
            }
        }
        return state.t + config.trigger.delta1;
    };

    auto do_attempt = [&]() {
        const bool jammed = is_jammed(dos, state.t);
        recheck_event = false;
        if (!jammed) {
            emit(false, false);
            state.x_held = state.x;
            state.t_held = state.t;
            state.last_attempt_failed = false;
        } else {
            state.last_attempt_failed = true;
        }
        emit(true, !jammed);
        trace.attempts.push_back({state.t, !jammed});
        next_attempt = schedule_after_attempt();
    };

    while (true) {
        // Events at the current instant: breakpoints, then the attempt, then the grid row.
        while (next_bp < breakpoints.size() && breakpoints[next_bp] == state.t) {
            while (next_onset < dos.size() && dos[next_onset].onset == state.t) {
                trace.dos_onsets.push_back({next_onset, state.t, state.x, state.x_held});
                ++next_onset;
            }
            emit(false, false);
            ++next_bp;
            if (recheck_event && state.t < next_attempt) {
                const auto hit = find_event(state.t, state.t + config.trigger.delta2 * 1e6);
                next_attempt = hit ? *hit : state.t + config.trigger.delta2 * 1e6;
            }
        }
        if (next_attempt == state.t) do_attempt();
        if (next_record == state.t) {
            if (last_row_t != state.t) emit(false, false);
            ++record_index;
            next_record = static_cast<double>(record_index) * config.record_step;
        }
        if (state.x.norm() > kDivergenceThreshold) {
            trace.diverged = true;
            trace.divergence_time = state.t;
            break;
        }
        if (state.t >= horizon) {
            if (last_row_t != state.t) emit(false, false);
            break;
        }

        double t_next = std::min({next_attempt, next_record, horizon});
        if (next_bp < breakpoints.size()) t_next = std::min(t_next, breakpoints[next_bp]);
        const double dt = t_next - state.t;
        const RealMatrix& transition = cache.get(dt, hold_active(state.t));
        state.x = apply_transition(transition, state.x, state.x_held);
        state.t = t_next;
    }
    trace.pending_attempt = next_attempt;
    return trace;
}

// ---------------------------------------------------------------------------
// Trace verdicts

struct GesVerdict {
    bool holds = true;
    double first_violation_time = std::numeric_limits<double>::quiet_NaN();
    double worst_ratio = 0.0;  // max ||x(t)|| / (alpha e^{-beta t} ||x(0)||)
    double worst_time = 0.0;
};

/// Checks ||x(t)|| <= alpha e^{-beta t} ||x(0)|| (1 + 1e-6) at every sample.
inline GesVerdict verify_ges(const Trace& trace, double alpha, double beta) {
    GesVerdict v;
    if (trace.samples.empty()) return v;
    const double x0 = trace.samples.front().x_norm;
    for (const auto& s : trace.samples) {
        const double bound = alpha * std::exp(-beta * s.t) * x0;
        double ratio = 0.0;
        if (s.x_norm > 0.0) ratio = bound > 0.0 ? s.x_norm / bound : std::numeric_limits<double>::infinity();
        if (ratio > v.worst_ratio) {
            v.worst_ratio = ratio;
            v.worst_time = s.t;
        }
        if (ratio > 1.0 + 1e-6 && v.holds) {
            v.holds = false;
            v.first_violation_time = s.t;
        }
    }
    return v;
}

struct RuleVerdict {
    bool holds = true;
    double first_violation_time = std::numeric_limits<double>::quiet_NaN();
    double worst_ratio = 0.0;  // max ||e|| / (sigma ||x||) over checked samples
    std::size_t checked = 0;
    std::size_t exempt = 0;
};

namespace detail {

// Within `slack` of an edge of some bar H_n.
inline bool near_bar_edge(const SamplingRobustness& r, double t, double slack) {
    for (std::size_t n = 0; n < r.sequence.size(); ++n) {
        if (r.sequence[n].onset > t + slack) break;
        if (std::abs(t - r.sequence[n].onset) <= slack || std::abs(t - r.bar_end(n)) <= slack) return true;
    }
    return false;
}

}  // namespace detail

/// ||e(t)|| <= sigma ||x(t)|| (1 + 1e-6) at every sample outside bar Xi,
/// excluding samples within `time_slack` of an edge of bar Xi and rows before
/// the first successful update (no sample is held yet).
inline RuleVerdict check_update_rule(const Trace& trace, double sigma, const SamplingRobustness& robustness,
                                     double time_slack) {
    RuleVerdict v;
    bool sampled = false;
    for (const auto& s : trace.samples) {
        sampled = sampled || s.success;
        if (!sampled || robustness.in_xi_bar(s.t) || detail::near_bar_edge(robustness, s.t, time_slack)) {
            ++v.exempt;
            continue;
        }
        ++v.checked;
        const double limit = sigma * s.x_norm;
        double ratio = 0.0;
        if (s.e_norm > 0.0) ratio = limit > 0.0 ? s.e_norm / limit : std::numeric_limits<double>::infinity();
        v.worst_ratio = std::max(v.worst_ratio, ratio);
        if (s.e_norm > limit * (1.0 + 1e-6) && v.holds) {
            v.holds = false;
            v.first_violation_time = s.t;
        }
    }
    return v;
}

struct Lemma1Verdict {
    bool holds = true;
    double first_violation_time = std::numeric_limits<double>::quiet_NaN();
    double worst_ratio = 0.0;  // max ||x(t_{k(h_n)})|| / ((1 + sigma) ||x(h_n)||)
    std::size_t checked = 0;
    std::size_t exempt = 0;  // onsets inside an earlier bar H_m
};

/// ||x(t_{k(h_n)})|| <= (1 + sigma) ||x(h_n)|| (1 + 1e-9) at every onset.
///
/// An onset that falls inside an earlier extended interval bar H_m has had no
/// successful update since the previous attack, so the premise (the update
/// rule holding at h_n) is absent; such onsets are counted as exempt.
inline Lemma1Verdict check_lemma1(const Trace& trace, double sigma, const SamplingRobustness& robustness) {
    Lemma1Verdict v;
    for (const auto& snap : trace.dos_onsets) {
        bool covered = false;
        for (std::size_t m = 0; m < snap.n && m < robustness.sequence.size(); ++m) {
            if (snap.h < robustness.bar_end(m)) covered = true;
        }
        if (covered) {
            ++v.exempt;
            continue;
        }
        ++v.checked;
        const double held = snap.x_held.norm();
        const double limit = (1.0 + sigma) * snap.x.norm();
        double ratio = 0.0;
        if (held > 0.0) ratio = limit > 0.0 ? held / limit : std::numeric_limits<double>::infinity();
        v.worst_ratio = std::max(v.worst_ratio, ratio);
        if (held > limit * (1.0 + 1e-9) && v.holds) {
            v.holds = false;
            v.first_violation_time = snap.h;
        }
    }
    return v;
}

struct DecayVerdict {
    bool holds = true;
    double first_violation_time = std::numeric_limits<double>::quiet_NaN();
    double worst_ratio = 0.0;  // max V(x(t)) / (e^{-w1 (t - s)} V(x(s)))
    std::size_t checked = 0;
};

/// On each maximal run of samples outside bar Xi (edges within `time_slack`
/// excluded), V(x(t)) <= e^{-omega1_L (t - s)} V(x(s)) (1 + 1e-6), where s is
/// the first sample of the run.
inline DecayVerdict check_lyapunov_decay(const Trace& trace, const LyapunovConstants& lyap,
                                         const SamplingRobustness& robustness, double time_slack) {
    DecayVerdict v;
    std::optional<std::pair<double, double>> start;  // (s, V(x(s)))
    for (const auto& s : trace.samples) {
        if (robustness.in_xi_bar(s.t) || detail::near_bar_edge(robustness, s.t, time_slack)) {
            start.reset();
            continue;
        }
        const double vt = lyap.lyapunov(s.x);
        if (!start) {
            start = std::make_pair(s.t, vt);
            continue;
        }
        ++v.checked;
        const double bound = std::exp(-lyap.omega1_l * (s.t - start->first)) * start->second;
        double ratio = 0.0;
        if (vt > 0.0) ratio = bound > 0.0 ? vt / bound : std::numeric_limits<double>::infinity();
        v.worst_ratio = std::max(v.worst_ratio, ratio);
        if (vt > bound * (1.0 + 1e-6) && v.holds) {
            v.holds = false;
            v.first_violation_time = s.t;
        }
    }
    return v;
}

/// True when u only changes at success rows, and (zero-input mode) at DoS breakpoints.
inline bool input_piecewise_constant(const Trace& trace, const DosSequence& dos, bool zero_mode) {
    for (std::size_t i = 1; i < trace.samples.size(); ++i) {
        const auto& prev = trace.samples[i - 1];
        const auto& cur = trace.samples[i];
        if (cur.u == prev.u) continue;
        if (cur.attempt && cur.success) continue;
        if (zero_mode && cur.jammed != prev.jammed) continue;
        if (zero_mode && is_jammed(dos, prev.t) != cur.jammed) continue;
        return false;
    }
    return true;
}

/// CSV: t,x1..xn,u1..um,e_norm,x_norm,jammed,attempt,success with 17 significant digits.
inline void write_trace_csv(std::ostream& os, const Trace& trace) {
    const auto flags = os.flags();
    const auto prec = os.precision();
    const Eigen::Index n = trace.samples.empty() ? 0 : trace.samples.front().x.size();
    const Eigen::Index m = trace.samples.empty() ? 0 : trace.samples.front().u.size();
    os << 't';
    for (Eigen::Index i = 1; i <= n; ++i) os << ",x" << i;
    for (Eigen::Index i = 1; i <= m; ++i) os << ",u" << i;
    os << ",e_norm,x_norm,jammed,attempt,success\n";
    os << std::setprecision(17);
    for (const auto& s : trace.samples) {
        os << s.t;
        for (Eigen::Index i = 0; i < n; ++i) os << ',' << s.x(i);
        for (Eigen::Index i = 0; i < m; ++i) os << ',' << s.u(i);
        os << ',' << s.e_norm << ',' << s.x_norm << ',' << int{s.jammed} << ',' << int{s.attempt} << ','
           << int{s.success} << '\n';
    }
    os.flags(flags);
    os.precision(prec);
}

}  // namespace dosres
