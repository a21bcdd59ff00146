#pragma once

// DoS attack signals: a sorted list of jamming intervals H_n = [h_n, h_n + tau_n),
// their cumulative measure |Xi(t)|, the slow-on-average budget
// |Xi(t)| <= kappa + t / tau, and deterministic generators.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dosres/errors.hpp"

namespace dosres {

struct DosInterval {
    double onset = 0.0;     // h_n
    double duration = 0.0;  // tau_n

    [[nodiscard]] double end() const { return onset + duration; }
    [[nodiscard]] bool contains(double t) const { return t >= onset && t < end(); }

    friend bool operator==(const DosInterval&, const DosInterval&) = default;
};

/// Non-overlapping, ascending DoS intervals with positive durations.
class DosSequence {
public:
    DosSequence() = default;

    explicit DosSequence(std::vector<DosInterval> intervals) : intervals_(std::move(intervals)) {
        for (std::size_t i = 0; i < intervals_.size(); ++i) {
            const auto& iv = intervals_[i];
            if (!std::isfinite(iv.onset) || !std::isfinite(iv.duration) || iv.onset < 0.0) {
                throw InputError("DosSequence: interval " + std::to_string(i) + " has invalid onset");
            }
            if (!(iv.duration > 0.0)) {
                throw InputError("DosSequence: interval " + std::to_string(i) + " has non-positive duration");
            }
            if (i > 0 && iv.onset < intervals_[i - 1].end()) {
                throw InputError("DosSequence: interval " + std::to_string(i) + " overlaps or precedes its predecessor");
            }
        }
    }

    [[nodiscard]] const std::vector<DosInterval>& intervals() const noexcept { return intervals_; }
    [[nodiscard]] std::size_t size() const noexcept { return intervals_.size(); }
    [[nodiscard]] bool empty() const noexcept { return intervals_.empty(); }
    [[nodiscard]] const DosInterval& operator[](std::size_t n) const { return intervals_[n]; }

    /// Shortest duration, +inf when empty.
    [[nodiscard]] double min_duration() const {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& iv : intervals_) m = std::min(m, iv.duration);
        return m;
    }

    /// Intervals with onset strictly before `horizon`.
    [[nodiscard]] DosSequence clipped(double horizon) const {
        std::vector<DosInterval> out;
        for (const auto& iv : intervals_) {
            if (iv.onset < horizon) out.push_back(iv);
        }
        return DosSequence(std::move(out));
    }

    friend bool operator==(const DosSequence&, const DosSequence&) = default;

private:
    std::vector<DosInterval> intervals_;
};

/// Witness (kappa, tau) for |Xi(t)| <= kappa + t / tau.
struct DosBudget {
    double kappa = 0.0;
    double tau_avg = 2.0;

    [[nodiscard]] double bound(double t) const { return kappa + t / tau_avg; }

    void validate() const {
        if (!(kappa >= 0.0) || !std::isfinite(kappa)) throw InputError("DosBudget: kappa must be >= 0");
        if (!(tau_avg > 1.0)) throw InputError("DosBudget: tau must be > 1");
    }

    friend bool operator==(const DosBudget&, const DosBudget&) = default;
};

/// Index of the last onset strictly before t, or -1.
inline long n_of_t(const DosSequence& seq, double t) {
    const auto& iv = seq.intervals();
    auto it = std::lower_bound(iv.begin(), iv.end(), t,
                               [](const DosInterval& a, double v) { return a.onset < v; });
    return static_cast<long>(it - iv.begin()) - 1;
}

inline bool is_jammed(const DosSequence& seq, double t) {
    const auto& iv = seq.intervals();
    auto it = std::upper_bound(iv.begin(), iv.end(), t,
                               [](double v, const DosInterval& a) { return v < a.onset; });
    if (it == iv.begin()) return false;
    return std::prev(it)->contains(t);
}

/// tau_n(t) = min(tau_n, t - h_n), the part of H_n elapsed by time t (0 before h_n).
inline double tau_n_of_t(const DosSequence& seq, std::size_t n, double t) {
    const auto& iv = seq[n];
    return std::clamp(t - iv.onset, 0.0, iv.duration);
}

/// |Xi(t)|: total jammed time in [0, t].
inline double xi_measure(const DosSequence& seq, double t) {
    const long last = n_of_t(seq, t);
    double total = 0.0;
    for (long n = 0; n < last; ++n) total += seq[static_cast<std::size_t>(n)].duration;
    if (last >= 0) total += tau_n_of_t(seq, static_cast<std::size_t>(last), t);
    return total;
}

struct BudgetCheck {
    bool ok = true;
    double time = 0.0;    // first breakpoint where the budget fails
    double excess = 0.0;  // |Xi(time)| - (kappa + time / tau) at that breakpoint

    explicit operator bool() const { return ok; }
};

/// Checks |Xi(t)| <= kappa + t / tau on [0, horizon].
///
/// Between breakpoints both sides are affine in t, so the inequality only has
/// to be checked at t = 0, every onset and end inside the horizon, and the
/// horizon itself. Uses the raw inequality for any tau > 0.
inline BudgetCheck check_slow_average(const DosSequence& seq, const DosBudget& budget, double horizon) {
    std::vector<double> points{0.0, horizon};
    for (const auto& iv : seq.intervals()) {
        if (iv.onset <= horizon) points.push_back(iv.onset);
        if (iv.end() <= horizon) points.push_back(iv.end());
    }
    std::sort(points.begin(), points.end());
    for (double t : points) {
        const double excess = xi_measure(seq, t) - budget.bound(t);
        if (excess > 0.0) return BudgetCheck{false, t, excess};
    }
    return BudgetCheck{};
}

struct GeneratedDos {
    DosSequence sequence;
    DosBudget budget;  // a witness the sequence satisfies
};

/// Intervals [onset + k period, onset + k period + duty period) with onset < horizon.
/// Satisfies the budget kappa = duty * period, tau = 1 / duty.
inline GeneratedDos gen_periodic(double onset, double period, double duty, double horizon) {
    if (!(period > 0.0)) throw InputError("gen_periodic: period must be positive");
    if (!(duty > 0.0 && duty < 1.0)) throw InputError("gen_periodic: duty must lie in (0, 1)");
    if (!(onset >= 0.0)) throw InputError("gen_periodic: onset must be >= 0");
    std::vector<DosInterval> out;
    for (std::size_t k = 0;; ++k) {
        const double h = onset + static_cast<double>(k) * period;
        if (!(h < horizon)) break;
        out.push_back({h, duty * period});
    }
    return {DosSequence(std::move(out)), DosBudget{duty * period, 1.0 / duty}};
}

namespace detail {

// Uniform in [0, 1) from the top 53 bits; independent of the standard
// library's distribution implementations so outputs are portable.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Room kept below the budget line so rounding never flips the validator.
inline double budget_margin(double t) { return 1e-10 * (1.0 + std::abs(t)); }

}  // namespace detail

/// Random budgeted attack, deterministic in `seed`.
///
/// Gaps and durations are drawn uniformly; an interval that would break
/// |Xi| <= kappa + t / tau at its end is shortened, or pushed later until a
/// `min_duration` interval fits. Throws GenerationError when not even the
/// first interval fits before the horizon.
inline DosSequence gen_random_budgeted(const DosBudget& budget, double min_duration, std::uint64_t seed,
                                       double horizon) {
    budget.validate();
    if (!(min_duration > 0.0)) throw InputError("gen_random_budgeted: min_duration must be positive");
    if (!(horizon > 0.0)) throw InputError("gen_random_budgeted: horizon must be positive");

    std::mt19937_64 rng(seed);
    const double tau = budget.tau_avg;
    const double slope = 1.0 - 1.0 / tau;
    const double mean_gap = min_duration * tau;
    const double margin = 1e-10 * (1.0 + budget.kappa + horizon);

    std::vector<DosInterval> out;
    double cursor = 0.0;  // end of the previous interval
    double jammed = 0.0;  // |Xi| at cursor
    // Largest d with jammed + d <= kappa + (h + d) / tau - margin.
    auto max_duration_at = [&](double h) { return (budget.kappa + h / tau - jammed - margin) / slope; };
    while (true) {
        const bool start_jammed = out.empty() && detail::unit_uniform(rng) < 0.25;
        const double gap = start_jammed ? 0.0 : 2.0 * mean_gap * detail::unit_uniform(rng);
        double onset = cursor + gap;
        double duration = min_duration * (1.0 + 3.0 * detail::unit_uniform(rng));
        if (max_duration_at(onset) < min_duration) {
            // Earliest onset where a min_duration interval fits, with one extra margin of room.
            onset = std::max(onset, (tau - 1.0) * min_duration + tau * (jammed + 2.0 * margin - budget.kappa));
        }
        if (!(onset < horizon)) break;
        duration = std::max(min_duration, std::min(duration, max_duration_at(onset)));
        out.push_back({onset, duration});
        cursor = onset + duration;
        jammed += duration;
    }
    if (out.empty()) {
        throw GenerationError("gen_random_budgeted: min_duration too large for the budget within the horizon");
    }
    DosSequence seq(std::move(out));
    if (!check_slow_average(seq, budget, seq.intervals().back().end())) {
        throw GenerationError("gen_random_budgeted: internal budget violation");
    }
    return seq;
}

/// Jams `min_duration` intervals starting exactly at the given attempt times,
/// earliest first, skipping any that the budget cannot afford.
inline DosSequence gen_greedy_adversary(const DosBudget& budget, double min_duration,
                                        const std::vector<double>& attempt_times) {
    if (!(min_duration > 0.0)) throw InputError("gen_greedy_adversary: min_duration must be positive");
    if (!std::is_sorted(attempt_times.begin(), attempt_times.end())) {
        throw InputError("gen_greedy_adversary: attempt times must be sorted");
    }
    std::vector<DosInterval> out;
    double jammed = 0.0;
    for (double a : attempt_times) {
        if (a < 0.0) continue;
        if (!out.empty() && a < out.back().end()) continue;  // already covered
        const double end = a + min_duration;
        if (jammed + min_duration <= budget.bound(end) - detail::budget_margin(end)) {
            out.push_back({a, min_duration});
            jammed += min_duration;
        }
    }
    return DosSequence(std::move(out));
}

// ---------------------------------------------------------------------------
// Text format: optional "# kappa=<v> tau=<v>" header, then one "h tau" per line.

struct DosFile {
    DosSequence sequence;
    std::optional<DosBudget> budget;

    friend bool operator==(const DosFile&, const DosFile&) = default;
};

inline void write_dos(std::ostream& os, const DosSequence& seq, const std::optional<DosBudget>& budget = std::nullopt) {
    const auto flags = os.flags();
    const auto prec = os.precision();
    os << std::setprecision(17);
    if (budget) os << "# kappa=" << budget->kappa << " tau=" << budget->tau_avg << '\n';
    for (const auto& iv : seq.intervals()) os << iv.onset << ' ' << iv.duration << '\n';
    os.flags(flags);
    os.precision(prec);
}

inline DosFile read_dos(std::istream& is) {
    DosFile file;
    std::vector<DosInterval> intervals;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        if (line[first] == '#') {
            const auto k = line.find("kappa=");
            const auto t = line.find("tau=");
            if (k != std::string::npos && t != std::string::npos) {
                try {
                    file.budget = DosBudget{std::stod(line.substr(k + 6)), std::stod(line.substr(t + 4))};
                } catch (const std::exception&) {
                    throw ParseError("malformed budget header", lineno);
                }
            }
            continue;
        }
        std::istringstream fields(line);
        DosInterval iv;
        std::string extra;
        if (!(fields >> iv.onset >> iv.duration) || (fields >> extra)) {
            throw ParseError("expected '<onset> <duration>'", lineno);
        }
        intervals.push_back(iv);
    }
    try {
        file.sequence = DosSequence(std::move(intervals));
    } catch (const InputError& e) {
        throw ParseError(e.what(), 0);
    }
    return file;
}

}  // namespace dosres
