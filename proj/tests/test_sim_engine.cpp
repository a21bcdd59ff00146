#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "support.hpp"

using namespace dosres;
using dosres::testing::make_config;

namespace {

RealMatrix scalar(double v) { return RealMatrix::Constant(1, 1, v); }
RealVector vec(std::initializer_list<double> v) {
    RealVector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

LtiPlant scalar_plant(InputMode mode = InputMode::HoldLast) {
    return LtiPlant(scalar(1), scalar(1), scalar(-2), mode);
}

TriggerConfig admissible(const LtiPlant& p, double sigma, double ratio = 0.5) {
    const double d2 = riccati_delta2(p, sigma);
    return {sigma, ratio * d2, d2, {}};
}

}  // namespace

TEST(FindEventCrossing, ScalarClosedForm) {
    const LtiPlant p(scalar(-1), scalar(1), scalar(0));  // x' = -x, BK = 0
    const auto hit = find_event_crossing(p, vec({2.0}), vec({2.0}), 1.0, 0.0, 10.0, 0.1, 1e-12);
    ASSERT_TRUE(hit.has_value());
    EXPECT_NEAR(*hit, std::log(2.0), 1e-10);
    EXPECT_LE(*hit, std::log(2.0) + 1e-15);  // lower end of the final bracket
}

TEST(FindEventCrossing, ZeroStateHasNoCrossing) {
    const LtiPlant p = scalar_plant();
    EXPECT_FALSE(find_event_crossing(p, vec({0.0}), vec({0.0}), 0.5, 0.0, 10.0, 0.1, 1e-9).has_value());
}

TEST(FindEventCrossing, NoneBeforeTmax) {
    const LtiPlant p(scalar(-1), scalar(1), scalar(0));
    EXPECT_FALSE(find_event_crossing(p, vec({2.0}), vec({2.0}), 1.0, 0.0, 0.5, 0.1, 1e-12).has_value());
}

TEST(FindEventCrossing, RespectsRiccatiLowerBound) {
    std::mt19937_64 rng(61);
    for (int trial = 0; trial < 50; ++trial) {
        const LtiPlant p = dosres::testing::random_stable_plant(rng, 2 + trial % 3);
        const double sigma = dosres::testing::uniform(rng, 0.02, 1.0);
        const double d2 = riccati_delta2(p, sigma);
        const RealVector x = dosres::testing::random_matrix(rng, p.states(), 1, -1, 1);
        const double t0 = dosres::testing::uniform(rng, 0.0, 5.0);
        const auto hit = find_event_crossing(p, x, x, sigma, t0, t0 + 100.0, d2 / 2, 1e-10);
        if (hit) {
            EXPECT_GE(*hit, t0 + d2 - 1e-6);
        }
    }
}

TEST(FindEventCrossing, DimensionMismatch) {
    EXPECT_THROW(find_event_crossing(scalar_plant(), vec({1, 2}), vec({1}), 0.5, 0.0, 1.0, 0.1, 1e-9),
                 DimensionError);
}

TEST(Run, DosFreePureTimeIsPeriodic) {
    const LtiPlant p = scalar_plant();
    const auto trig = admissible(p, 0.25);
    const auto trace = run(make_config(p, LogicKind::PureTime, trig, {}, {0.0, 2.0}, vec({1.0}), 5.0));
    ASSERT_GE(trace.attempts.size(), 2u);
    for (std::size_t k = 0; k < trace.attempts.size(); ++k) {
        EXPECT_TRUE(trace.attempts[k].success);
        EXPECT_EQ(trace.attempts[k].t, trace.attempts.front().t + 0.0 + [&] {
            double t = 0.0;
            for (std::size_t j = 0; j < k; ++j) t += trig.delta2;
            return t;
        }());
    }
    EXPECT_FALSE(trace.diverged);
}

TEST(Run, ZeroInitialStateStaysAtEquilibrium) {
    const LtiPlant p = scalar_plant();
    const auto trig = admissible(p, 0.25);
    const DosSequence dos({{0.0, 0.5}, {2.0, 0.3}});
    for (auto logic : {LogicKind::EventTime, LogicKind::PureTime, LogicKind::SelfTrigger, LogicKind::IdealEvent}) {
        const auto trace = run(make_config(p, logic, trig, dos, {1.0, 2.0}, vec({0.0}), 3.0));
        for (const auto& s : trace.samples) {
            EXPECT_EQ(s.x_norm, 0.0);
            EXPECT_EQ(s.u(0), 0.0);
        }
    }
}

TEST(Run, StartUpUnderDosUsesZeroInput) {
    const LtiPlant p = scalar_plant();
    const auto trig = admissible(p, 0.25);
    const DosSequence dos({{0.0, 0.5}});
    const auto trace = run(make_config(p, LogicKind::PureTime, trig, dos, {1.0, 2.0}, vec({1.0}), 1.0));
    EXPECT_FALSE(trace.attempts.front().success);
    for (const auto& s : trace.samples) {
        if (s.t >= 0.5) break;
        EXPECT_EQ(s.u(0), 0.0);
        EXPECT_NEAR(s.x(0), std::exp(s.t), 1e-12 * std::exp(s.t));  // x' = x open loop
        EXPECT_NEAR(s.e_norm, s.x_norm, 1e-15);                    // e = -x
    }
    ASSERT_FALSE(trace.dos_onsets.empty());
    EXPECT_EQ(trace.dos_onsets.front().x_held, vec({0.0}));
}

TEST(Run, AttemptAtIntervalEndSucceeds) {
    const LtiPlant p = scalar_plant();
    const TriggerConfig trig{0.25, 0.125, 0.125, {}};  // Riccati bound is ln 1.2
    const DosSequence dos({{0.25, 0.25}});
    const auto trace = run(make_config(p, LogicKind::PureTime, trig, dos, {1.0, 2.0}, vec({1.0}), 1.0));
    int seen = 0;
    for (const auto& a : trace.attempts) {
        if (a.t == 0.25) {
            EXPECT_FALSE(a.success);
            ++seen;
        }
        if (a.t == 0.5) {
            EXPECT_TRUE(a.success);
            ++seen;
        }
    }
    EXPECT_EQ(seen, 2);
}

TEST(Run, SuccessesOnlyWhenNotJammedAndInputPiecewiseConstant) {
    std::mt19937_64 rng(63);
    for (int trial = 0; trial < 12; ++trial) {
        const auto mode = trial % 2 ? InputMode::ZeroDuringDos : InputMode::HoldLast;
        const LtiPlant p = dosres::testing::random_stable_plant(rng, 2, mode);
        const auto trig = admissible(p, 0.1, 0.5);
        const DosBudget budget{0.5, 3.0};
        const auto dos = gen_random_budgeted(budget, 2 * trig.delta1, 70 + trial, 5.0);
        const auto logic = static_cast<LogicKind>(trial % 4);
        const auto trace = run(make_config(p, logic, trig, dos, budget, vec({1.0, -0.5}), 5.0));
        for (const auto& a : trace.attempts) EXPECT_EQ(a.success, !is_jammed(dos, a.t));
        EXPECT_TRUE(input_piecewise_constant(trace, dos, mode == InputMode::ZeroDuringDos));
        for (std::size_t i = 1; i < trace.samples.size(); ++i) {
            EXPECT_LE(trace.samples[i - 1].t, trace.samples[i].t);
        }
        // Attempt spacing never drops below delta1 (the ideal rule retries at the interval end instead).
        if (logic == LogicKind::IdealEvent) continue;
        for (std::size_t k = 1; k < trace.attempts.size(); ++k) {
            EXPECT_GE(trace.attempts[k].t - trace.attempts[k - 1].t, trig.delta1 * (1 - 1e-12) - 1e-12)
                << to_string(logic);
        }
    }
}

TEST(Run, FullHorizonDosOnUnstablePlantDiverges) {
    RealMatrix a(2, 2);
    a << 1, 1, 0, 0.5;
    const LtiPlant p(a, RealMatrix::Identity(2, 2), -2.0 * RealMatrix::Identity(2, 2));
    const auto trig = admissible(p, 0.1);
    const DosSequence dos({{0.0, 1000.0}});
    const auto trace = run(make_config(p, LogicKind::PureTime, trig, dos, {50.0, 2.0}, vec({1.0, 1.0}), 40.0));
    EXPECT_TRUE(trace.diverged);
    for (const auto& s : trace.samples) {
        const RealVector oracle = mat_exp(a, s.t) * vec({1.0, 1.0});
        EXPECT_LE((s.x - oracle).norm(), 1e-6 * std::max(1.0, oracle.norm()));
    }
}

TEST(Run, IdealEventRetriesAtIntervalEnd) {
    const LtiPlant p = scalar_plant();
    const auto trig = admissible(p, 0.25);
    const DosSequence dos({{0.0, 0.7}});
    const auto trace = run(make_config(p, LogicKind::IdealEvent, trig, dos, {1.0, 2.0}, vec({1.0}), 2.0));
    ASSERT_GE(trace.attempts.size(), 2u);
    EXPECT_FALSE(trace.attempts[0].success);
    EXPECT_EQ(trace.attempts[1].t, 0.7);
    EXPECT_TRUE(trace.attempts[1].success);
}

TEST(Run, DeterministicTraces) {
    std::mt19937_64 rng(65);
    const LtiPlant p = dosres::testing::random_stable_plant(rng, 3);
    const auto trig = admissible(p, 0.1);
    const DosBudget budget{0.5, 3.0};
    const auto dos = gen_random_budgeted(budget, 2 * trig.delta1, 9, 5.0);
    const auto cfg = make_config(p, LogicKind::EventTime, trig, dos, budget, vec({1.0, 0.5, -1.0}), 5.0);
    std::ostringstream a, b;
    write_trace_csv(a, run(cfg));
    write_trace_csv(b, run(cfg));
    EXPECT_EQ(a.str(), b.str());
}

TEST(Run, ConfigValidation) {
    const LtiPlant p = scalar_plant();
    auto trig = admissible(p, 0.25);
    auto cfg = make_config(p, LogicKind::PureTime, trig, {}, {0.0, 2.0}, vec({1.0}), 1.0);
    cfg.horizon = 0.0;
    EXPECT_THROW(run(cfg), InputError);
    cfg.horizon = 1.0;
    cfg.record_step = trig.delta1;
    EXPECT_THROW(run(cfg), InputError);
    cfg.record_step = trig.delta1 / 4;
    cfg.dos = DosSequence({{0.0, 1.0}});
    EXPECT_THROW(run(cfg), InputError);  // violates kappa = 0, tau = 2
    cfg.dos = {};
    cfg.x0 = vec({1.0, 2.0});
    EXPECT_THROW(run(cfg), DimensionError);
    cfg.x0 = vec({1.0});
    cfg.trigger.delta2 *= 2;
    EXPECT_THROW(run(cfg), InputError);
}

TEST(VerifyGes, Examples) {
    Trace zero;
    for (double t = 0.0; t < 1.0; t += 0.1) zero.samples.push_back({t, vec({0.0}), vec({0.0}), 0, 0, false, false, false});
    EXPECT_TRUE(verify_ges(zero, 1.0, 5.0).holds);

    // Pure flow of a stable Phi against its decay envelope.
    RealMatrix phi(2, 2);
    phi << -1, 3, 0, -2;
    const auto env = decay_envelope(phi);
    Trace flow;
    const RealVector x0 = vec({0.3, 1.0});
    double peak = 0.0;
    double peak_t = 0.0;
    for (double t = 0.0; t < 10.0; t += 0.01) {
        const RealVector x = mat_exp(phi, t) * x0;
        flow.samples.push_back({t, x, vec({0.0}), 0, x.norm(), false, false, false});
        const double ratio = x.norm() / (std::exp(-env.lambda * t) * x0.norm());
        if (ratio > peak) {
            peak = ratio;
            peak_t = t;
        }
    }
    EXPECT_TRUE(verify_ges(flow, env.mu, env.lambda).holds);
    const auto v = verify_ges(flow, 0.9 * peak, env.lambda);
    EXPECT_FALSE(v.holds);
    EXPECT_NEAR(v.worst_time, peak_t, 1e-12);
}

TEST(CheckUpdateRule, IdealEventWithoutDosHoldsEverywhere) {
    std::mt19937_64 rng(67);
    for (int trial = 0; trial < 5; ++trial) {
        const LtiPlant p = dosres::testing::random_stable_plant(rng, 2);
        const auto trig = admissible(p, 0.2);
        const auto trace = run(make_config(p, LogicKind::IdealEvent, trig, {}, {0.0, 2.0}, vec({1.0, 1.0}), 3.0));
        const auto r = measure_robustness(trace.attempt_times(), {});
        const auto v = check_update_rule(trace, 0.2, r, 1e-8);
        EXPECT_TRUE(v.holds) << v.first_violation_time;
        EXPECT_EQ(v.exempt, 1u);  // the t = 0 row before the first sample is taken
    }
}

TEST(CheckUpdateRule, SamplesInsideBarXiAreExempt) {
    Trace t;
    t.samples.push_back({0.0, vec({1.0}), vec({0.0}), 0.0, 1.0, false, true, true});
    t.samples.push_back({1.5, vec({1.0}), vec({0.0}), 5.0, 1.0, true, false, false});  // large error, jammed
    t.samples.push_back({3.0, vec({1.0}), vec({0.0}), 0.1, 1.0, false, false, false});
    const DosSequence seq({{1.0, 1.0}});
    const auto r = measure_robustness({}, seq);
    const auto v = check_update_rule(t, 0.2, r, 1e-9);
    EXPECT_TRUE(v.holds);
    EXPECT_EQ(v.exempt, 1u);
    t.samples.back().e_norm = 0.5;
    EXPECT_FALSE(check_update_rule(t, 0.2, r, 1e-9).holds);
}

TEST(CheckUpdateRule, PureTimeHoldsOutsideBarXi) {
    std::mt19937_64 rng(69);
    for (int trial = 0; trial < 8; ++trial) {
        const LtiPlant p = dosres::testing::random_stable_plant(rng, 2);
        const auto trig = admissible(p, 0.15);
        const DosBudget budget{0.5, 2.5};
        const auto dos = gen_random_budgeted(budget, 3 * trig.delta1, 200 + trial, 4.0);
        const auto trace = run(make_config(p, LogicKind::PureTime, trig, dos, budget, vec({1.0, -1.0}), 4.0));
        const auto r = measure_robustness(trace.attempt_times(), dos.clipped(4.0));
        EXPECT_TRUE(check_update_rule(trace, 0.15, r, 1e-8).holds);
        EXPECT_TRUE(check_lemma1(trace, 0.15, r).holds);
    }
}

TEST(TraceCsv, HeaderAndPrecision) {
    const LtiPlant p(RealMatrix::Identity(2, 2) * -1.0, RealMatrix::Identity(2, 2), RealMatrix::Zero(2, 2));
    const auto trig = admissible(p, 0.3);
    const auto trace = run(make_config(p, LogicKind::PureTime, trig, {}, {0.0, 2.0}, vec({1.0 / 3.0, 1.0}), 0.5));
    std::ostringstream os;
    write_trace_csv(os, trace);
    std::istringstream is(os.str());
    std::string header, first;
    std::getline(is, header);
    std::getline(is, first);
    EXPECT_EQ(header, "t,x1,x2,u1,u2,e_norm,x_norm,jammed,attempt,success");
    EXPECT_NE(first.find("0.33333333333333331"), std::string::npos) << first;
}
