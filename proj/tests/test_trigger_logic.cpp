#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support.hpp"

using namespace dosres;
using dosres::testing::riccati_closed_form;

namespace {

RealMatrix scalar(double v) { return RealMatrix::Constant(1, 1, v); }

LoopState state_at(double t, RealVector x, bool failed) {
    LoopState s;
    s.t = t;
    s.x = std::move(x);
    s.x_held = s.x;
    s.t_held = t;
    s.last_attempt_failed = failed;
    return s;
}

}  // namespace

TEST(RiccatiDelta2, PureExponentialCase) {
    EXPECT_NEAR(riccati_delta2(1.0, 0.0, 1.0), std::log(2.0), 1e-12);
}

TEST(RiccatiDelta2, VanishesWithSigma) {
    double prev = riccati_delta2(1.0, 1.0, 1.0);
    for (double s : {0.1, 1e-2, 1e-4, 1e-8}) {
        const double d = riccati_delta2(1.0, 1.0, s);
        EXPECT_GT(d, 0.0);
        EXPECT_LT(d, prev);
        prev = d;
    }
    EXPECT_LT(prev, 1e-7);
}

TEST(RiccatiDelta2, MatchesClosedFormSolution) {
    EXPECT_NEAR(riccati_delta2(1.0, 1.0, 0.5), riccati_closed_form(1.0, 1.0, 0.5), 1e-9 * riccati_closed_form(1.0, 1.0, 0.5));
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 200; ++trial) {
        const double a = dosres::testing::uniform(rng, 0.05, 10.0);
        const double b = trial % 10 == 0 ? 0.0 : dosres::testing::uniform(rng, 0.0, 10.0);
        const double sigma = dosres::testing::uniform(rng, 1e-3, 3.0);
        const double oracle = riccati_closed_form(a, b, sigma);
        EXPECT_NEAR(riccati_delta2(a, b, sigma), oracle, 1e-9 * oracle) << a << ' ' << b << ' ' << sigma;
    }
}

TEST(RiccatiDelta2, RejectsBadInput) {
    EXPECT_THROW(riccati_delta2(0.0, 1.0, 0.1), InputError);
    EXPECT_THROW(riccati_delta2(-1.0, 1.0, 0.1), InputError);
    EXPECT_THROW(riccati_delta2(1.0, -1.0, 0.1), InputError);
    EXPECT_THROW(riccati_delta2(1.0, 1.0, 0.0), InputError);
}

TEST(TriggerConfig, Validation) {
    const LtiPlant p(scalar(1), scalar(1), scalar(-2));
    const double bound = riccati_delta2(p, 0.25);
    EXPECT_NO_THROW(validate_against(TriggerConfig{0.25, bound / 2, bound, {}}, p));
    EXPECT_THROW(validate_against(TriggerConfig{0.25, bound / 2, bound * 1.01, {}}, p), InputError);
    EXPECT_THROW((TriggerConfig{0.25, 0.2, 0.1, {}}.validate()), InputError);
    EXPECT_THROW((TriggerConfig{0.0, 0.1, 0.1, {}}.validate()), InputError);
    EXPECT_THROW((TriggerConfig{0.1, 0.0, 0.1, {}}.validate()), InputError);
}

TEST(Varphi, ClassKIntoUnitInterval) {
    const auto z = Varphi::zero();
    EXPECT_EQ(z(0.0), 0.0);
    EXPECT_EQ(z(5.0), 0.0);
    const auto v = Varphi::saturated_linear(2.0);
    EXPECT_EQ(v(0.0), 0.0);
    EXPECT_DOUBLE_EQ(v(0.25), 0.5);
    EXPECT_EQ(v(0.5), 1.0);
    EXPECT_EQ(v(10.0), 1.0);
    double prev = -1.0;
    for (double s = 0.0; s < 0.5; s += 0.01) {
        EXPECT_GT(v(s), prev);
        prev = v(s);
    }
    EXPECT_THROW(Varphi::saturated_linear(0.0), InputError);
}

TEST(NextUpdateProp1, FallbackBranches) {
    const TriggerConfig cfg{0.2, 0.05, 0.1, {}};
    int calls = 0;
    auto finder = [&](double, double) -> std::optional<double> {
        ++calls;
        return 7.0;
    };
    RealVector x(2);
    x << 1, 1;
    EXPECT_DOUBLE_EQ(next_update_prop1(state_at(3.0, x, true), cfg, finder), 3.05);
    EXPECT_DOUBLE_EQ(next_update_prop1(state_at(3.0, RealVector::Zero(2), false), cfg, finder), 3.05);
    EXPECT_EQ(calls, 0);
    EXPECT_DOUBLE_EQ(next_update_prop1(state_at(3.0, x, false), cfg, finder), 7.0);
    auto none = [](double, double) -> std::optional<double> { return std::nullopt; };
    EXPECT_DOUBLE_EQ(next_update_prop1(state_at(3.0, x, false), cfg, none), 3.0 + 0.1 * 1e6);
}

TEST(NextUpdateProp1, EventTimeRespectsRiccatiFloor) {
    std::mt19937_64 rng(43);
    for (int trial = 0; trial < 30; ++trial) {
        const LtiPlant p = dosres::testing::random_stable_plant(rng, 2 + trial % 2);
        const double sigma = dosres::testing::uniform(rng, 0.05, 0.5);
        const double d2 = riccati_delta2(p, sigma);
        const TriggerConfig cfg{sigma, d2 / 2, d2, {}};
        const RealVector x = dosres::testing::random_matrix(rng, p.states(), 1, -1, 1);
        const LoopState s = state_at(0.0, x, false);
        auto finder = [&](double from, double t_max) {
            return find_event_crossing(p, s.x, s.x_held, sigma, from, std::min(t_max, 50.0), cfg.delta1, 1e-10);
        };
        EXPECT_GE(next_update_prop1(s, cfg, finder), d2 - 1e-6);
    }
}

TEST(NextUpdateProp2, Branches) {
    const TriggerConfig cfg{0.2, 0.05, 0.1, {}};
    RealVector x(1);
    x << 1;
    EXPECT_DOUBLE_EQ(next_update_prop2(state_at(1.0, x, true), cfg), 1.05);
    EXPECT_DOUBLE_EQ(next_update_prop2(state_at(1.0, x, false), cfg), 1.1);
    const TriggerConfig equal{0.2, 0.1, 0.1, {}};
    EXPECT_EQ(next_update_prop2(state_at(1.0, x, true), equal), next_update_prop2(state_at(1.0, x, false), equal));
}

TEST(PredictState, Examples) {
    const LtiPlant p(scalar(0), scalar(1), scalar(-1));  // Phi = -1, BK = -1
    RealVector x(1);
    x << 2.5;
    EXPECT_EQ(predict_state(p, x, 1.0, 1.0), x);

    const LtiPlant no_bk(scalar(-1), scalar(1), scalar(0));  // BK = 0
    EXPECT_NEAR(predict_state(no_bk, x, 0.0, 1.3)(0), 2.5 * std::exp(-1.3), 1e-14);

    // Phi = -1, BK = 1: e^{-1} + int_0^1 e^{-(1-s)} ds = 1.
    const LtiPlant unit(scalar(-2), scalar(1), scalar(1));
    RealVector one(1);
    one << 1;
    EXPECT_NEAR(predict_state(unit, one, 0.0, 1.0)(0), 1.0, 1e-14);

    EXPECT_THROW(predict_state(p, x, 1.0, 0.5), InputError);
}

TEST(PredictState, HoldDynamicsAlternativeDiffers) {
    const LtiPlant unit(scalar(-2), scalar(1), scalar(1));  // A = -2, BK = 1
    RealVector one(1);
    one << 1;
    // x' = -2x + 1, x(0) = 1  ->  x(1) = 1/2 + e^{-2}/2.
    EXPECT_NEAR(predict_state_hold_dynamics(unit, one, 0.0, 1.0)(0), 0.5 + 0.5 * std::exp(-2.0), 1e-14);
}

TEST(NextUpdateProp3, Branches) {
    const LtiPlant p(scalar(1), scalar(1), scalar(-2));
    RealVector x(1);
    x << 1;
    LoopState s = state_at(2.0, x, false);
    s.t_held = 1.5;
    const TriggerConfig zero{0.2, 0.05, 0.1, Varphi::zero()};
    EXPECT_DOUBLE_EQ(next_update_prop3(s, p, zero), 2.1);
    const TriggerConfig saturated{0.2, 0.05, 0.1, Varphi::saturated_linear(1e6)};
    EXPECT_DOUBLE_EQ(next_update_prop3(s, p, saturated), 2.05);
    LoopState zero_state = s;
    zero_state.x_held = RealVector::Zero(1);
    EXPECT_DOUBLE_EQ(next_update_prop3(zero_state, p, saturated), 2.1);
}

TEST(NextUpdateProp3, MonotoneInPredictionNorm) {
    const LtiPlant p(scalar(1), scalar(1), scalar(-2));
    const TriggerConfig cfg{0.2, 0.05, 0.1, Varphi::saturated_linear(0.5)};
    double prev = std::numeric_limits<double>::infinity();
    for (double norm = 0.0; norm < 3.0; norm += 0.1) {
        RealVector x(1);
        x << norm;
        LoopState s = state_at(1.0, x, false);
        s.t_held = 0.8;
        const double next = next_update_prop3(s, p, cfg);
        EXPECT_LE(next, prev);
        EXPECT_GE(next, 1.0 + cfg.delta1 - 1e-15);
        EXPECT_LE(next, 1.0 + cfg.delta2 + 1e-15);
        prev = next;
    }
}

TEST(LogicKind, Names) {
    EXPECT_STREQ(to_string(LogicKind::EventTime), "event_time");
    EXPECT_STREQ(to_string(LogicKind::PureTime), "pure_time");
    EXPECT_STREQ(to_string(LogicKind::SelfTrigger), "self_trigger");
    EXPECT_STREQ(to_string(LogicKind::IdealEvent), "ideal_event");
}
