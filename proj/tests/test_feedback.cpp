#include "weakmeas/feedback.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "oracles.hpp"

using namespace weakmeas;
using oracle::deg;

TEST(TargetState, Examples) {
  EXPECT_NEAR(fidelity(State::from_pure(target_state(0.0)), Pure::plus_x()), 1.0, 1e-12);
  EXPECT_NEAR(fidelity(State::from_pure(target_state(std::numbers::pi / 2)), Pure::down()), 1.0, 1e-12);
  const Pure t30 = target_state(deg(30));
  EXPECT_NEAR(t30.amp_down().real(), 0.8660254, 1e-7);
  EXPECT_NEAR(t30.amp_up().real(), 0.5, 1e-12);
  const Pure w30 = wrong_state(deg(30));
  EXPECT_NEAR(w30.amp_down().real(), 0.5, 1e-12);
}

TEST(Theta2, Examples) {
  EXPECT_EQ(theta2_of_theta1(0.0), 0.0);
  EXPECT_NEAR(theta2_of_theta1(std::numbers::pi / 2), std::numbers::pi / 2, 1e-7);
  EXPECT_NEAR(theta2_of_theta1(deg(30)), std::asin(0.8), 1e-12);
  EXPECT_NEAR(theta2_of_theta1(deg(30)) * 180 / std::numbers::pi, 53.13, 0.005);
}

TEST(Theta2, HalfAngleIdentityAndMonotonicity) {
  double prev = -1;
  for (int d = 0; d <= 90; ++d) {
    const double t2 = theta2_of_theta1(deg(d));
    if (d < 90) EXPECT_NEAR(std::tan(t2 / 2), std::sin(deg(d)), 1e-12) << d;
    EXPECT_GE(t2, prev);
    prev = t2;
  }
}

TEST(Theta2, SecondMeasurementConvertsMirrorToTarget) {
  for (int d = 1; d < 90; ++d) {
    const double t1 = deg(d);
    const auto r = measure_partial(State::from_pure(wrong_state(t1)), theta2_of_theta1(t1), Outcome::zero);
    EXPECT_NEAR(fidelity(r.post, target_state(t1)), 1.0, 1e-10) << d;
  }
}

TEST(FirstMeasurement, EachOutcomeHalf) {
  for (int d = 0; d <= 90; ++d) {
    const auto pm = kraus_pair(deg(d));
    const State x = State::from_pure(Pure::plus_x());
    EXPECT_NEAR(apply_operator(x, pm.m0).probability, 0.5, 1e-12);
    EXPECT_NEAR(apply_operator(x, pm.m1).probability, 0.5, 1e-12);
  }
}

TEST(SuccessProbabilityExact, MatchesBruteForceEnumeration) {
  for (int d = 1; d <= 90; ++d) {
    const auto ex = success_probability_exact(deg(d));
    const auto o = oracle::enumerate_protocol(deg(d));
    EXPECT_NEAR(ex.p_herald, o.p_herald, 1e-12) << d;
    EXPECT_NEAR(ex.fidelity_given_herald, o.heralded_fidelity_sum / o.p_herald, 1e-10) << d;
    double total = 0;
    for (const auto& b : ex.branches) total += b.probability;
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(SuccessProbabilityExact, Examples) {
  const auto e90 = success_probability_exact(std::numbers::pi / 2);
  EXPECT_NEAR(e90.p_herald, 0.5, 1e-12);
  EXPECT_NEAR(e90.printed_formula, 0.5, 1e-12);
  EXPECT_NEAR(e90.second_branch_success, 0.0, 1e-12);

  const auto e30 = success_probability_exact(deg(30));
  EXPECT_NEAR(e30.p_herald, 0.65, 1e-12);
  EXPECT_NEAR(e30.second_branch_success, 0.30, 1e-12);
  EXPECT_NEAR(e30.fidelity_given_herald, 1.0, 1e-10);
  // Closed form: 1/2 + (1 - sin^2)/(4 (1 + sin^2)).
  const double s2 = 0.25;
  EXPECT_NEAR(e30.p_herald, 0.5 + 0.25 * (1 - s2) / (1 + s2), 1e-12);
  EXPECT_NEAR(e30.printed_formula, 0.5 * (1 + std::cos(deg(30))), 1e-12);
  EXPECT_EQ(e30.branches.size(), 3u);
}

TEST(PostselectionBound, Examples) {
  EXPECT_NEAR(postselection_bound(SingleMeasurementStats{0.5, 0.9, 0.2}, 0.5), 0.9, 1e-15);
  EXPECT_NEAR(postselection_bound(deg(30), 0.65), (0.5 + 0.15 * 0.75) / 0.65, 1e-12);
  EXPECT_NEAR(postselection_bound(deg(30), 0.65), 0.9423, 1e-4);
  // Projective first measurement: the padding outcomes have zero overlap.
  EXPECT_NEAR(postselection_bound(std::numbers::pi / 2, 1.0), 0.5, 1e-12);
  EXPECT_THROW(postselection_bound(deg(30), 0.4), InvalidArgument);
}

TEST(RunProtocol, IdealBranches) {
  ProtocolConfig cfg;
  cfg.theta1 = deg(30);
  Rng rng = SeedPath(1).engine();
  bool saw_direct = false, saw_corrected = false;
  for (int i = 0; i < 200; ++i) {
    const auto r = run_protocol(cfg, rng);
    EXPECT_EQ(r.outcome2.has_value(), r.outcome1 == Outcome::one);
    if (r.heralded_success) EXPECT_NEAR(r.fidelity_to_target, 1.0, 1e-10);
    saw_direct |= r.outcome1 == Outcome::zero;
    saw_corrected |= r.outcome1 == Outcome::one && r.heralded_success;
    EXPECT_EQ(r.elapsed_readout_time, 0.0);
  }
  EXPECT_TRUE(saw_direct);
  EXPECT_TRUE(saw_corrected);
}

TEST(RunProtocol, ProjectiveFirstMeasurementCannotBeCorrected) {
  ProtocolConfig cfg;
  cfg.theta1 = std::numbers::pi / 2;
  Rng rng = SeedPath(2).engine();
  for (int i = 0; i < 500; ++i) {
    const auto r = run_protocol(cfg, rng);
    if (r.outcome1 == Outcome::one) EXPECT_FALSE(r.heralded_success);
  }
}

TEST(RunProtocol, HeraldFrequencyMatchesOracle) {
  for (int d : {10, 30, 60, 90}) {
    ProtocolConfig cfg;
    cfg.theta1 = deg(d);
    cfg.trials = 100000;
    const auto s = run_trials(cfg, SeedPath(3).child(d), true);
    const double p = success_probability_exact(cfg.theta1).p_herald;
    EXPECT_NEAR(s.herald_probability.value, p, 5 * binomial_se(p, cfg.trials)) << d;
    EXPECT_EQ(s.trials, cfg.trials);
  }
}

TEST(RunProtocol, ResetUntilSuccessRaisesHeraldRate) {
  ProtocolConfig cfg;
  cfg.theta1 = deg(30);
  cfg.trials = 20000;
  cfg.reset_until_success = true;
  cfg.max_rounds = 8;
  const auto s = run_trials(cfg, SeedPath(4), true);
  // Failure needs all 8 rounds to fail: 0.35^8 ~ 2e-4.
  EXPECT_GT(s.herald_probability.value, 0.995);
  EXPECT_NEAR(s.heralded_fidelity.value, 1.0, 1e-10);
}

TEST(RunProtocol, NoisyProtocolAccountsEveryTrial) {
  ProtocolConfig cfg;
  cfg.theta1 = deg(30);
  cfg.noise = NoiseModel{};
  cfg.trials = 5000;
  cfg.readout_time_budget = 30e-6;
  const auto s = run_trials(cfg, SeedPath(5), true);
  EXPECT_EQ(s.trials, 5000u);
  EXPECT_GT(s.heralded, 0u);
  EXPECT_LT(s.heralded_fidelity.value, 1.0);
  EXPECT_GT(s.mean_readout_time, 0.0);
  EXPECT_LE(s.mean_readout_time, 2 * 30e-6);
}

TEST(RunProtocol, ValidatesConfig) {
  ProtocolConfig cfg;
  Rng rng = SeedPath(1).engine();
  cfg.theta1 = 0.0;
  EXPECT_THROW(run_protocol(cfg, rng), InvalidArgument);
  cfg.theta1 = deg(30);
  cfg.trials = 0;
  EXPECT_THROW(run_protocol(cfg, rng), InvalidArgument);
}

TEST(Sweep, IdealLongBudgetMatchesOracle) {
  ProtocolConfig cfg;
  cfg.theta1 = deg(30);
  cfg.trials = 50000;
  cfg.noise = NoiseModel{};
  cfg.noise->readout = ReadoutModel::ideal();
  cfg.noise->electron_init_fidelity = 1.0;
  cfg.noise->nuclear_init_fidelity = 1.0;
  const std::vector<double> budgets{100e-6};
  const auto curve = sweep_vs_readout_time(cfg, budgets);
  ASSERT_EQ(curve.points.size(), 1u);
  const auto& p = curve.points[0];
  EXPECT_NEAR(p.herald_probability.value, 0.65, 5 * p.herald_probability.std_error);
  // Dark readouts wait out the whole 100 us window; T2* = 7.8 ms costs ~1e-5.
  EXPECT_NEAR(p.heralded_fidelity.value, 1.0, 1e-4);
  EXPECT_LT(p.heralded_fidelity.value, 1.0);
  EXPECT_NEAR(p.single_success_probability.value, 0.5, 5 * p.single_success_probability.std_error);
}

TEST(Sweep, DeterministicAcrossThreadCounts) {
  ProtocolConfig cfg;
  cfg.theta1 = deg(30);
  cfg.trials = 20000;
  cfg.noise = NoiseModel{};
  const std::vector<double> budgets{10e-6, 40e-6};
  const auto a = sweep_vs_readout_time(cfg, budgets, 1);
  const auto b = sweep_vs_readout_time(cfg, budgets, 4);
  for (std::size_t i = 0; i < budgets.size(); ++i) {
    EXPECT_EQ(a.points[i].herald_probability.value, b.points[i].herald_probability.value);
    EXPECT_EQ(a.points[i].heralded_fidelity.value, b.points[i].heralded_fidelity.value);
    EXPECT_EQ(a.points[i].postselection_bound.value, b.points[i].postselection_bound.value);
  }
}
