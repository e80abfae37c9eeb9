#include "weakmeas/feedback.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "weakmeas/errors.hpp"

namespace weakmeas {

namespace {

constexpr double kQuarterPi = std::numbers::pi / 4.0;

void check_theta1(double theta1) {
  if (!(theta1 >= 0.0 && theta1 <= std::numbers::pi / 2.0 + kStrengthSlack)) {
    throw InvalidArgument("theta1 outside [0, pi/2]");
  }
}

State prepare_plus_x(const ProtocolConfig& cfg) {
  const double f = cfg.noise ? cfg.noise->nuclear_init_fidelity : 1.0;
  // Initialization error leaves weight 1 - f on |-x>.
  return density_from_bloch(BlochVector<double>{2.0 * f - 1.0, 0.0, 0.0});
}

struct Step {
  Outcome reported;
  State state;
  double elapsed;
};

Step measure_step(const State& rho, double theta, const ProtocolConfig& cfg, Rng& rng) {
  const MeasurementResult<double> r = measure_partial(rho, theta, rng);
  if (!cfg.noise) return {r.outcome, r.post, 0.0};

  const NoiseModel& nm = *cfg.noise;
  // An ancilla initialized in the wrong state inverts the outcome labelling.
  std::bernoulli_distribution init_error(1.0 - nm.electron_init_fidelity);
  const bool swapped = init_error(rng);
  const int ancilla = index(r.outcome) ^ static_cast<int>(swapped);
  const ReadoutModel ro = nm.readout.with_budget(cfg.readout_time_budget);
  const ReadoutRecord rec = simulate_readout(ancilla, ro, ReadoutMode::dynamical_stop, rng);
  const double elapsed = rec.stop_bin * ro.bin_duration;
  const double t2 = elapsed / nm.nuclear_t2star;
  const double coherence = rec.nuclear_coherence_factor * std::exp(-t2 * t2);
  return {rec.outcome, r.post.dephased(coherence), elapsed};
}

State reset_to_plus_x(const State& rho, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Pure plus = Pure::plus_x();
  double p_plus = fidelity(rho, plus);
  for (int attempt = 0; attempt < 256; ++attempt) {
    if (u(rng) < p_plus) return State::from_pure(plus);
    // Landed in |-x>; a z projection re-randomizes the x outcome.
    u(rng);
    p_plus = 0.5;
  }
  return State::from_pure(Pure::minus_x());
}

ProtocolResult run_round(const State& start, const ProtocolConfig& cfg, Rng& rng, bool adaptive) {
  const Pure target = target_state(cfg.theta1);
  const Step first = measure_step(start, cfg.theta1, cfg, rng);
  if (first.reported == Outcome::zero || !adaptive) {
    return {first.reported, std::nullopt, first.reported == Outcome::zero, first.state,
            fidelity(first.state, target), first.elapsed, 1};
  }
  const Step second = measure_step(first.state, theta2_of_theta1(cfg.theta1), cfg, rng);
  return {first.reported,
          second.reported,
          second.reported == Outcome::zero,
          second.state,
          fidelity(second.state, target),
          first.elapsed + second.elapsed,
          1};
}

}  // namespace

Pure target_state(double theta1) {
  check_theta1(theta1);
  return Pure(std::cos(kQuarterPi - theta1 / 2.0), std::cos(kQuarterPi + theta1 / 2.0));
}

Pure wrong_state(double theta1) {
  check_theta1(theta1);
  return Pure(std::cos(kQuarterPi + theta1 / 2.0), std::cos(kQuarterPi - theta1 / 2.0));
}

double theta2_of_theta1(double theta1) {
  check_theta1(theta1);
  const double s = std::sin(theta1);
  return std::asin(std::min(1.0, 2.0 * s / (1.0 + s * s)));
}

void NoiseModel::validate() const {
  readout.validate();
  if (!(electron_init_fidelity >= 0.0 && electron_init_fidelity <= 1.0) ||
      !(nuclear_init_fidelity >= 0.5 && nuclear_init_fidelity <= 1.0)) {
    throw InvalidArgument("NoiseModel: initialization fidelities out of range");
  }
  if (!(nuclear_t2star > 0.0)) throw InvalidArgument("NoiseModel: nuclear_t2star must be positive");
}

void ProtocolConfig::validate() const {
  if (!(theta1 > 0.0 && theta1 <= std::numbers::pi / 2.0 + kStrengthSlack)) {
    throw InvalidArgument("ProtocolConfig: theta1 must lie in (0, pi/2]");
  }
  if (!(readout_time_budget >= 0.0)) throw InvalidArgument("ProtocolConfig: negative readout budget");
  if (trials == 0) throw InvalidArgument("ProtocolConfig: trials must be positive");
  if (max_rounds < 1) throw InvalidArgument("ProtocolConfig: max_rounds must be at least 1");
  if (noise) noise->validate();
}

ProtocolResult run_protocol(const ProtocolConfig& cfg, Rng& rng) {
  cfg.validate();
  State rho = prepare_plus_x(cfg);
  double elapsed = 0.0;
  const int rounds = cfg.reset_until_success ? cfg.max_rounds : 1;
  for (int round = 1;; ++round) {
    ProtocolResult r = run_round(rho, cfg, rng, true);
    elapsed += r.elapsed_readout_time;
    r.elapsed_readout_time = elapsed;
    r.rounds = round;
    if (r.heralded_success || round >= rounds) return r;
    rho = reset_to_plus_x(r.final_state, rng);
  }
}

ProtocolResult run_single_measurement(const ProtocolConfig& cfg, Rng& rng) {
  cfg.validate();
  return run_round(prepare_plus_x(cfg), cfg, rng, false);
}

ExactSuccess success_probability_exact(double theta1) {
  check_theta1(theta1);
  const Pure target = target_state(theta1);
  const State start = State::from_pure(Pure::plus_x());
  const auto first = kraus_pair(theta1);
  const double theta2 = theta2_of_theta1(theta1);
  const auto second = kraus_pair(theta2);
  constexpr double kNull = 1e-24;

  ExactSuccess out{};
  auto add = [&](Outcome o1, std::optional<Outcome> o2, const Branch<double>& b, bool heralded) {
    const double f = b.probability > kNull ? fidelity(b.state.normalized(), target) : 0.0;
    out.branches.push_back({o1, o2, b.probability, heralded, f});
  };
  const Branch<double> b0 = apply_operator(start, first.m0);
  add(Outcome::zero, std::nullopt, b0, true);
  const Branch<double> b1 = apply_operator(start, first.m1);
  const Branch<double> b10 = apply_operator(b1.state, second.m0);
  const Branch<double> b11 = apply_operator(b1.state, second.m1);
  add(Outcome::one, Outcome::zero, b10, true);
  add(Outcome::one, Outcome::one, b11, false);

  double p = 0.0, pf = 0.0;
  for (const auto& br : out.branches) {
    if (!br.heralded) continue;
    p += br.probability;
    pf += br.probability * br.fidelity;
  }
  out.p_herald = p;
  out.fidelity_given_herald = p > 0.0 ? pf / p : 0.0;
  out.second_branch_success = b1.probability > kNull ? b10.probability / b1.probability : 0.0;
  out.printed_formula = 0.5 * (1.0 + std::cos(theta1));
  return out;
}

double postselection_bound(const SingleMeasurementStats& s, double p_adapt) {
  if (!(p_adapt > 0.0 && p_adapt <= 1.0)) throw InvalidArgument("postselection_bound: p_adapt outside (0, 1]");
  if (p_adapt < s.p_success - 1e-12) {
    throw InvalidArgument("postselection_bound: p_adapt below the single-measurement success probability");
  }
  return (s.p_success * s.fidelity_success + (p_adapt - s.p_success) * s.fidelity_failure) / p_adapt;
}

double postselection_bound(double theta1, double p_adapt) {
  check_theta1(theta1);
  const double c = std::cos(theta1);
  return postselection_bound(SingleMeasurementStats{0.5, 1.0, c * c}, p_adapt);
}

ProtocolStats run_trials(const ProtocolConfig& cfg, const SeedPath& seeds, bool adaptive, unsigned threads) {
  cfg.validate();
  struct Block {
    Tally herald, success_fid, failure_fid, time;
  };
  std::vector<Block> blocks(block_count(cfg.trials));
  for_each_block(cfg.trials, threads, [&](std::size_t b, std::size_t begin, std::size_t end) {
    Rng rng = seeds.child(b).engine();
    Block acc;
    for (std::size_t i = begin; i < end; ++i) {
      const ProtocolResult r = adaptive ? run_protocol(cfg, rng) : run_single_measurement(cfg, rng);
      acc.herald.add(r.heralded_success ? 1.0 : 0.0);
      (r.heralded_success ? acc.success_fid : acc.failure_fid).add(r.fidelity_to_target);
      acc.time.add(r.elapsed_readout_time);
    }
    blocks[b] = acc;
  });
  Block total;
  for (const auto& b : blocks) {
    total.herald.merge(b.herald);
    total.success_fid.merge(b.success_fid);
    total.failure_fid.merge(b.failure_fid);
    total.time.merge(b.time);
  }
  ProtocolStats s;
  s.herald_probability = {total.herald.mean(), binomial_se(total.herald.mean(), cfg.trials)};
  s.heralded_fidelity = {total.success_fid.mean(), total.success_fid.std_error()};
  s.failure_fidelity = {total.failure_fid.mean(), total.failure_fid.std_error()};
  s.mean_readout_time = total.time.mean();
  s.heralded = total.success_fid.n;
  s.trials = cfg.trials;
  return s;
}

SweepCurve sweep_vs_readout_time(const ProtocolConfig& cfg, std::span<const double> budgets, unsigned threads) {
  cfg.validate();
  SweepCurve curve;
  const SeedPath root(cfg.seed);
  for (std::size_t g = 0; g < budgets.size(); ++g) {
    ProtocolConfig point = cfg;
    point.readout_time_budget = budgets[g];
    const ProtocolStats adaptive = run_trials(point, root.child({g, 0}), true, threads);
    const ProtocolStats single = run_trials(point, root.child({g, 1}), false, threads);

    SweepPoint sp;
    sp.budget = budgets[g];
    sp.herald_probability = adaptive.herald_probability;
    sp.heralded_fidelity = adaptive.heralded_fidelity;
    sp.single_success_probability = single.herald_probability;
    sp.single_fidelity_success = single.heralded_fidelity;
    sp.single_fidelity_failure = single.failure_fidelity;
    sp.mean_readout_time = adaptive.mean_readout_time;

    const double pa = adaptive.herald_probability.value;
    const double ps = single.herald_probability.value;
    const double fs = single.heralded_fidelity.value;
    const double ff = single.failure_fidelity.value;
    // A noisy adaptive run can fall below the single-measurement rate; then
    // no padding is possible and the bound is the single-measurement fidelity.
    const double p_eff = std::max(pa, ps);
    const double bound = postselection_bound(SingleMeasurementStats{ps, fs, ff}, p_eff);
    // Delta-method error from the four independent estimates.
    const double d_fs = ps / p_eff, d_ff = (p_eff - ps) / p_eff;
    const double d_ps = (fs - ff) / p_eff, d_pa = pa >= ps ? (ff - bound) / p_eff : 0.0;
    const double var = std::pow(d_fs * single.heralded_fidelity.std_error, 2) +
                       std::pow(d_ff * single.failure_fidelity.std_error, 2) +
                       std::pow(d_ps * single.herald_probability.std_error, 2) +
                       std::pow(d_pa * adaptive.herald_probability.std_error, 2);
    sp.postselection_bound = {bound, std::sqrt(var)};
    curve.points.push_back(sp);
  }
  return curve;
}

}  // namespace weakmeas
