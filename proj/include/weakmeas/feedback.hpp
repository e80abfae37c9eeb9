#pragma once

// Two-step adaptive steering by partial measurements only.
//
// Starting from |x>, a partial measurement of strength theta1 yields the
// target cos(pi/4 - theta1/2)|down> + cos(pi/4 + theta1/2)|up> (outcome zero)
// or its mirror (outcome one), each with probability 1/2. On the mirror
// branch a second measurement with tan(theta2/2) = sin(theta1) converts the
// state back to the target when it yields outcome zero.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "weakmeas/partial_measurement.hpp"
#include "weakmeas/qmath.hpp"
#include "weakmeas/random.hpp"
#include "weakmeas/readout.hpp"

namespace weakmeas {

using State = DensityMatrix<double>;
using Pure = PureState<double>;

Pure target_state(double theta1);
Pure wrong_state(double theta1);

/// theta2 = asin(2 sin(theta1) / (1 + sin^2(theta1))).
double theta2_of_theta1(double theta1);

/// Device imperfections applied by the noisy protocol.
struct NoiseModel {
  ReadoutModel readout = ReadoutModel::calibrated();
  double electron_init_fidelity = 0.983;
  double nuclear_init_fidelity = 0.95;
  double nuclear_t2star = 7.8e-3;  // s

  void validate() const;
};

struct ProtocolConfig {
  double theta1 = 0.0;
  double readout_time_budget = 100e-6;  // s, per ancilla readout
  std::optional<NoiseModel> noise;
  std::size_t trials = 100000;
  std::uint64_t seed = 1;
  /// Repeat-until-success: after a failed round, reset the system to |x> by
  /// projective measurements (x, then z and x again until +x) and rerun.
  bool reset_until_success = false;
  int max_rounds = 8;

  void validate() const;
};

struct ProtocolResult {
  Outcome outcome1;
  std::optional<Outcome> outcome2;  // absent when outcome1 heralded the target
  bool heralded_success;
  State final_state;
  double fidelity_to_target;
  double elapsed_readout_time;  // s
  int rounds;
};

ProtocolResult run_protocol(const ProtocolConfig& config, Rng& rng);

/// Single measurement with strength theta1 and no correction; success is
/// outcome zero. Used for the post-selection comparison.
ProtocolResult run_single_measurement(const ProtocolConfig& config, Rng& rng);

struct BranchEntry {
  Outcome outcome1;
  std::optional<Outcome> outcome2;
  double probability;
  bool heralded;
  double fidelity;
};

struct ExactSuccess {
  double p_herald;
  double fidelity_given_herald;
  double second_branch_success;  // P(outcome zero | mirror state, theta2)
  double printed_formula;        // (1 + cos theta1) / 2, reported for comparison
  std::vector<BranchEntry> branches;
};

/// Exact enumeration of the ideal protocol's branches.
ExactSuccess success_probability_exact(double theta1);

struct SingleMeasurementStats {
  double p_success;
  double fidelity_success;
  double fidelity_failure;
};

/// Fidelity reached by a single measurement whose success rate is padded to
/// p_adapt with failed outcomes.
double postselection_bound(const SingleMeasurementStats& single, double p_adapt);

/// Ideal single measurement: p = 1/2, F_success = 1, F_failure = cos^2 theta1.
double postselection_bound(double theta1, double p_adapt);

struct SweepPoint {
  double budget;  // s
  Estimate herald_probability;
  Estimate heralded_fidelity;
  Estimate single_success_probability;
  Estimate single_fidelity_success;
  Estimate single_fidelity_failure;
  Estimate postselection_bound;
  double mean_readout_time;  // s, adaptive protocol
};

struct SweepCurve {
  std::vector<SweepPoint> points;
};

struct ProtocolStats {
  Estimate herald_probability;
  Estimate heralded_fidelity;
  Estimate failure_fidelity;
  double mean_readout_time;
  std::size_t heralded;
  std::size_t trials;
};

/// Monte Carlo over `config.trials` runs; streams derive from `seeds`.
ProtocolStats run_trials(const ProtocolConfig& config, const SeedPath& seeds, bool adaptive, unsigned threads = 1);

SweepCurve sweep_vs_readout_time(const ProtocolConfig& config, std::span<const double> budgets,
                                 unsigned threads = 1);

}  // namespace weakmeas
