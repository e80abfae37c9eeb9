#pragma once

// Ancilla-mediated partial measurement of sigma_z with tunable strength.
//
// A controlled-phase interaction of duration tau rotates the ancilla by
// +-theta with theta = A tau / 2; a basis rotation and projective ancilla
// readout then realize the diagonal Kraus pair
//
//   M0 = diag(cos(pi/4 - theta/2), cos(pi/4 + theta/2))
//   M1 = diag(cos(pi/4 + theta/2), cos(pi/4 - theta/2))
//
// Outcome zero kicks the system toward |down> (the +1 eigenstate here). Lab
// descriptions that call the same kick "toward |up>" use the opposite spin
// labelling; only the label differs.

#include <cmath>
#include <numbers>
#include <random>

#include "weakmeas/errors.hpp"
#include "weakmeas/qmath.hpp"
#include "weakmeas/random.hpp"

namespace weakmeas {

/// Hyperfine coupling A = 2 pi x 2.184 MHz, in rad/s.
inline constexpr double kHyperfineCoupling = 2.0 * std::numbers::pi * 2.184e6;

/// Interaction times may overshoot pi/2 by this much (about 0.06 deg) before
/// `strength_from_tau` rejects them; 229 ns at the nominal coupling is 90.02 deg.
inline constexpr double kStrengthSlack = 1e-3;

struct HyperfineParams {
  double coupling = kHyperfineCoupling;  // rad/s
  double tau = 0.0;                      // s
};

enum class StrengthPolicy { reject, clamp };

/// theta = A tau / 2.
inline double strength_from_tau(const HyperfineParams& p, StrengthPolicy policy = StrengthPolicy::reject) {
  if (!(p.coupling > 0.0)) throw InvalidArgument("strength_from_tau: coupling must be positive");
  if (!(p.tau >= 0.0)) throw InvalidArgument("strength_from_tau: tau must be non-negative");
  const double theta = p.coupling * p.tau / 2.0;
  constexpr double half_pi = std::numbers::pi / 2.0;
  if (theta > half_pi) {
    if (policy == StrengthPolicy::clamp) return half_pi;
    if (theta > half_pi + kStrengthSlack) {
      throw InvalidArgument("strength_from_tau: theta beyond projective (pi/2)");
    }
  }
  return theta;
}

inline double tau_from_strength(double theta, double coupling = kHyperfineCoupling) {
  return 2.0 * theta / coupling;
}

template <typename Scalar>
void check_strength(Scalar theta, const char* who) {
  if (!(theta >= Scalar(0) && theta <= std::numbers::pi_v<Scalar> / 2 + Scalar(kStrengthSlack))) {
    throw InvalidArgument(std::string(who) + ": theta outside [0, pi/2]");
  }
}

template <typename Scalar>
struct PartialMeasurement {
  Scalar theta;
  Operator<Scalar> m0;
  Operator<Scalar> m1;

  const Operator<Scalar>& kraus(Outcome k) const { return k == Outcome::zero ? m0 : m1; }

  /// P(outcome | |down>) and P(outcome | |up>).
  Scalar likelihood(Outcome k, bool spin_up) const {
    const auto& m = kraus(k);
    return std::norm(spin_up ? m(1, 1) : m(0, 0));
  }
};

template <typename Scalar>
PartialMeasurement<Scalar> kraus_pair(Scalar theta) {
  check_strength(theta, "kraus_pair");
  const Scalar quarter = std::numbers::pi_v<Scalar> / 4;
  const Scalar strong = std::cos(quarter - theta / 2);
  const Scalar weak = std::cos(quarter + theta / 2);
  PartialMeasurement<Scalar> pm{theta, Operator<Scalar>::Zero(), Operator<Scalar>::Zero()};
  pm.m0(0, 0) = strong;
  pm.m0(1, 1) = weak;
  pm.m1(0, 0) = weak;
  pm.m1(1, 1) = strong;
  return pm;
}

template <typename Scalar>
struct MeasurementResult {
  Outcome outcome;
  DensityMatrix<Scalar> post;  // normalized
  Scalar probability;
};

namespace detail {

template <typename Scalar>
MeasurementResult<Scalar> finish_branch(const DensityMatrix<Scalar>& state, const PartialMeasurement<Scalar>& pm,
                                        Outcome k) {
  const Branch<Scalar> b = apply_operator(state, pm.kraus(k));
  if (!(b.probability > Tolerance<Scalar>::exact * Tolerance<Scalar>::exact)) {
    throw DegenerateBranch("measure_partial: outcome has zero probability");
  }
  return {k, b.state.normalized(), b.probability};
}

}  // namespace detail

/// Forced-outcome branch.
template <typename Scalar>
MeasurementResult<Scalar> measure_partial(const DensityMatrix<Scalar>& state, Scalar theta, Outcome forced) {
  if (!state.is_normalized()) throw InvalidArgument("measure_partial: state is not normalized");
  return detail::finish_branch(state, kraus_pair(theta), forced);
}

/// Samples the outcome with its exact Born probability.
template <typename Scalar>
MeasurementResult<Scalar> measure_partial(const DensityMatrix<Scalar>& state, Scalar theta, Rng& rng) {
  if (!state.is_normalized()) throw InvalidArgument("measure_partial: state is not normalized");
  const auto pm = kraus_pair(theta);
  const Scalar p0 = apply_operator(state, pm.m0).probability;
  std::bernoulli_distribution zero(static_cast<double>(p0));
  return detail::finish_branch(state, pm, zero(rng) ? Outcome::zero : Outcome::one);
}

/// Outcome-averaged map: pure dephasing, (x, y, z) -> (x cos theta, y cos theta, z).
template <typename Scalar>
DensityMatrix<Scalar> backaction_unconditional(const DensityMatrix<Scalar>& state, Scalar theta) {
  if (!state.is_normalized()) throw InvalidArgument("backaction_unconditional: state is not normalized");
  const auto pm = kraus_pair(theta);
  const Operator<Scalar> m = pm.m0 * state.matrix() * pm.m0.adjoint() + pm.m1 * state.matrix() * pm.m1.adjoint();
  return DensityMatrix<Scalar>::from_matrix(m);
}

// ---------------------------------------------------------------------------
// Weak values

/// W = <f| sigma_z |i> / <f|i>.
template <typename Scalar>
Complex<Scalar> weak_value(const PureState<Scalar>& psi_i, const PureState<Scalar>& psi_f) {
  const Complex<Scalar> overlap = psi_f.ket().dot(psi_i.ket());
  if (std::abs(overlap) <= Tolerance<Scalar>::exact) {
    throw SingularWeakValue("weak_value: pre- and post-selected states are orthogonal");
  }
  const Complex<Scalar> num = psi_f.ket().dot(pauli_z<Scalar>() * psi_i.ket());
  return num / overlap;
}

/// Strong-measurement eigenstate after a basis rotation by phi. Outcome zero
/// is cos(phi/2)|down> - sin(phi/2)|up>, outcome one is its orthogonal partner.
template <typename Scalar>
PureState<Scalar> postselection_state(Scalar phi, Outcome label = Outcome::zero) {
  const Scalar c = std::cos(phi / 2);
  const Scalar s = std::sin(phi / 2);
  return label == Outcome::zero ? PureState<Scalar>(c, -s) : PureState<Scalar>(s, c);
}

template <typename Scalar>
struct WeakValueSetup {
  PureState<Scalar> psi_i = PureState<Scalar>::plus_x();
  Scalar theta = 0;
  Scalar phi = 0;
  Outcome postselect = Outcome::zero;
};

/// P(k, f) = |<f| M_k |psi_i>|^2 for ancilla outcome k and post-selection f.
template <typename Scalar>
struct JointProbabilities {
  Scalar p0f;
  Scalar p1f;
};

template <typename Scalar>
JointProbabilities<Scalar> joint_probabilities(const WeakValueSetup<Scalar>& s) {
  if (!(s.phi >= Scalar(0) && s.phi <= std::numbers::pi_v<Scalar>)) {
    throw InvalidArgument("WeakValueSetup: phi outside [0, pi]");
  }
  const auto pm = kraus_pair(s.theta);
  const Ket<Scalar> f = postselection_state(s.phi, s.postselect).ket();
  const Scalar p0 = std::norm(f.dot(pm.m0 * s.psi_i.ket()));
  const Scalar p1 = std::norm(f.dot(pm.m1 * s.psi_i.ket()));
  return {p0, p1};
}

/// Digitized-meter weak value: ancilla outcomes mapped to +-1, conditional
/// mean given post-selection, divided by sin theta. Reduces to Re W as
/// theta -> 0.
template <typename Scalar>
Scalar modified_weak_value(const WeakValueSetup<Scalar>& s) {
  const Scalar st = std::sin(s.theta);
  if (!(std::abs(st) > Scalar(0))) throw InvalidArgument("modified_weak_value: undefined at theta = 0");
  const auto jp = joint_probabilities(s);
  const Scalar post = jp.p0f + jp.p1f;
  if (!(post > Tolerance<Scalar>::exact * Tolerance<Scalar>::exact)) {
    throw SingularWeakValue("modified_weak_value: zero post-selection probability");
  }
  return (jp.p0f - jp.p1f) / (st * post);
}

/// Post-selection rotation that nulls P(1, f) for psi_i = |x>.
template <typename Scalar>
Scalar optimal_postselection_angle(Scalar theta) {
  return std::numbers::pi_v<Scalar> / 2 - theta;
}

}  // namespace weakmeas
