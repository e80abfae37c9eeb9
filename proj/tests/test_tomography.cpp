#include "weakmeas/tomography.hpp"

#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "oracles.hpp"
#include "weakmeas/partial_measurement.hpp"

using namespace weakmeas;
using oracle::deg;
using Rho = DensityMatrix<double>;
using Psi = PureState<double>;

TEST(ReadoutCorrection, Examples) {
  EXPECT_NEAR(readout_correction(0.7, {0, 0}).value, 0.7, 1e-15);
  EXPECT_NEAR(readout_correction(0.5, {0.1, 0.1}).value, 0.5, 1e-15);
  const auto c = readout_correction(0.73, {0.147, 0.014});
  EXPECT_NEAR(c.value, (0.73 - 0.014) / (1 - 0.147 - 0.014), 1e-15);
  EXPECT_NEAR(c.value, 0.8534, 1e-4);
  EXPECT_FALSE(c.clamped);
}

TEST(ReadoutCorrection, ClampsAndRejectsSingular) {
  const auto c = readout_correction(0.99, {0.147, 0.014});
  EXPECT_TRUE(c.clamped);
  EXPECT_EQ(c.value, 1.0);
  EXPECT_THROW(readout_correction(0.5, {0.6, 0.4}), InvalidArgument);
}

TEST(StateTomography, ExactProbabilitiesRecoverState) {
  const auto r = tomography_from_probabilities<double>({1.0, 0.5, 0.5}, {});
  EXPECT_NEAR(r.state(0, 1).real(), 0.5, 1e-12);
  const auto b = bloch_from_density(r.state);
  EXPECT_NEAR(b.x, 1.0, 1e-12);
  EXPECT_NEAR(b.y, 0.0, 1e-12);
  EXPECT_NEAR(b.z, 0.0, 1e-12);
  EXPECT_FALSE(r.clipped);
}

TEST(StateTomography, ClipsOutsideBall) {
  const auto r = tomography_from_probabilities<double>({1.0, 1.0, 0.5}, {});
  EXPECT_TRUE(r.clipped);
  EXPECT_NEAR(bloch_from_density(r.state).norm(), 1.0, 1e-9);
  EXPECT_NEAR(r.raw.norm(), std::sqrt(2.0), 1e-12);
}

TEST(StateTomography, IdealSamplingWithinBinomialBound) {
  Rng rng = SeedPath(5).engine();
  const auto r = state_tomography(make_projective_sampler(Rho::from_pure(Psi::plus_x())), 100000, {}, rng);
  // x is deterministic for |x>; y and z are fair coins.
  EXPECT_NEAR(r.raw.x, 1.0, 1e-12);
  EXPECT_NEAR(r.raw.y, 0.0, 5 * 2 * binomial_se(0.5, 100000));
  EXPECT_NEAR(r.raw.z, 0.0, 5 * 2 * binomial_se(0.5, 100000));
}

TEST(StateTomography, ReadoutErrorsCorrectedWithoutBias) {
  const ReadoutConfusion conf{0.147, 0.014};
  const BlochVector<double> truth{0.5, -0.3, 0.6};
  Rng rng = SeedPath(17).engine();
  const auto r = state_tomography(make_projective_sampler(density_from_bloch(truth), conf), 100000, conf, rng);
  EXPECT_NEAR(r.raw.x, truth.x, 5 * r.std_error.x);
  EXPECT_NEAR(r.raw.y, truth.y, 5 * r.std_error.y);
  EXPECT_NEAR(r.raw.z, truth.z, 5 * r.std_error.z);

  // Without correction the estimate is visibly biased.
  Rng rng2 = SeedPath(17).engine();
  const auto biased = state_tomography(make_projective_sampler(density_from_bloch(truth), conf), 100000, {}, rng2);
  EXPECT_GT(std::abs(biased.raw.z - truth.z), 10 * r.std_error.z);
}

TEST(StateTomography, ReproducesPostMeasurementStates) {
  const Rho x = Rho::from_pure(Psi::plus_x());
  std::uint64_t i = 0;
  for (int d : {5, 30, 60, 90}) {
    const auto exact = measure_partial(x, deg(d), Outcome::zero).post;
    Rng rng = SeedPath(23).child(i++).engine();
    const auto r = state_tomography(make_projective_sampler(exact), 20000, {}, rng);
    const auto b = bloch_from_density(exact);
    EXPECT_NEAR(r.raw.x, b.x, 5 * std::max(r.std_error.x, 1e-3)) << d;
    EXPECT_NEAR(r.raw.y, b.y, 5 * std::max(r.std_error.y, 1e-3)) << d;
    EXPECT_NEAR(r.raw.z, b.z, 5 * std::max(r.std_error.z, 1e-3)) << d;
  }
}

TEST(StateTomography, RejectsZeroShots) {
  Rng rng = SeedPath(1).engine();
  EXPECT_THROW(state_tomography(make_projective_sampler(Rho::maximally_mixed()), 0, {}, rng), InvalidArgument);
}

// ---------------------------------------------------------------------------

namespace {

Channel<double> kraus_channel(std::vector<Operator<double>> ks) {
  return [ks](const Rho& rho) {
    Operator<double> out = Operator<double>::Zero();
    for (const auto& k : ks) out += k * rho.matrix() * k.adjoint();
    return Rho::from_matrix(out);
  };
}

}  // namespace

TEST(ProcessTomography, IdentityChannel) {
  const auto chi = reconstruct_process<double>([](const Rho& r) { return r; });
  ChiMatrix<double> expected = ChiMatrix<double>::Zero();
  expected(0, 0) = 1;
  EXPECT_LE((chi.chi() - expected).cwiseAbs().maxCoeff(), 1e-12);
  const std::vector<Operator<double>> id{Operator<double>::Identity()};
  EXPECT_NEAR(process_fidelity(chi_from_kraus<double>(id), chi), 1.0, 1e-12);
}

TEST(ProcessTomography, FullDephasingIsHalfIdentityHalfZ) {
  const auto pm = kraus_pair(std::numbers::pi / 2);
  const auto chi = reconstruct_process(kraus_channel({pm.m0, pm.m1}));
  ChiMatrix<double> expected = ChiMatrix<double>::Zero();
  expected(0, 0) = 0.5;
  expected(3, 3) = 0.5;
  EXPECT_LE((chi.chi() - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ProcessTomography, MatchesAnalyticChiForPauliChannels) {
  // Independent route: each Pauli operator reconstructs to a unit entry.
  const auto basis = pauli_basis<double>();
  for (int m = 0; m < 4; ++m) {
    const auto chi = reconstruct_process(kraus_channel({basis[m]}));
    EXPECT_NEAR(chi.chi()(m, m).real(), 1.0, 1e-12);
    EXPECT_NEAR(chi.trace(), 1.0, 1e-12);
  }
}

TEST(ProcessTomography, ConditionalMapSelfConsistent) {
  const auto pm = kraus_pair(deg(30));
  const std::vector<Operator<double>> kraus{pm.m0};
  const auto res = process_tomography(kraus_channel(kraus), chi_from_kraus<double>(kraus),
                                      ChannelKind::trace_decreasing);
  EXPECT_NEAR(res.fidelity, 1.0, 1e-10);
  EXPECT_NEAR(res.trace, 0.5, 1e-12);
  // The reconstructed chi reproduces the channel on an arbitrary input.
  const Rho in = density_from_bloch(BlochVector<double>{0.2, 0.7, -0.4});
  const Operator<double> direct = pm.m0 * in.matrix() * pm.m0.adjoint();
  EXPECT_LE((res.chi.apply(in.matrix()) - direct).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ProcessTomography, FidelityDetectsWrongProcess) {
  const auto pm = kraus_pair(deg(60));
  const std::vector<Operator<double>> ideal{pm.m0, pm.m1};
  const auto res = process_tomography<double>([](const Rho& r) { return r; }, chi_from_kraus<double>(ideal),
                                              ChannelKind::trace_preserving);
  // Identity vs dephasing with cos(theta) = 1/2: chi_ideal = diag(3/4, 0, 0, 1/4).
  EXPECT_NEAR(res.fidelity, 0.75, 1e-12);
}

TEST(ProcessTomography, NonPhysicalMapReported) {
  // Transpose is positive but not completely positive.
  const Channel<double> transpose = [](const Rho& r) { return Rho::from_matrix(r.matrix().transpose()); };
  try {
    reconstruct_process(transpose);
    FAIL() << "transpose should not reconstruct to a physical process";
  } catch (const ReconstructionFailure& e) {
    EXPECT_GT(e.residual(), 0.1);
  }
}

TEST(ProcessTomography, TracePreservingDeclarationChecked) {
  const auto pm = kraus_pair(deg(30));
  const std::vector<Operator<double>> kraus{pm.m0};
  EXPECT_THROW(process_tomography(kraus_channel(kraus), chi_from_kraus<double>(kraus), ChannelKind::trace_preserving),
               ReconstructionFailure);
}
