#include "weakmeas/qmath.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "weakmeas/partial_measurement.hpp"

using namespace weakmeas;
using Rho = DensityMatrix<double>;
using Psi = PureState<double>;
using Bloch = BlochVector<double>;

namespace {

void expect_bloch(const Bloch& b, double x, double y, double z, double tol = 1e-12) {
  EXPECT_NEAR(b.x, x, tol);
  EXPECT_NEAR(b.y, y, tol);
  EXPECT_NEAR(b.z, z, tol);
}

}  // namespace

TEST(PureState, NormalizesAmplitudes) {
  const Psi psi(3.0, std::complex<double>(0, 4.0));
  EXPECT_NEAR(std::norm(psi.amp_down()) + std::norm(psi.amp_up()), 1.0, 1e-12);
  EXPECT_THROW(Psi(0.0, 0.0), InvalidArgument);
}

TEST(BlochFromDensity, ConventionFixedPoints) {
  expect_bloch(bloch_from_density(Rho::from_pure(Psi::down())), 0, 0, 1);
  expect_bloch(bloch_from_density(Rho::from_pure(Psi::up())), 0, 0, -1);
  expect_bloch(bloch_from_density(Rho::maximally_mixed()), 0, 0, 0);
  expect_bloch(bloch_from_density(Rho::from_pure(Psi::plus_x())), 1, 0, 0);
  expect_bloch(bloch_from_density(Rho::from_pure(Psi::plus_y())), 0, 1, 0);
}

TEST(BlochFromDensity, RejectsSubnormalized) {
  const auto half = apply_operator(Rho::from_pure(Psi::plus_x()), Operator<double>(Eigen::Vector2cd(1, 0).asDiagonal()));
  EXPECT_FALSE(half.state.is_normalized());
  EXPECT_THROW(bloch_from_density(half.state), InvalidArgument);
}

TEST(DensityFromBloch, Examples) {
  EXPECT_TRUE(density_from_bloch(Bloch{0, 0, 0}).matrix().isApprox(Rho::maximally_mixed().matrix(), 1e-12));
  EXPECT_TRUE(density_from_bloch(Bloch{0, 1, 0}).matrix().isApprox(Psi::plus_y().projector(), 1e-12));
  const Rho pure = density_from_bloch(Bloch{0.6, 0, 0.8});
  EXPECT_NEAR(pure.purity(), 1.0, 1e-12);
  EXPECT_THROW(density_from_bloch(Bloch{0.8, 0.8, 0}), InvalidArgument);
}

TEST(DensityFromBloch, RoundTripRandomVectors) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 1000; ++i) {
    double x = g(rng), y = g(rng), z = g(rng);
    const double r = std::cbrt(u(rng)) / std::sqrt(x * x + y * y + z * z);
    const Bloch b{x * r, y * r, z * r};
    expect_bloch(bloch_from_density(density_from_bloch(b)), b.x, b.y, b.z);
  }
}

TEST(Fidelity, Examples) {
  const Psi x = Psi::plus_x();
  EXPECT_NEAR(fidelity(Rho::from_pure(x), x), 1.0, 1e-12);
  EXPECT_NEAR(fidelity(Rho::maximally_mixed(), Psi(0.3, 0.7)), 0.5, 1e-12);
  // |down> stays |down> under dephasing, so its x-overlap is 1/2.
  const double c30 = std::cos(oracle::deg(30));
  EXPECT_NEAR(fidelity(Rho::from_pure(Psi::down()).dephased(c30), x), 0.5, 1e-12);
  const Rho dephased_x = backaction_unconditional(Rho::from_pure(x), oracle::deg(30));
  EXPECT_NEAR(fidelity(dephased_x, x), (1 + c30) / 2, 1e-12);
  EXPECT_NEAR(fidelity(dephased_x, x), 0.9330127, 1e-7);
}

TEST(Fidelity, SubnormalizedNeedsRawMode) {
  const auto b = apply_operator(Rho::from_pure(Psi::plus_x()), Operator<double>(Eigen::Vector2cd(1, 0).asDiagonal()));
  EXPECT_THROW(fidelity(b.state, Psi::down()), InvalidArgument);
  EXPECT_NEAR(fidelity(b.state, Psi::down(), OverlapMode::raw), 0.5, 1e-12);
}

TEST(ApplyOperator, Examples) {
  const Rho x = Rho::from_pure(Psi::plus_x());
  const auto id = apply_operator(x, Operator<double>(Operator<double>::Identity()));
  EXPECT_NEAR(id.probability, 1.0, 1e-12);
  EXPECT_TRUE(id.state.matrix().isApprox(x.matrix(), 1e-12));

  Operator<double> proj = Operator<double>::Zero();
  proj(0, 0) = 1;
  const auto p = apply_operator(x, proj);
  EXPECT_NEAR(p.probability, 0.5, 1e-12);
  EXPECT_TRUE(p.state.matrix().isApprox(0.5 * Psi::down().projector(), 1e-12));

  Operator<double> k = Operator<double>::Zero();
  k(0, 0) = std::cos(oracle::deg(30));
  k(1, 1) = std::cos(oracle::deg(60));
  const double c30 = std::cos(oracle::deg(30)), c60 = std::cos(oracle::deg(60));
  EXPECT_NEAR(apply_operator(x, k).probability, (c30 * c30 + c60 * c60) / 2, 1e-12);
  EXPECT_NEAR(apply_operator(x, k).probability, 0.5, 1e-12);
}

TEST(ApplyOperator, RejectsExpansiveOperator) {
  EXPECT_THROW(apply_operator(Rho::maximally_mixed(), Operator<double>(2.0 * Operator<double>::Identity())),
               InvalidArgument);
}

TEST(ApplyOperator, CompleteSetProbabilitiesSumToOne) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 200; ++i) {
    Bloch b{u(rng), u(rng), u(rng)};
    if (b.norm() > 1) continue;
    const Rho rho = density_from_bloch(b);
    const double theta = std::abs(u(rng)) * std::numbers::pi / 2;
    const auto pm = kraus_pair(theta);
    EXPECT_NEAR(apply_operator(rho, pm.m0).probability + apply_operator(rho, pm.m1).probability, 1.0, 1e-12);
  }
}

TEST(DensityMatrix, ValidatesInput) {
  Operator<double> bad = Operator<double>::Identity();
  EXPECT_THROW(Rho::from_matrix(bad), InvalidArgument);  // trace 2
  bad << 0.5, 0.6, 0.6, 0.5;
  EXPECT_THROW(Rho::from_matrix(bad), InvalidArgument);  // negative eigenvalue
  bad << 0.5, 0.1, 0.2, 0.5;
  EXPECT_THROW(Rho::from_matrix(bad), InvalidArgument);  // not Hermitian
}

TEST(DensityMatrix, WorksAtExtendedPrecision) {
  using R = DensityMatrix<long double>;
  const auto b = bloch_from_density(R::from_pure(PureState<long double>::plus_x()));
  EXPECT_NEAR(static_cast<double>(b.x), 1.0, 1e-15);
}
