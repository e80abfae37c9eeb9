#pragma once

// State tomography by linear inversion with readout correction, and
// single-qubit process tomography in the Pauli basis {I, X, Y, Z}.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <random>
#include <span>

#include "weakmeas/errors.hpp"
#include "weakmeas/qmath.hpp"
#include "weakmeas/random.hpp"

namespace weakmeas {

/// Confusion matrix [[1 - eps0, eps1], [eps0, 1 - eps1]] acting on
/// (p0, p1): eps0 = P(read 1 | true 0), eps1 = P(read 0 | true 1).
struct ReadoutConfusion {
  double eps0 = 0.0;
  double eps1 = 0.0;

  void validate() const {
    if (!(eps0 >= 0.0 && eps0 <= 1.0 && eps1 >= 0.0 && eps1 <= 1.0)) {
      throw InvalidArgument("ReadoutConfusion: error rates outside [0, 1]");
    }
    if (eps0 + eps1 >= 1.0) throw InvalidArgument("ReadoutConfusion: eps0 + eps1 >= 1 is not invertible");
  }
  double observed_p0(double true_p0) const { return (1.0 - eps0) * true_p0 + eps1 * (1.0 - true_p0); }
};

struct CorrectedProbability {
  double value;
  bool clamped;
};

/// Inverse confusion matrix applied to a raw outcome-0 frequency; result
/// clamped to [0, 1].
inline CorrectedProbability readout_correction(double raw_p0, const ReadoutConfusion& c) {
  c.validate();
  const double v = (raw_p0 - c.eps1) / (1.0 - c.eps0 - c.eps1);
  const double clamped = std::clamp(v, 0.0, 1.0);
  return {clamped, clamped != v};
}

enum class Axis { x = 0, y = 1, z = 2 };

/// Projective single-shot source: returns the (possibly misread) outcome of
/// a measurement along `axis`; zero is the +1 eigenstate.
using ProjectiveSampler = std::function<Outcome(Axis, Rng&)>;

template <typename Scalar>
ProjectiveSampler make_projective_sampler(const DensityMatrix<Scalar>& rho, ReadoutConfusion confusion = {}) {
  confusion.validate();
  const BlochVector<Scalar> b = bloch_from_density(rho);
  const std::array<double, 3> p0 = {(1.0 + double(b.x)) / 2.0, (1.0 + double(b.y)) / 2.0,
                                    (1.0 + double(b.z)) / 2.0};
  return [p0, confusion](Axis a, Rng& rng) {
    std::bernoulli_distribution truth(std::clamp(p0[static_cast<int>(a)], 0.0, 1.0));
    const bool zero = truth(rng);
    std::bernoulli_distribution misread(zero ? confusion.eps0 : confusion.eps1);
    return (zero != misread(rng)) ? Outcome::zero : Outcome::one;
  };
}

template <typename Scalar>
struct TomographyResult {
  DensityMatrix<Scalar> state;
  BlochVector<Scalar> raw;        // before clipping to the ball
  BlochVector<Scalar> std_error;  // per component, zero in the exact limit
  bool clipped;
};

/// Linear inversion from raw outcome-0 probabilities along (x, y, z).
template <typename Scalar>
TomographyResult<Scalar> tomography_from_probabilities(const std::array<double, 3>& raw_p0,
                                                       const ReadoutConfusion& confusion,
                                                       const std::array<double, 3>& raw_se = {0, 0, 0}) {
  confusion.validate();
  const double scale = 1.0 - confusion.eps0 - confusion.eps1;
  std::array<Scalar, 3> comp{};
  std::array<Scalar, 3> se{};
  for (int i = 0; i < 3; ++i) {
    const double p = (raw_p0[i] - confusion.eps1) / scale;
    comp[i] = Scalar(2.0 * p - 1.0);
    se[i] = Scalar(2.0 * raw_se[i] / scale);
  }
  BlochVector<Scalar> raw{comp[0], comp[1], comp[2]};
  BlochVector<Scalar> b = raw;
  bool clipped = false;
  if (b.norm() > Scalar(1)) {
    const Scalar s = Scalar(1) / b.norm();
    b = {b.x * s, b.y * s, b.z * s};
    clipped = true;
  }
  return {density_from_bloch(b), raw, {se[0], se[1], se[2]}, clipped};
}

template <typename Scalar = double>
TomographyResult<Scalar> state_tomography(const ProjectiveSampler& sampler, std::size_t shots_per_basis,
                                          const ReadoutConfusion& confusion, Rng& rng) {
  if (shots_per_basis < 1) throw InvalidArgument("state_tomography: need at least one shot per basis");
  std::array<double, 3> p0{};
  std::array<double, 3> se{};
  for (int a = 0; a < 3; ++a) {
    std::size_t zeros = 0;
    for (std::size_t s = 0; s < shots_per_basis; ++s) {
      if (sampler(static_cast<Axis>(a), rng) == Outcome::zero) ++zeros;
    }
    p0[a] = static_cast<double>(zeros) / static_cast<double>(shots_per_basis);
    se[a] = binomial_se(p0[a], shots_per_basis);
  }
  return tomography_from_probabilities<Scalar>(p0, confusion, se);
}

// ---------------------------------------------------------------------------
// Process tomography

template <typename Scalar>
using ChiMatrix = Eigen::Matrix<Complex<Scalar>, 4, 4>;

template <typename Scalar>
std::array<Operator<Scalar>, 4> pauli_basis() {
  return {pauli_i<Scalar>(), pauli_x<Scalar>(), pauli_y<Scalar>(), pauli_z<Scalar>()};
}

/// chi in the Pauli basis: rho -> sum_mn chi_mn P_m rho P_n.
template <typename Scalar>
class ProcessMatrix {
 public:
  /// Validates Hermiticity (1e-10), positivity (1e-9) and trace <= 1 + 1e-9.
  static ProcessMatrix from_matrix(const ChiMatrix<Scalar>& chi) {
    const Scalar herm = (chi - chi.adjoint()).cwiseAbs().maxCoeff();
    if (herm > Scalar(1e-10)) throw ReconstructionFailure("ProcessMatrix: not Hermitian", double(herm));
    const ChiMatrix<Scalar> h = (chi + chi.adjoint()) / Scalar(2);
    Eigen::SelfAdjointEigenSolver<ChiMatrix<Scalar>> es(h, Eigen::EigenvaluesOnly);
    const Scalar min_eig = es.eigenvalues().minCoeff();
    if (min_eig < Scalar(-1e-9)) {
      throw ReconstructionFailure("ProcessMatrix: not positive semidefinite", double(-min_eig));
    }
    const Scalar tr = h.trace().real();
    if (tr > Scalar(1) + Scalar(1e-9)) {
      throw ReconstructionFailure("ProcessMatrix: trace exceeds one", double(tr - Scalar(1)));
    }
    return ProcessMatrix(h);
  }

  const ChiMatrix<Scalar>& chi() const { return chi_; }
  Scalar trace() const { return chi_.trace().real(); }

  ProcessMatrix normalized() const {
    if (!(trace() > Scalar(0))) throw DegenerateBranch("ProcessMatrix: zero trace");
    return ProcessMatrix(chi_ / trace());
  }

  /// Applies the process to a 2x2 matrix.
  Operator<Scalar> apply(const Operator<Scalar>& rho) const {
    const auto basis = pauli_basis<Scalar>();
    Operator<Scalar> out = Operator<Scalar>::Zero();
    for (int m = 0; m < 4; ++m)
      for (int n = 0; n < 4; ++n) out += chi_(m, n) * basis[m] * rho * basis[n].adjoint();
    return out;
  }

 private:
  explicit ProcessMatrix(const ChiMatrix<Scalar>& chi) : chi_(chi) {}
  ChiMatrix<Scalar> chi_;
};

/// Analytic chi of a Kraus set: chi_mn = sum_k c_km conj(c_kn), c_km = tr(P_m K_k)/2.
template <typename Scalar>
ProcessMatrix<Scalar> chi_from_kraus(std::span<const Operator<Scalar>> kraus) {
  const auto basis = pauli_basis<Scalar>();
  ChiMatrix<Scalar> chi = ChiMatrix<Scalar>::Zero();
  for (const auto& k : kraus) {
    Eigen::Matrix<Complex<Scalar>, 4, 1> c;
    for (int m = 0; m < 4; ++m) c(m) = (basis[m] * k).trace() / Scalar(2);
    chi += c * c.adjoint();
  }
  return ProcessMatrix<Scalar>::from_matrix(chi);
}

template <typename Scalar>
using Channel = std::function<DensityMatrix<Scalar>(const DensityMatrix<Scalar>&)>;

/// Linear-inversion reconstruction from the probes |down>, |up>, |x>, |y>.
/// The Choi matrix sum_ij E(|i><j|) (x) |i><j| is assembled from the probe
/// outputs and projected onto vectorized Pauli operators.
template <typename Scalar>
ProcessMatrix<Scalar> reconstruct_process(const Channel<Scalar>& channel) {
  using C = Complex<Scalar>;
  using State = PureState<Scalar>;
  const Operator<Scalar> out_down = channel(DensityMatrix<Scalar>::from_pure(State::down())).matrix();
  const Operator<Scalar> out_up = channel(DensityMatrix<Scalar>::from_pure(State::up())).matrix();
  const Operator<Scalar> out_x = channel(DensityMatrix<Scalar>::from_pure(State::plus_x())).matrix();
  const Operator<Scalar> out_y = channel(DensityMatrix<Scalar>::from_pure(State::plus_y())).matrix();

  const C i(0, 1);
  const Operator<Scalar> diag_sum = out_down + out_up;
  // |down><up| = rho_x + i rho_y - (1+i)/2 I and |up><down| = rho_x - i rho_y - (1-i)/2 I.
  const Operator<Scalar> out_01 = out_x + i * out_y - (C(1) + i) / Scalar(2) * diag_sum;
  const Operator<Scalar> out_10 = out_x - i * out_y - (C(1) - i) / Scalar(2) * diag_sum;
  const std::array<std::array<Operator<Scalar>, 2>, 2> image = {{{out_down, out_01}, {out_10, out_up}}};

  // Choi index (a, i) -> 2a + i with a the output row and i the input row.
  ChiMatrix<Scalar> choi = ChiMatrix<Scalar>::Zero();
  for (int in_r = 0; in_r < 2; ++in_r)
    for (int in_c = 0; in_c < 2; ++in_c)
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) choi(2 * a + in_r, 2 * b + in_c) = image[in_r][in_c](a, b);

  const auto basis = pauli_basis<Scalar>();
  Eigen::Matrix<C, 4, 4> vecs;  // column m = row-major vec(P_m)
  for (int m = 0; m < 4; ++m)
    for (int a = 0; a < 2; ++a)
      for (int r = 0; r < 2; ++r) vecs(2 * a + r, m) = basis[m](a, r);
  const ChiMatrix<Scalar> chi = vecs.adjoint() * choi * vecs / Scalar(4);
  return ProcessMatrix<Scalar>::from_matrix(chi);
}

/// Uhlmann fidelity of the trace-normalized process matrices; equals
/// tr(chi_ideal chi) whenever the ideal process has a single Kraus operator.
template <typename Scalar>
Scalar process_fidelity(const ProcessMatrix<Scalar>& ideal, const ProcessMatrix<Scalar>& actual) {
  using Mat = ChiMatrix<Scalar>;
  const Mat a = ideal.normalized().chi();
  const Mat b = actual.normalized().chi();
  Eigen::SelfAdjointEigenSolver<Mat> ea(a);
  // Round-off eigenvalues would otherwise contribute sqrt(eps) each.
  const auto floor_small = [](auto v) {
    const Scalar cut = Scalar(1e-13) * std::max(Scalar(1), v.cwiseAbs().maxCoeff());
    return v.unaryExpr([cut](Scalar e) { return e < cut ? Scalar(0) : e; }).eval();
  };
  const auto ev = floor_small(ea.eigenvalues()).cwiseSqrt().eval();
  const Mat sqrt_a = ea.eigenvectors() * ev.asDiagonal() * ea.eigenvectors().adjoint();
  Mat inner = sqrt_a * b * sqrt_a;
  inner = (inner + inner.adjoint()).eval() / Scalar(2);
  Eigen::SelfAdjointEigenSolver<Mat> ei(inner, Eigen::EigenvaluesOnly);
  const Scalar root_sum = floor_small(ei.eigenvalues()).cwiseSqrt().sum();
  return std::min(Scalar(1), root_sum * root_sum);
}

enum class ChannelKind { trace_preserving, trace_decreasing };

template <typename Scalar>
struct ProcessTomographyResult {
  ProcessMatrix<Scalar> chi;  // as reconstructed (trace < 1 for conditional maps)
  Scalar trace;
  Scalar fidelity;
};

template <typename Scalar>
ProcessTomographyResult<Scalar> process_tomography(const Channel<Scalar>& channel,
                                                   const ProcessMatrix<Scalar>& ideal, ChannelKind kind) {
  const ProcessMatrix<Scalar> chi = reconstruct_process(channel);
  if (kind == ChannelKind::trace_preserving && std::abs(chi.trace() - Scalar(1)) > Scalar(1e-9)) {
    throw ReconstructionFailure("process_tomography: channel declared trace preserving is not",
                                double(std::abs(chi.trace() - Scalar(1))));
  }
  return {chi, chi.trace(), process_fidelity(ideal, chi)};
}

}  // namespace weakmeas
