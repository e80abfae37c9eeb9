#pragma once

// Exact single-qubit algebra: kets, density matrices, Bloch vectors.
//
// Basis ordering is (|down>, |up>). Pauli convention: sigma_z |down> = +|down>,
// sigma_z |up> = -|up>, so sigma_z = diag(+1, -1) in this ordering and the
// Bloch z component of |down><down| is +1.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <string>

#include "weakmeas/errors.hpp"

namespace weakmeas {

template <typename Scalar>
using Complex = std::complex<Scalar>;
template <typename Scalar>
using Ket = Eigen::Matrix<Complex<Scalar>, 2, 1>;
template <typename Scalar>
using Operator = Eigen::Matrix<Complex<Scalar>, 2, 2>;

/// Two-outcome label. For the partial measurement, `zero` is the ancilla
/// bright state and kicks the system toward |down>.
enum class Outcome { zero = 0, one = 1 };

inline Outcome flip(Outcome o) { return o == Outcome::zero ? Outcome::one : Outcome::zero; }
inline int index(Outcome o) { return static_cast<int>(o); }

template <typename Scalar>
struct Tolerance {
  static constexpr Scalar exact = Scalar(1e-12);
  static constexpr Scalar contraction = Scalar(1e-10);
  static constexpr Scalar bloch = Scalar(1e-9);
};

template <typename Scalar>
Operator<Scalar> pauli_i() {
  return Operator<Scalar>::Identity();
}

template <typename Scalar>
Operator<Scalar> pauli_x() {
  Operator<Scalar> m;
  m << Scalar(0), Scalar(1), Scalar(1), Scalar(0);
  return m;
}

template <typename Scalar>
Operator<Scalar> pauli_y() {
  using C = Complex<Scalar>;
  Operator<Scalar> m;
  m << C(0), C(0, -1), C(0, 1), C(0);
  return m;
}

template <typename Scalar>
Operator<Scalar> pauli_z() {
  Operator<Scalar> m;
  m << Scalar(1), Scalar(0), Scalar(0), Scalar(-1);
  return m;
}

template <typename Scalar>
class PureState {
 public:
  /// Normalizing constructor; rejects the zero vector.
  PureState(Complex<Scalar> amp_down, Complex<Scalar> amp_up) {
    ket_ << amp_down, amp_up;
    const Scalar n = ket_.norm();
    if (!(n > Scalar(0)) || !std::isfinite(static_cast<double>(n))) {
      throw InvalidArgument("PureState: amplitudes must be finite and not both zero");
    }
    ket_ /= n;
  }

  explicit PureState(const Ket<Scalar>& ket) : PureState(ket(0), ket(1)) {}

  static PureState down() { return PureState(Scalar(1), Scalar(0)); }
  static PureState up() { return PureState(Scalar(0), Scalar(1)); }
  static PureState plus_x() { return PureState(Scalar(1), Scalar(1)); }
  static PureState minus_x() { return PureState(Scalar(1), Scalar(-1)); }
  static PureState plus_y() { return PureState(Complex<Scalar>(1), Complex<Scalar>(0, 1)); }

  Complex<Scalar> amp_down() const { return ket_(0); }
  Complex<Scalar> amp_up() const { return ket_(1); }
  const Ket<Scalar>& ket() const { return ket_; }

  Operator<Scalar> projector() const { return ket_ * ket_.adjoint(); }

 private:
  Ket<Scalar> ket_;
};

enum class Normalization { normalized, subnormalized };

template <typename Scalar>
class DensityMatrix {
 public:
  /// Validates Hermiticity, positivity and trace. Trace within 1e-10 of one
  /// is tagged normalized; smaller traces are tagged sub-normalized.
  static DensityMatrix from_matrix(const Operator<Scalar>& m) {
    const Scalar tol = Tolerance<Scalar>::exact;
    if (!m.allFinite()) throw InvalidArgument("DensityMatrix: non-finite entries");
    if ((m - m.adjoint()).cwiseAbs().maxCoeff() > tol) {
      throw InvalidArgument("DensityMatrix: matrix is not Hermitian");
    }
    const Operator<Scalar> h = (m + m.adjoint()) / Scalar(2);
    Eigen::SelfAdjointEigenSolver<Operator<Scalar>> es(h, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -tol) {
      throw InvalidArgument("DensityMatrix: matrix has a negative eigenvalue");
    }
    const Scalar tr = h.trace().real();
    if (tr > Scalar(1) + tol || tr < Scalar(0)) {
      throw InvalidArgument("DensityMatrix: trace outside [0, 1]");
    }
    const auto tag = std::abs(tr - Scalar(1)) <= Scalar(1e-10) ? Normalization::normalized
                                                               : Normalization::subnormalized;
    return DensityMatrix(h, tag);
  }

  static DensityMatrix from_pure(const PureState<Scalar>& psi) {
    return DensityMatrix(psi.projector(), Normalization::normalized);
  }

  static DensityMatrix maximally_mixed() {
    return DensityMatrix(Operator<Scalar>::Identity() / Scalar(2), Normalization::normalized);
  }

  const Operator<Scalar>& matrix() const { return m_; }
  Complex<Scalar> operator()(int r, int c) const { return m_(r, c); }
  Scalar trace() const { return m_.trace().real(); }
  Normalization normalization() const { return tag_; }
  bool is_normalized() const { return tag_ == Normalization::normalized; }
  Scalar purity() const { return (m_ * m_).trace().real(); }

  /// Rescales to unit trace.
  DensityMatrix normalized() const {
    const Scalar tr = trace();
    if (!(tr > Scalar(0))) throw DegenerateBranch("DensityMatrix: cannot normalize a zero-trace state");
    return DensityMatrix(m_ / tr, Normalization::normalized);
  }

  /// Multiplies the off-diagonal coherences by `factor` (pure dephasing in z).
  DensityMatrix dephased(Scalar factor) const {
    Operator<Scalar> m = m_;
    m(0, 1) *= factor;
    m(1, 0) *= factor;
    return DensityMatrix(m, tag_);
  }

 private:
  DensityMatrix(const Operator<Scalar>& m, Normalization tag) : m_(m), tag_(tag) {}

  Operator<Scalar> m_;
  Normalization tag_;
};

template <typename Scalar>
struct BlochVector {
  Scalar x = 0;
  Scalar y = 0;
  Scalar z = 0;

  Scalar norm() const { return std::sqrt(x * x + y * y + z * z); }
};

template <typename Scalar>
BlochVector<Scalar> bloch_from_density(const DensityMatrix<Scalar>& rho) {
  if (!rho.is_normalized()) throw InvalidArgument("bloch_from_density: state is not normalized");
  const Complex<Scalar> c = rho(0, 1);
  return {Scalar(2) * c.real(), Scalar(-2) * c.imag(), (rho(0, 0) - rho(1, 1)).real()};
}

template <typename Scalar>
DensityMatrix<Scalar> density_from_bloch(const BlochVector<Scalar>& b) {
  if (!(b.norm() <= Scalar(1) + Tolerance<Scalar>::bloch)) {
    throw InvalidArgument("density_from_bloch: Bloch vector outside the unit ball");
  }
  const Operator<Scalar> m = (pauli_i<Scalar>() + b.x * pauli_x<Scalar>() + b.y * pauli_y<Scalar>() +
                              b.z * pauli_z<Scalar>()) /
                             Scalar(2);
  // A vector with norm in (1, 1 + 1e-9] has an eigenvalue of order -1e-9;
  // shrink it onto the sphere so the positivity check holds.
  if (b.norm() > Scalar(1)) {
    const Scalar s = Scalar(1) / b.norm();
    return density_from_bloch(BlochVector<Scalar>{b.x * s, b.y * s, b.z * s});
  }
  return DensityMatrix<Scalar>::from_matrix(m);
}

enum class OverlapMode { strict, raw };

/// <target| rho |target>. Sub-normalized input is rejected unless `raw`.
template <typename Scalar>
Scalar fidelity(const DensityMatrix<Scalar>& rho, const PureState<Scalar>& target,
                OverlapMode mode = OverlapMode::strict) {
  if (mode == OverlapMode::strict && !rho.is_normalized()) {
    throw InvalidArgument("fidelity: sub-normalized state (use OverlapMode::raw)");
  }
  const Complex<Scalar> v = (target.ket().adjoint() * rho.matrix() * target.ket())(0, 0);
  return v.real();
}

/// True when K^dagger K <= I within tolerance.
template <typename Scalar>
bool is_contraction(const Operator<Scalar>& k, Scalar tol = Tolerance<Scalar>::contraction) {
  const Operator<Scalar> kk = k.adjoint() * k;
  Eigen::SelfAdjointEigenSolver<Operator<Scalar>> es(kk, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff() <= Scalar(1) + tol;
}

template <typename Scalar>
struct Branch {
  DensityMatrix<Scalar> state;  // sub-normalized: K rho K^dagger
  Scalar probability;
};

template <typename Scalar>
Branch<Scalar> apply_operator(const DensityMatrix<Scalar>& rho, const Operator<Scalar>& k) {
  if (!is_contraction(k)) throw InvalidArgument("apply_operator: K^dagger K exceeds identity");
  Operator<Scalar> out = k * rho.matrix() * k.adjoint();
  out = (out + out.adjoint()).eval() / Scalar(2);
  Scalar p = out.trace().real();
  if (p > Scalar(1)) {
    out /= p;
    p = Scalar(1);
  }
  return {DensityMatrix<Scalar>::from_matrix(out), p};
}

template <typename Scalar>
std::string to_string(const BlochVector<Scalar>& b) {
  return "(" + std::to_string(b.x) + ", " + std::to_string(b.y) + ", " + std::to_string(b.z) + ")";
}

}  // namespace weakmeas
