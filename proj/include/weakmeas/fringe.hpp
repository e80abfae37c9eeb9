#pragma once

// Ramsey-type fringe of the ancilla under the hyperfine gate,
//   p0(tau) = y0 + a exp(-(tau / T2*)^2) cos(A tau + phi),
// and weighted least-squares recovery of (y0, a, A, phi, T2*).

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "weakmeas/partial_measurement.hpp"
#include "weakmeas/random.hpp"

namespace weakmeas {

/// Electron dephasing time T2* = 1.35 us.
inline constexpr double kElectronT2Star = 1.35e-6;

struct FringeModel {
  double offset = 0.5;    // y0
  double contrast = 0.5;  // a
  double coupling = kHyperfineCoupling;  // A, rad/s
  double phase = 0.0;     // phi, rad
  double t2star = kElectronT2Star;  // s
};

double fringe_value(const FringeModel& m, double tau);

struct FringePoint {
  double tau;  // s
  double p0;
  std::size_t n_shots;
};

struct FringeDataset {
  std::vector<FringePoint> points;

  /// p0 in [0, 1], shots >= 1, taus strictly increasing.
  void validate() const;
};

FringeDataset generate_fringe_data(const FringeModel& m, std::span<const double> taus, std::size_t shots, Rng& rng);

struct FitResult {
  FringeModel params;
  FringeModel std_errors;
  double residual_norm = 0;          // sqrt of the weighted sum of squares
  double initial_residual_norm = 0;  // at the initializer
  bool converged = false;
  int iterations = 0;
};

/// Damped Gauss-Newton on binomially weighted residuals. Without `init`, the
/// frequency is seeded from the periodogram peak of the mean-subtracted data.
FitResult fit_fringe(const FringeDataset& data, std::optional<FringeModel> init = std::nullopt);

/// Evenly spaced grid of `count` points on [lo, hi].
std::vector<double> linspace(double lo, double hi, std::size_t count);

// CSV with header "tau_s,p0,n_shots".
void write_fringe_csv(std::ostream& os, const FringeDataset& data);
FringeDataset read_fringe_csv(std::istream& is);

}  // namespace weakmeas
