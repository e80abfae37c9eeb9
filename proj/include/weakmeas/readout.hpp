#pragma once

// Binned optical readout of the ancilla electron spin.
//
// Per 1 us bin while the electron is bright (state 0): a photon is detected
// with p_det, then, if the readout continues, the electron flips to the dark
// state with p_flip. A dark electron (state 1) never flips back and only
// produces dark counts with p_dark. Dynamical-stop readout halts at the first
// detected photon; conventional readout always runs max_bins bins.
//
// Nuclear coherence during readout: each bright bin multiplies the system
// coherence by kappa, saturating at c_floor; an electron spin flip
// randomizes the hyperfine phase and removes the coherence entirely.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "weakmeas/qmath.hpp"
#include "weakmeas/random.hpp"

namespace weakmeas {

struct ReadoutModel {
  double bin_duration = 1e-6;  // s
  int max_bins = 100;
  double p_det = 1.0;
  double p_flip = 0.0;
  double p_dark = 0.0;
  double kappa = 1.0;
  double c_floor = 0.0;

  void validate() const;
  double duration() const { return bin_duration * max_bins; }
  /// Same model with the bin budget cut to floor(budget / bin_duration).
  ReadoutModel with_budget(double budget_seconds) const;

  /// Noise-free readout: always detects a bright electron, no flips, no dark counts.
  static ReadoutModel ideal();
  /// Model calibrated against the default readout targets.
  static ReadoutModel calibrated();
};

enum class ReadoutMode { conventional, dynamical_stop };

std::string to_string(ReadoutMode m);
ReadoutMode readout_mode_from_string(const std::string& s);

struct ReadoutRecord {
  ReadoutMode mode;
  Outcome outcome;  // zero = bright (at least one photon)
  int stop_bin;     // bins elapsed when the laser was switched off
  std::optional<int> photon_bin;  // 1-based bin of the first detected photon
  bool flipped;
  int post_electron;
  int bright_bins;
  double nuclear_coherence_factor;
};

ReadoutRecord simulate_readout(int electron_in, const ReadoutModel& model, ReadoutMode mode, Rng& rng);

struct Estimate {
  double value = 0;
  double std_error = 0;
};

struct QndReport {
  Estimate fidelity_0;
  Estimate fidelity_1;
  Estimate fidelity_0_given_photon;
  Estimate average_fidelity;
};

QndReport qnd_fidelity(const ReadoutModel& model, ReadoutMode mode, std::size_t trials, const SeedPath& seeds,
                       unsigned threads = 1);

struct OutcomeFidelity {
  Estimate bright_given_0;
  Estimate dark_given_1;
};

/// Classification fidelity of conventional readout.
OutcomeFidelity readout_outcome_fidelity(const ReadoutModel& model, std::size_t trials, const SeedPath& seeds,
                                         unsigned threads = 1);

struct CoherencePoint {
  double time;               // s
  Estimate fidelity_x;       // (1 + mean coherence) / 2
  double fidelity_z;         // constant: z is untouched by readout
};

/// System fidelity to |x> after readout truncated at each duration. Every
/// trajectory is simulated once and read at all grid times.
std::vector<CoherencePoint> nuclear_coherence_curve(const ReadoutModel& model, ReadoutMode mode,
                                                    std::span<const double> durations, std::size_t trials,
                                                    const SeedPath& seeds, unsigned threads = 1,
                                                    int electron_in = 0);

/// Closed-form expectations of the binned model (electron prepared bright
/// unless noted). These back the calibration and serve as oracles.
namespace exact {
double conventional_fidelity_0(const ReadoutModel& m);
double dynamical_stop_fidelity_0(const ReadoutModel& m);
double bright_given_0(const ReadoutModel& m);
double dark_given_1(const ReadoutModel& m);
/// Mean coherence factor after readout truncated at `bins` bins.
double mean_coherence(const ReadoutModel& m, ReadoutMode mode, int bins);
}  // namespace exact

struct ReadoutTargets {
  double bright_given_0 = 0.853;
  double dark_given_1 = 0.986;
  double conventional_fidelity_0 = 0.18;
  double dynamical_stop_fidelity_0 = 0.86;
  double saturation_fidelity_x = 0.615;
  double conventional_fidelity_x = 0.5;  // at `half_coherence_time`
  double half_coherence_time = 25e-6;
  double bin_duration = 1e-6;
  int max_bins = 100;

  static ReadoutTargets perfect_device();
};

struct CalibrationResidual {
  std::string name;
  double target;
  double achieved;
};

struct ReadoutCalibration {
  ReadoutModel model;
  std::vector<CalibrationResidual> residuals;
};

ReadoutCalibration calibrate_readout(const ReadoutTargets& targets);

}  // namespace weakmeas
