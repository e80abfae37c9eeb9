#include "weakmeas/readout.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>

#include "weakmeas/errors.hpp"

namespace weakmeas {

namespace {

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

struct Trajectory {
  int stop_bin = 0;
  std::optional<int> photon_bin;
  std::optional<int> flip_bin;
  int post_electron = 0;
};

// One pass over the bins. The per-bin draw sequence does not depend on the
// budget, so truncating a trajectory at T bins equals re-running with
// max_bins = T on the same stream.
Trajectory run_trajectory(int electron_in, const ReadoutModel& m, ReadoutMode mode, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Trajectory t;
  int electron = electron_in;
  t.stop_bin = m.max_bins;
  for (int bin = 1; bin <= m.max_bins; ++bin) {
    const bool bright = electron == 0;
    const bool photon = u(rng) < (bright ? m.p_det : m.p_dark);
    if (photon && !t.photon_bin) t.photon_bin = bin;
    if (photon && mode == ReadoutMode::dynamical_stop) {
      t.stop_bin = bin;
      break;
    }
    if (bright && u(rng) < m.p_flip) {
      electron = 1;
      t.flip_bin = bin;
    }
  }
  t.post_electron = electron;
  return t;
}

double coherence_at(const Trajectory& t, const ReadoutModel& m, int electron_in, int bins) {
  if (electron_in != 0) return 1.0;
  if (t.flip_bin && *t.flip_bin <= bins) return 0.0;
  const int bright = std::min(bins, t.stop_bin);
  return std::max(m.c_floor, std::pow(m.kappa, bright));
}

}  // namespace

void ReadoutModel::validate() const {
  if (!(bin_duration > 0.0)) throw InvalidArgument("ReadoutModel: bin_duration must be positive");
  if (max_bins < 0) throw InvalidArgument("ReadoutModel: max_bins must be non-negative");
  if (!is_probability(p_det) || !is_probability(p_flip) || !is_probability(p_dark)) {
    throw InvalidArgument("ReadoutModel: per-bin probabilities must lie in [0, 1]");
  }
  if (!(kappa > 0.0 && kappa <= 1.0)) throw InvalidArgument("ReadoutModel: kappa must lie in (0, 1]");
  if (!is_probability(c_floor)) throw InvalidArgument("ReadoutModel: c_floor must lie in [0, 1]");
}

ReadoutModel ReadoutModel::with_budget(double budget_seconds) const {
  if (!(budget_seconds >= 0.0)) throw InvalidArgument("ReadoutModel: negative readout budget");
  ReadoutModel m = *this;
  m.max_bins = static_cast<int>(std::floor(budget_seconds / bin_duration + 1e-9));
  return m;
}

ReadoutModel ReadoutModel::ideal() { return ReadoutModel{}; }

ReadoutModel ReadoutModel::calibrated() {
  static const ReadoutModel model = calibrate_readout(ReadoutTargets{}).model;
  return model;
}

std::string to_string(ReadoutMode m) {
  return m == ReadoutMode::conventional ? "conventional" : "dynamical_stop";
}

ReadoutMode readout_mode_from_string(const std::string& s) {
  if (s == "conventional") return ReadoutMode::conventional;
  if (s == "dynamical_stop") return ReadoutMode::dynamical_stop;
  throw InvalidArgument("unknown readout mode '" + s + "'");
}

ReadoutRecord simulate_readout(int electron_in, const ReadoutModel& model, ReadoutMode mode, Rng& rng) {
  model.validate();
  if (electron_in != 0 && electron_in != 1) throw InvalidArgument("simulate_readout: electron state must be 0 or 1");
  const Trajectory t = run_trajectory(electron_in, model, mode, rng);
  ReadoutRecord r;
  r.mode = mode;
  r.outcome = t.photon_bin ? Outcome::zero : Outcome::one;
  r.stop_bin = t.stop_bin;
  r.photon_bin = t.photon_bin;
  r.flipped = t.flip_bin.has_value();
  r.post_electron = t.post_electron;
  if (electron_in == 0) {
    r.bright_bins = t.flip_bin ? *t.flip_bin : t.stop_bin;
  } else {
    r.bright_bins = 0;
  }
  r.nuclear_coherence_factor = coherence_at(t, model, electron_in, model.max_bins);
  return r;
}

QndReport qnd_fidelity(const ReadoutModel& model, ReadoutMode mode, std::size_t trials, const SeedPath& seeds,
                       unsigned threads) {
  model.validate();
  if (trials == 0) throw InvalidArgument("qnd_fidelity: trials must be positive");
  const std::size_t blocks = block_count(trials);
  struct Counts {
    std::size_t kept0 = 0, kept1 = 0, photon0 = 0, photon_kept0 = 0;
  };
  std::vector<Counts> per_block(blocks);
  for_each_block(trials, threads, [&](std::size_t b, std::size_t begin, std::size_t end) {
    Rng rng0 = seeds.child({0, b}).engine();
    Rng rng1 = seeds.child({1, b}).engine();
    Counts c;
    for (std::size_t i = begin; i < end; ++i) {
      const auto r0 = simulate_readout(0, model, mode, rng0);
      if (r0.post_electron == 0) ++c.kept0;
      if (r0.photon_bin) {
        ++c.photon0;
        if (r0.post_electron == 0) ++c.photon_kept0;
      }
      if (simulate_readout(1, model, mode, rng1).post_electron == 1) ++c.kept1;
    }
    per_block[b] = c;
  });
  Counts total;
  for (const auto& c : per_block) {
    total.kept0 += c.kept0;
    total.kept1 += c.kept1;
    total.photon0 += c.photon0;
    total.photon_kept0 += c.photon_kept0;
  }
  const double n = static_cast<double>(trials);
  QndReport rep;
  rep.fidelity_0 = {total.kept0 / n, binomial_se(total.kept0 / n, trials)};
  rep.fidelity_1 = {total.kept1 / n, binomial_se(total.kept1 / n, trials)};
  if (total.photon0 > 0) {
    const double p = static_cast<double>(total.photon_kept0) / static_cast<double>(total.photon0);
    rep.fidelity_0_given_photon = {p, binomial_se(p, total.photon0)};
  }
  rep.average_fidelity = {(rep.fidelity_0.value + rep.fidelity_1.value) / 2.0,
                          std::hypot(rep.fidelity_0.std_error, rep.fidelity_1.std_error) / 2.0};
  return rep;
}

OutcomeFidelity readout_outcome_fidelity(const ReadoutModel& model, std::size_t trials, const SeedPath& seeds,
                                         unsigned threads) {
  model.validate();
  if (trials == 0) throw InvalidArgument("readout_outcome_fidelity: trials must be positive");
  const std::size_t blocks = block_count(trials);
  std::vector<std::array<std::size_t, 2>> per_block(blocks);
  for_each_block(trials, threads, [&](std::size_t b, std::size_t begin, std::size_t end) {
    Rng rng0 = seeds.child({0, b}).engine();
    Rng rng1 = seeds.child({1, b}).engine();
    std::array<std::size_t, 2> c{0, 0};
    for (std::size_t i = begin; i < end; ++i) {
      if (simulate_readout(0, model, ReadoutMode::conventional, rng0).outcome == Outcome::zero) ++c[0];
      if (simulate_readout(1, model, ReadoutMode::conventional, rng1).outcome == Outcome::one) ++c[1];
    }
    per_block[b] = c;
  });
  std::size_t bright = 0, dark = 0;
  for (const auto& c : per_block) {
    bright += c[0];
    dark += c[1];
  }
  const double n = static_cast<double>(trials);
  return {{bright / n, binomial_se(bright / n, trials)}, {dark / n, binomial_se(dark / n, trials)}};
}

std::vector<CoherencePoint> nuclear_coherence_curve(const ReadoutModel& model, ReadoutMode mode,
                                                    std::span<const double> durations, std::size_t trials,
                                                    const SeedPath& seeds, unsigned threads, int electron_in) {
  model.validate();
  if (trials == 0) throw InvalidArgument("nuclear_coherence_curve: trials must be positive");
  std::vector<int> bins;
  bins.reserve(durations.size());
  for (const double t : durations) {
    if (!(t >= 0.0) || t > model.duration() * (1.0 + 1e-12)) {
      throw InvalidArgument("nuclear_coherence_curve: duration outside [0, max_bins * bin_duration]");
    }
    bins.push_back(std::min(model.max_bins, static_cast<int>(std::floor(t / model.bin_duration + 1e-9))));
  }
  const std::size_t blocks = block_count(trials);
  std::vector<std::vector<Tally>> per_block(blocks, std::vector<Tally>(bins.size()));
  for_each_block(trials, threads, [&](std::size_t b, std::size_t begin, std::size_t end) {
    Rng rng = seeds.child(b).engine();
    auto& tallies = per_block[b];
    for (std::size_t i = begin; i < end; ++i) {
      const Trajectory t = run_trajectory(electron_in, model, mode, rng);
      for (std::size_t g = 0; g < bins.size(); ++g) tallies[g].add(coherence_at(t, model, electron_in, bins[g]));
    }
  });
  std::vector<CoherencePoint> out;
  out.reserve(bins.size());
  for (std::size_t g = 0; g < bins.size(); ++g) {
    Tally total;
    for (const auto& blk : per_block) total.merge(blk[g]);
    out.push_back({durations[g], {(1.0 + total.mean()) / 2.0, total.std_error() / 2.0}, 1.0});
  }
  return out;
}

namespace exact {

double conventional_fidelity_0(const ReadoutModel& m) { return std::pow(1.0 - m.p_flip, m.max_bins); }

double dynamical_stop_fidelity_0(const ReadoutModel& m) {
  const double q = (1.0 - m.p_det) * (1.0 - m.p_flip);
  double sum = 0.0, qn = 1.0;
  for (int n = 1; n <= m.max_bins; ++n) {
    sum += qn * m.p_det;
    qn *= q;
  }
  return sum + qn;
}

double bright_given_0(const ReadoutModel& m) {
  const double q = (1.0 - m.p_det) * (1.0 - m.p_flip);
  const int n_bins = m.max_bins;
  double no_photon = 0.0, qk = 1.0;
  for (int k = 1; k <= n_bins; ++k) {
    no_photon += qk * (1.0 - m.p_det) * m.p_flip * std::pow(1.0 - m.p_dark, n_bins - k);
    qk *= q;
  }
  return 1.0 - (no_photon + qk);
}

double dark_given_1(const ReadoutModel& m) { return std::pow(1.0 - m.p_dark, m.max_bins); }

double mean_coherence(const ReadoutModel& m, ReadoutMode mode, int bins) {
  const int t = std::clamp(bins, 0, m.max_bins);
  auto floor_pow = [&](int n) { return std::max(m.c_floor, std::pow(m.kappa, n)); };
  if (mode == ReadoutMode::conventional) return std::pow(1.0 - m.p_flip, t) * floor_pow(t);
  const double q = (1.0 - m.p_det) * (1.0 - m.p_flip);
  double sum = 0.0, qn = 1.0;
  for (int n = 1; n <= t; ++n) {
    sum += qn * m.p_det * floor_pow(n);
    qn *= q;
  }
  return sum + qn * floor_pow(t);
}

}  // namespace exact

ReadoutTargets ReadoutTargets::perfect_device() {
  ReadoutTargets t;
  t.bright_given_0 = t.dark_given_1 = t.conventional_fidelity_0 = t.dynamical_stop_fidelity_0 = 1.0;
  t.saturation_fidelity_x = t.conventional_fidelity_x = 1.0;
  return t;
}

namespace {

// Golden-section refinement of a coarse scan; deterministic.
template <typename F>
double minimize_1d(F&& f, double lo, double hi, int scan = 2001) {
  double best_x = lo, best_f = std::numeric_limits<double>::infinity();
  const double step = (hi - lo) / (scan - 1);
  for (int i = 0; i < scan; ++i) {
    const double x = lo + i * step;
    const double v = f(x);
    if (v < best_f) {
      best_f = v;
      best_x = x;
    }
  }
  double a = std::max(lo, best_x - step), b = std::min(hi, best_x + step);
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 200 && b - a > 1e-15; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  const double x = (a + b) / 2.0;
  return f(x) <= best_f ? x : best_x;
}

void check_target(const char* name, double v) {
  if (!(v > 0.0 && v <= 1.0)) {
    throw InfeasibleTargets(std::string("calibrate_readout: target '") + name + "' must lie in (0, 1]");
  }
}

}  // namespace

ReadoutCalibration calibrate_readout(const ReadoutTargets& t) {
  check_target("bright_given_0", t.bright_given_0);
  check_target("dark_given_1", t.dark_given_1);
  check_target("conventional_fidelity_0", t.conventional_fidelity_0);
  check_target("dynamical_stop_fidelity_0", t.dynamical_stop_fidelity_0);
  if (!(t.saturation_fidelity_x >= 0.5 && t.saturation_fidelity_x <= 1.0) ||
      !(t.conventional_fidelity_x >= 0.5 && t.conventional_fidelity_x <= 1.0)) {
    throw InfeasibleTargets("calibrate_readout: coherence fidelities must lie in [0.5, 1]");
  }
  if (t.max_bins <= 0 || !(t.bin_duration > 0.0)) throw InfeasibleTargets("calibrate_readout: invalid binning");
  if (t.dynamical_stop_fidelity_0 < t.conventional_fidelity_0) {
    throw InfeasibleTargets(
        "calibrate_readout: dynamical_stop_fidelity_0 below conventional_fidelity_0 (stopping early cannot add flips)");
  }

  ReadoutModel m;
  m.bin_duration = t.bin_duration;
  m.max_bins = t.max_bins;
  const double n = static_cast<double>(t.max_bins);
  m.p_flip = 1.0 - std::pow(t.conventional_fidelity_0, 1.0 / n);
  m.p_dark = 1.0 - std::pow(t.dark_given_1, 1.0 / n);

  // p_det is shared by the classification and dynamical-stop fidelities;
  // weight each by its acceptance tolerance.
  m.p_det = minimize_1d(
      [&](double p) {
        ReadoutModel k = m;
        k.p_det = p;
        const double a = (exact::bright_given_0(k) - t.bright_given_0) / 0.01;
        const double b = (exact::dynamical_stop_fidelity_0(k) - t.dynamical_stop_fidelity_0) / 0.02;
        return a * a + b * b;
      },
      0.0, 1.0);

  const int half_bins = static_cast<int>(std::lround(t.half_coherence_time / t.bin_duration));
  if (half_bins < 0 || half_bins > t.max_bins) {
    throw InfeasibleTargets("calibrate_readout: half_coherence_time outside the readout window");
  }
  auto coherence_cost = [&](double kappa, double floor) {
    ReadoutModel k = m;
    k.kappa = kappa;
    k.c_floor = floor;
    const double sat = (1.0 + exact::mean_coherence(k, ReadoutMode::dynamical_stop, t.max_bins)) / 2.0;
    const double conv = (1.0 + exact::mean_coherence(k, ReadoutMode::conventional, half_bins)) / 2.0;
    const double a = (sat - t.saturation_fidelity_x) / 0.01;
    const double b = (conv - t.conventional_fidelity_x) / 0.03;
    return a * a + b * b;
  };
  // Grid refinement over (kappa, c_floor) in [1e-6, 1] x [0, 1]. Kappa is
  // scanned downward and the floor upward so ties keep the weaker model.
  double k_lo = 1e-6, k_hi = 1.0, c_lo = 0.0, c_hi = 1.0;
  double best_k = 1.0, best_c = 0.0, best = std::numeric_limits<double>::infinity();
  constexpr int kGrid = 41;
  for (int level = 0; level < 12; ++level) {
    for (int i = 0; i < kGrid; ++i) {
      const double kap = k_hi - (k_hi - k_lo) * i / (kGrid - 1);
      for (int j = 0; j < kGrid; ++j) {
        const double fl = c_lo + (c_hi - c_lo) * j / (kGrid - 1);
        const double v = coherence_cost(kap, fl);
        if (v < best) {
          best = v;
          best_k = kap;
          best_c = fl;
        }
      }
    }
    const double dk = 2.0 * (k_hi - k_lo) / (kGrid - 1), dc = 2.0 * (c_hi - c_lo) / (kGrid - 1);
    k_lo = std::max(1e-6, best_k - dk);
    k_hi = std::min(1.0, best_k + dk);
    c_lo = std::max(0.0, best_c - dc);
    c_hi = std::min(1.0, best_c + dc);
  }
  m.kappa = best_k;
  m.c_floor = best_c;
  m.validate();

  ReadoutCalibration cal{m, {}};
  auto push = [&](const char* name, double target, double achieved, double tol) {
    cal.residuals.push_back({name, target, achieved});
    if (std::abs(achieved - target) > tol) {
      throw InfeasibleTargets(std::string("calibrate_readout: constraint '") + name + "' unmet (target " +
                              std::to_string(target) + ", best " + std::to_string(achieved) + ")");
    }
  };
  push("bright_given_0", t.bright_given_0, exact::bright_given_0(m), 0.01);
  push("dark_given_1", t.dark_given_1, exact::dark_given_1(m), 0.005);
  push("conventional_fidelity_0", t.conventional_fidelity_0, exact::conventional_fidelity_0(m), 0.02);
  push("dynamical_stop_fidelity_0", t.dynamical_stop_fidelity_0, exact::dynamical_stop_fidelity_0(m), 0.02);
  push("saturation_fidelity_x", t.saturation_fidelity_x,
       (1.0 + exact::mean_coherence(m, ReadoutMode::dynamical_stop, t.max_bins)) / 2.0, 0.01);
  push("conventional_fidelity_x", t.conventional_fidelity_x,
       (1.0 + exact::mean_coherence(m, ReadoutMode::conventional, half_bins)) / 2.0, 0.03);
  return cal;
}

}  // namespace weakmeas
