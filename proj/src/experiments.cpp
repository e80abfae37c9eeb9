#include "weakmeas/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include "weakmeas/errors.hpp"
#include "weakmeas/feedback.hpp"
#include "weakmeas/fringe.hpp"
#include "weakmeas/partial_measurement.hpp"
#include "weakmeas/tomography.hpp"

namespace weakmeas {

using nlohmann::json;

std::string format_double(double v) {
  if (v == 0.0) return "0";  // folds -0
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void CsvTable::check() const {
  if (columns.empty()) throw Error("csv: no columns");
  std::set<std::string> seen;
  for (const auto& c : columns) {
    if (c.empty() || c.find_first_of(",\"\n") != std::string::npos) throw Error("csv: bad column name '" + c + "'");
    if (!seen.insert(c).second) throw Error("csv: duplicate column '" + c + "'");
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != columns.size()) {
      throw Error("csv: row " + std::to_string(r) + " has " + std::to_string(rows[r].size()) + " cells, expected " +
                  std::to_string(columns.size()));
    }
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (!std::isfinite(rows[r][c])) {
        throw Error("csv: non-finite value in column '" + columns[c] + "', row " + std::to_string(r));
      }
    }
  }
}

std::string CsvTable::str() const {
  std::string s;
  for (std::size_t c = 0; c < columns.size(); ++c) s += (c ? "," : "") + columns[c];
  s += '\n';
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) s += (c ? "," : "") + format_double(row[c]);
    s += '\n';
  }
  return s;
}

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Reads typed values from a JSON table, remembering which keys were used so
// leftovers can be reported.
class Params {
 public:
  Params(const json& j, std::string scope, const RunOptions& opts) : j_(j), scope_(std::move(scope)), opts_(opts) {
    if (!j_.is_object()) throw ConfigError(scope_ + ": expected a JSON object");
  }

  double number(const std::string& key, double def) {
    const double v = get<double>(key, def);
    if (!std::isfinite(v)) throw ConfigError(where(key) + ": must be finite");
    return v;
  }

  double positive(const std::string& key, double def) {
    const double v = number(key, def);
    if (!(v > 0)) throw ConfigError(where(key) + ": must be positive");
    return v;
  }

  bool flag(const std::string& key, bool def) { return get<bool>(key, def); }

  std::size_t count(const std::string& key, std::size_t def) {
    if (j_.contains(key) && !j_.at(key).is_number_integer()) throw ConfigError(where(key) + ": expected an integer");
    const auto v = get<std::int64_t>(key, static_cast<std::int64_t>(def));
    if (v <= 0) throw ConfigError(where(key) + ": must be a positive integer");
    return static_cast<std::size_t>(v);
  }

  std::int64_t integer(const std::string& key, std::int64_t def) {
    if (j_.contains(key) && !j_.at(key).is_number_integer()) throw ConfigError(where(key) + ": expected an integer");
    return get<std::int64_t>(key, def);
  }

  // Monte Carlo sample counts honour --trials-override.
  std::size_t samples(const std::string& key, std::size_t def) {
    const std::size_t v = count(key, def);
    if (opts_.trials_override) {
      if (*opts_.trials_override == 0) throw ConfigError("--trials-override: must be a positive integer");
      resolved_[key] = *opts_.trials_override;
      return *opts_.trials_override;
    }
    return v;
  }

  std::vector<double> list(const std::string& key, std::vector<double> def) {
    auto v = get<std::vector<double>>(key, std::move(def));
    if (v.empty()) throw ConfigError(where(key) + ": must not be empty");
    for (const double x : v)
      if (!std::isfinite(x)) throw ConfigError(where(key) + ": values must be finite");
    return v;
  }

  json sub(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) {
      resolved_[key] = json::object();
      return json::object();
    }
    resolved_[key] = j_.at(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!used_.count(k)) throw ConfigError(scope_ + ": unknown key '" + k + "'");
    }
  }

  std::string where(const std::string& key) const { return scope_ + "." + key; }
  const json& resolved() const { return resolved_; }

 private:
  template <typename T>
  T get(const std::string& key, T def) {
    used_.insert(key);
    T v = std::move(def);
    if (j_.contains(key)) {
      try {
        v = j_.at(key).get<T>();
      } catch (const json::exception&) {
        throw ConfigError(where(key) + ": wrong type");
      }
    }
    resolved_[key] = v;
    return v;
  }

  const json& j_;
  std::string scope_;
  const RunOptions& opts_;
  std::set<std::string> used_;
  json resolved_ = json::object();
};

class Writer {
 public:
  Writer(std::filesystem::path dir, std::vector<std::string>& outputs) : dir_(std::move(dir)), outputs_(outputs) {}

  void write(const std::string& name, const CsvTable& t) {
    t.check();
    std::filesystem::create_directories(dir_);
    std::ofstream f(dir_ / name, std::ios::binary);
    if (!f) throw Error("cannot open " + (dir_ / name).string() + " for writing");
    f << t.str();
    if (!f) throw Error("write failed: " + (dir_ / name).string());
    outputs_.push_back(name);
  }

 private:
  std::filesystem::path dir_;
  std::vector<std::string>& outputs_;
};

std::uint64_t experiment_index(const std::string& name) {
  const auto& n = experiment_names();
  return static_cast<std::uint64_t>(std::find(n.begin(), n.end(), name) - n.begin());
}

double check_theta(const Params& p, const std::string& key, double deg) {
  if (!(deg >= 0 && deg <= 90)) throw ConfigError(p.where(key) + ": angles must lie in [0, 90] degrees");
  return deg * kDeg;
}

ReadoutModel readout_model_from(Params& p) {
  const json targets = p.sub("targets");
  if (targets.empty()) return ReadoutModel::calibrated();
  return calibrate_readout(readout_targets_from_json(targets)).model;
}

// --------------------------------------------------------------------------

void run_fringe(Params& p, const SeedPath& seeds, Writer& w, const RunOptions&) {
  FringeModel m;
  m.coupling = 2 * std::numbers::pi * p.positive("coupling_hz", kHyperfineCoupling / (2 * std::numbers::pi));
  m.t2star = p.positive("t2star_s", kElectronT2Star);
  m.offset = p.number("offset", 0.5);
  m.contrast = p.number("contrast", 0.5);
  m.phase = p.number("phase_rad", 0.0);
  const double lo = p.number("tau_min_s", 0.0);
  const double hi = p.positive("tau_max_s", 4e-6);
  const std::size_t points = p.count("points", 100);
  const std::size_t shots = p.samples("shots", 500);
  p.finish();
  if (!(hi > lo) || lo < 0) throw ConfigError("parameters.tau_max_s: must exceed tau_min_s >= 0");
  if (points < 6) throw ConfigError("parameters.points: need at least 6 points for a 5-parameter fit");

  Rng rng = seeds.child(0).engine();
  FringeDataset data;
  try {
    data = generate_fringe_data(m, linspace(lo, hi, points), shots, rng);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("parameters: ") + e.what());
  }
  CsvTable d{{"tau_s", "p0", "n_shots", "p0_model"}, {}};
  for (const auto& pt : data.points) d.add({pt.tau, pt.p0, double(pt.n_shots), fringe_value(m, pt.tau)});
  w.write("fringe_data.csv", d);

  const FitResult fit = fit_fringe(data);
  CsvTable f{{"offset", "offset_se", "contrast", "contrast_se", "coupling_rad_s", "coupling_se", "phase_rad",
              "phase_se", "t2star_s", "t2star_se", "theta_229ns_deg", "residual_norm", "iterations", "converged"},
             {}};
  f.add({fit.params.offset, fit.std_errors.offset, fit.params.contrast, fit.std_errors.contrast, fit.params.coupling,
         fit.std_errors.coupling, fit.params.phase, fit.std_errors.phase, fit.params.t2star, fit.std_errors.t2star,
         fit.params.coupling * 229e-9 / 2 / kDeg, fit.residual_norm, double(fit.iterations),
         fit.converged ? 1.0 : 0.0});
  w.write("fringe_fit.csv", f);
}

void run_backaction(Params& p, const SeedPath& seeds, Writer& w, const RunOptions&) {
  const auto thetas = p.list("theta_deg", {5, 30, 60, 90});
  const std::size_t shots = p.samples("shots", 20000);
  const ReadoutConfusion conf{p.number("readout_eps0", 1 - 0.853), p.number("readout_eps1", 1 - 0.986)};
  p.finish();
  try {
    conf.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("parameters.readout_eps0/1: ") + e.what());
  }

  const State x = State::from_pure(Pure::plus_x());
  // branch: 0 and 1 are the conditional outcomes, 2 is the unconditional map.
  CsvTable bloch{{"theta_deg", "branch", "probability", "x", "y", "z", "x_tomo", "x_tomo_se", "y_tomo", "y_tomo_se",
                  "z_tomo", "z_tomo_se"},
                 {}};
  CsvTable proc{{"theta_deg", "branch", "trace", "process_fidelity"}, {}};
  for (std::size_t g = 0; g < thetas.size(); ++g) {
    const double theta = check_theta(p, "theta_deg", thetas[g]);
    const auto pm = kraus_pair(theta);
    for (int branch = 0; branch < 3; ++branch) {
      State post = x;
      double prob = 1.0;
      if (branch < 2) {
        const auto br = apply_operator(x, pm.kraus(branch == 0 ? Outcome::zero : Outcome::one));
        prob = br.probability;
        post = br.state.normalized();
      } else {
        post = backaction_unconditional(x, theta);
      }
      const auto b = bloch_from_density(post);
      Rng rng = seeds.child({g, static_cast<std::uint64_t>(branch)}).engine();
      const auto tomo = state_tomography(make_projective_sampler(post, conf), shots, conf, rng);
      bloch.add({thetas[g], double(branch), prob, b.x, b.y, b.z, tomo.raw.x, tomo.std_error.x, tomo.raw.y,
                 tomo.std_error.y, tomo.raw.z, tomo.std_error.z});

      std::vector<Operator<double>> kraus;
      if (branch < 2) {
        kraus = {pm.kraus(branch == 0 ? Outcome::zero : Outcome::one)};
      } else {
        kraus = {pm.m0, pm.m1};
      }
      const Channel<double> ch = [kraus](const State& r) {
        Operator<double> out = Operator<double>::Zero();
        for (const auto& k : kraus) out += k * r.matrix() * k.adjoint();
        return State::from_matrix(out);
      };
      const auto res = process_tomography(ch, chi_from_kraus<double>(kraus),
                                          branch < 2 ? ChannelKind::trace_decreasing : ChannelKind::trace_preserving);
      proc.add({thetas[g], double(branch), res.trace, res.fidelity});
    }
  }
  w.write("backaction_bloch.csv", bloch);
  w.write("backaction_process.csv", proc);
}

void run_weakvalue(Params& p, const SeedPath& seeds, Writer& w, const RunOptions& o) {
  const double theta_deg = p.positive("theta_deg", 5.0);
  const double lo = p.number("phi_min_deg", 0.0);
  const double hi = p.number("phi_max_deg", 88.0);
  const std::size_t points = p.count("points", 89);
  const std::size_t trials = p.samples("trials", 100000);
  p.finish();
  const double theta = check_theta(p, "theta_deg", theta_deg);
  if (!(lo >= 0 && hi <= 180 && hi >= lo)) throw ConfigError("parameters.phi_max_deg: need 0 <= phi_min <= phi_max <= 180");

  const auto pm = kraus_pair(theta);
  CsvTable t{{"phi_deg", "weak_value", "modified_weak_value", "p0f", "p1f", "mc_modified_weak_value", "mc_se",
              "mc_postselected"},
             {}};
  const auto grid = points == 1 ? std::vector<double>{lo} : linspace(lo, hi, points);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    WeakValueSetup<double> s;
    s.theta = theta;
    s.phi = grid[g] * kDeg;
    const Pure f = postselection_state(s.phi);
    double wv = 0, wm = 0;
    try {
      wv = weak_value(s.psi_i, f).real();
      wm = modified_weak_value(s);
    } catch (const SingularWeakValue&) {
      throw ConfigError("parameters.phi_max_deg: post-selection orthogonal to the input at phi = " +
                        format_double(grid[g]) + " deg");
    }
    const auto jp = joint_probabilities(s);

    // Sampled: ancilla outcome, then projective post-selection on f.
    const State in = State::from_pure(s.psi_i);
    const double p0 = apply_operator(in, pm.m0).probability;
    const auto post0 = measure_partial(in, theta, Outcome::zero).post;
    const auto post1 = measure_partial(in, theta, Outcome::one).post;
    const double q0 = fidelity(post0, f), q1 = fidelity(post1, f);
    std::vector<std::array<std::size_t, 2>> counts(block_count(trials));
    for_each_block(trials, o.threads, [&](std::size_t b, std::size_t begin, std::size_t end) {
      Rng rng = seeds.child({g, b}).engine();
      std::uniform_real_distribution<double> u(0.0, 1.0);
      std::array<std::size_t, 2> c{};
      for (std::size_t i = begin; i < end; ++i) {
        const bool zero = u(rng) < p0;
        if (u(rng) < (zero ? q0 : q1)) ++c[zero ? 0 : 1];
      }
      counts[b] = c;
    });
    std::size_t n0 = 0, n1 = 0;
    for (const auto& c : counts) {
      n0 += c[0];
      n1 += c[1];
    }
    const std::size_t n = n0 + n1;
    double est = 0, se = 0;
    if (n > 0) {
      const double q = double(n0) / double(n);
      est = (2 * q - 1) / std::sin(theta);
      se = 2 * binomial_se(q, n) / std::sin(theta);
    }
    t.add({grid[g], wv, wm, jp.p0f, jp.p1f, est, se, double(n)});
  }
  w.write("weakvalue.csv", t);
}

void run_readout(Params& p, const SeedPath& seeds, Writer& w, const RunOptions& o) {
  const ReadoutModel m = readout_model_from(p);
  const std::size_t trials = p.samples("trials", 100000);
  p.finish();

  CsvTable q{{"mode", "fidelity_0", "fidelity_0_se", "fidelity_1", "fidelity_1_se", "fidelity_0_given_photon",
              "fidelity_0_given_photon_se", "average_fidelity", "average_fidelity_se", "fidelity_0_exact"},
             {}};
  // mode: 0 conventional, 1 dynamical stop.
  for (const auto mode : {ReadoutMode::conventional, ReadoutMode::dynamical_stop}) {
    const auto k = static_cast<std::uint64_t>(mode);
    const auto r = qnd_fidelity(m, mode, trials, seeds.child(k), o.threads);
    const double ex = mode == ReadoutMode::conventional ? exact::conventional_fidelity_0(m)
                                                        : exact::dynamical_stop_fidelity_0(m);
    q.add({double(k), r.fidelity_0.value, r.fidelity_0.std_error, r.fidelity_1.value, r.fidelity_1.std_error,
           r.fidelity_0_given_photon.value, r.fidelity_0_given_photon.std_error, r.average_fidelity.value,
           r.average_fidelity.std_error, ex});
  }
  w.write("readout_qnd.csv", q);

  const auto out = readout_outcome_fidelity(m, trials, seeds.child(2), o.threads);
  CsvTable c{{"bright_given_0", "bright_given_0_se", "dark_given_1", "dark_given_1_se", "bright_given_0_exact",
              "dark_given_1_exact", "p_det", "p_flip", "p_dark", "kappa", "c_floor"},
             {}};
  c.add({out.bright_given_0.value, out.bright_given_0.std_error, out.dark_given_1.value, out.dark_given_1.std_error,
         exact::bright_given_0(m), exact::dark_given_1(m), m.p_det, m.p_flip, m.p_dark, m.kappa, m.c_floor});
  w.write("readout_outcome.csv", c);
}

void run_coherence(Params& p, const SeedPath& seeds, Writer& w, const RunOptions& o) {
  const ReadoutModel m = readout_model_from(p);
  const std::size_t trials = p.samples("trials", 100000);
  const double t_max = p.positive("t_max_s", m.duration());
  const std::size_t points = p.count("points", static_cast<std::size_t>(m.max_bins) + 1);
  const std::int64_t electron_in = p.integer("electron_in", 0);
  p.finish();
  if (t_max > m.duration() + 1e-15) throw ConfigError("parameters.t_max_s: exceeds the readout window");
  if (electron_in != 0 && electron_in != 1) throw ConfigError("parameters.electron_in: 0 (bright) or 1 (dark)");

  const auto grid = points == 1 ? std::vector<double>{t_max} : linspace(0.0, t_max, points);
  CsvTable t{{"time_s", "mode", "fidelity_x", "fidelity_x_se", "fidelity_z", "fidelity_x_exact"}, {}};
  for (const auto mode : {ReadoutMode::conventional, ReadoutMode::dynamical_stop}) {
    const auto k = static_cast<std::uint64_t>(mode);
    const auto curve =
        nuclear_coherence_curve(m, mode, grid, trials, seeds.child(k), o.threads, static_cast<int>(electron_in));
    for (const auto& pt : curve) {
      const int bins = static_cast<int>(std::floor(pt.time / m.bin_duration + 1e-9));
      const double ex =
          electron_in == 0 ? (1 + exact::mean_coherence(m, mode, bins)) / 2 : pt.fidelity_x.value;
      t.add({pt.time, double(k), pt.fidelity_x.value, pt.fidelity_x.std_error, pt.fidelity_z, ex});
    }
  }
  w.write("coherence.csv", t);
}

void run_feedback(Params& p, const SeedPath& seeds, Writer& w, const RunOptions& o) {
  ProtocolConfig cfg;
  cfg.seed = seeds.child(0).engine()();
  cfg.theta1 = check_theta(p, "theta1_deg", p.positive("theta1_deg", 30.0));
  cfg.trials = p.samples("trials", 100000);
  cfg.reset_until_success = p.flag("reset_until_success", false);
  cfg.max_rounds = static_cast<int>(p.count("max_rounds", 8));
  const bool noisy = p.flag("noise", true);
  auto budgets = p.list("budgets_us", {1, 2, 3, 4, 5, 7, 10, 15, 20, 25, 30, 40, 50, 60, 80, 100});
  const auto theta_grid = p.list("theta_grid_deg", {5, 10, 15, 20, 25, 30, 35, 40, 45, 50, 55, 60, 65, 70, 75, 80, 85, 90});
  const std::size_t ideal_trials = p.samples("ideal_trials", 20000);
  NoiseModel noise;
  if (noisy) {
    noise.readout = readout_model_from(p);
    noise.electron_init_fidelity = p.number("electron_init_fidelity", noise.electron_init_fidelity);
    noise.nuclear_init_fidelity = p.number("nuclear_init_fidelity", noise.nuclear_init_fidelity);
    noise.nuclear_t2star = p.positive("nuclear_t2star_s", noise.nuclear_t2star);
    try {
      noise.validate();
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("parameters: ") + e.what());
    }
    cfg.noise = noise;
  }
  p.finish();
  if (cfg.theta1 <= 0) throw ConfigError("parameters.theta1_deg: must be positive");

  for (auto& b : budgets) {
    if (!(b > 0)) throw ConfigError("parameters.budgets_us: budgets must be positive");
    b *= 1e-6;
  }
  const auto curve = sweep_vs_readout_time(cfg, budgets, o.threads);
  CsvTable s{{"budget_s", "herald_probability", "herald_probability_se", "heralded_fidelity", "heralded_fidelity_se",
              "single_success_probability", "single_success_probability_se", "single_fidelity_success",
              "single_fidelity_success_se", "single_fidelity_failure", "single_fidelity_failure_se",
              "postselection_bound", "postselection_bound_se", "mean_readout_time_s"},
             {}};
  for (const auto& pt : curve.points) {
    s.add({pt.budget, pt.herald_probability.value, pt.herald_probability.std_error, pt.heralded_fidelity.value,
           pt.heralded_fidelity.std_error, pt.single_success_probability.value,
           pt.single_success_probability.std_error, pt.single_fidelity_success.value,
           pt.single_fidelity_success.std_error, pt.single_fidelity_failure.value,
           pt.single_fidelity_failure.std_error, pt.postselection_bound.value, pt.postselection_bound.std_error,
           pt.mean_readout_time});
  }
  w.write("feedback_sweep.csv", s);

  // Ideal protocol against theta1: exact enumeration, the printed closed
  // form and a Monte Carlo estimate.
  CsvTable th{{"theta1_deg", "theta2_deg", "p_herald_exact", "p_herald_printed", "p_herald_mc", "p_herald_mc_se",
               "postselection_bound_ideal"},
              {}};
  for (std::size_t g = 0; g < theta_grid.size(); ++g) {
    const double t1 = check_theta(p, "theta_grid_deg", theta_grid[g]);
    if (t1 <= 0) throw ConfigError("parameters.theta_grid_deg: angles must be positive");
    const auto ex = success_probability_exact(t1);
    ProtocolConfig ideal;
    ideal.theta1 = t1;
    ideal.trials = ideal_trials;
    const auto st = run_trials(ideal, seeds.child({1000, g}), true, o.threads);
    th.add({theta_grid[g], theta2_of_theta1(t1) / kDeg, ex.p_herald, ex.printed_formula, st.herald_probability.value,
            st.herald_probability.std_error, postselection_bound(t1, ex.p_herald)});
  }
  w.write("feedback_theta.csv", th);
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  ExperimentConfig c;
  for (const auto& [k, v] : j.items()) {
    if (k != "experiment" && k != "parameters" && k != "seed" && k != "output") {
      throw ConfigError("config: unknown key '" + k + "'");
    }
  }
  if (!j.contains("experiment") || !j.at("experiment").is_string()) {
    throw ConfigError("config.experiment: required string");
  }
  c.experiment = j.at("experiment").get<std::string>();
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), c.experiment) == names.end()) {
    throw ConfigError("config.experiment: unknown experiment '" + c.experiment + "'");
  }
  if (j.contains("parameters")) {
    if (!j.at("parameters").is_object()) throw ConfigError("config.parameters: expected an object");
    c.parameters = j.at("parameters");
  }
  if (j.contains("seed")) {
    const auto& sd = j.at("seed");
    if (!sd.is_number_integer() || (!sd.is_number_unsigned() && sd.get<std::int64_t>() < 0)) throw ConfigError("config.seed: expected a non-negative integer");
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("output")) {
    if (!j.at("output").is_string()) throw ConfigError("config.output: expected a path string");
    c.output = j.at("output").get<std::string>();
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& file) {
  std::ifstream f(file);
  if (!f) throw ConfigError("config: cannot open " + file.string());
  json j;
  try {
    j = json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + file.string() + ": " + e.what());
  }
  return from_json(j);
}

json ExperimentConfig::to_json() const {
  return {{"experiment", experiment}, {"parameters", parameters}, {"seed", seed}, {"output", output.string()}};
}

json RunManifest::to_json() const {
  return {{"config", config},   {"seed", seed}, {"version", version}, {"outputs", outputs},
          {"wall_seconds", wall_seconds}};
}

RunManifest run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  RunOptions opts = options;
  if (opts.threads == 0) opts.threads = 1;
  Params p(config.parameters, "parameters", opts);
  RunManifest man;
  man.seed = config.seed;
  man.version = WEAKMEAS_VERSION;
  Writer w(config.output, man.outputs);
  const SeedPath seeds = SeedPath(config.seed).child(experiment_index(config.experiment));

  const std::string& e = config.experiment;
  if (e == "fringe") run_fringe(p, seeds, w, opts);
  else if (e == "backaction") run_backaction(p, seeds, w, opts);
  else if (e == "weakvalue") run_weakvalue(p, seeds, w, opts);
  else if (e == "readout") run_readout(p, seeds, w, opts);
  else if (e == "coherence") run_coherence(p, seeds, w, opts);
  else if (e == "feedback") run_feedback(p, seeds, w, opts);
  else throw ConfigError("config.experiment: unknown experiment '" + e + "'");

  ExperimentConfig echo = config;
  echo.parameters = p.resolved();
  man.config = echo.to_json();
  man.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ofstream f(config.output / "manifest.json");
  f << man.to_json().dump(2) << '\n';
  if (!f) throw Error("write failed: " + (config.output / "manifest.json").string());
  return man;
}

ReadoutTargets readout_targets_from_json(const json& j) {
  const RunOptions none;
  Params p(j, "targets", none);
  ReadoutTargets t;
  t.bright_given_0 = p.number("bright_given_0", t.bright_given_0);
  t.dark_given_1 = p.number("dark_given_1", t.dark_given_1);
  t.conventional_fidelity_0 = p.number("conventional_fidelity_0", t.conventional_fidelity_0);
  t.dynamical_stop_fidelity_0 = p.number("dynamical_stop_fidelity_0", t.dynamical_stop_fidelity_0);
  t.saturation_fidelity_x = p.number("saturation_fidelity_x", t.saturation_fidelity_x);
  t.conventional_fidelity_x = p.number("conventional_fidelity_x", t.conventional_fidelity_x);
  t.half_coherence_time = p.positive("half_coherence_time_s", t.half_coherence_time);
  t.bin_duration = p.positive("bin_duration_s", t.bin_duration);
  t.max_bins = static_cast<int>(p.count("max_bins", static_cast<std::size_t>(t.max_bins)));
  p.finish();
  return t;
}

json run_calibration(const ReadoutTargets& targets, const std::filesystem::path& out) {
  const auto cal = calibrate_readout(targets);
  const auto& m = cal.model;
  json residuals = json::array();
  for (const auto& r : cal.residuals) residuals.push_back({{"name", r.name}, {"target", r.target}, {"achieved", r.achieved}});
  const json j{{"model",
                {{"bin_duration_s", m.bin_duration},
                 {"max_bins", m.max_bins},
                 {"p_det", m.p_det},
                 {"p_flip", m.p_flip},
                 {"p_dark", m.p_dark},
                 {"kappa", m.kappa},
                 {"c_floor", m.c_floor}}},
               {"residuals", residuals},
               {"version", WEAKMEAS_VERSION}};
  std::filesystem::create_directories(out);
  std::ofstream f(out / "calibration.json");
  f << j.dump(2) << '\n';
  if (!f) throw Error("write failed: " + (out / "calibration.json").string());
  return j;
}

}  // namespace weakmeas
