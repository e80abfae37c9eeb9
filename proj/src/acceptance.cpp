#include "weakmeas/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "weakmeas/errors.hpp"
#include "weakmeas/feedback.hpp"
#include "weakmeas/fringe.hpp"
#include "weakmeas/partial_measurement.hpp"
#include "weakmeas/readout.hpp"
#include "weakmeas/tomography.hpp"

namespace weakmeas {

bool CriterionResult::pass() const {
  return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

void AcceptanceOptions::validate() const {
  if (trials == 0) throw ConfigError("verify: trials must be a positive integer");
  for (const int id : only)
    if (id < 1 || id > 10) throw ConfigError("verify: criterion ids run from 1 to 10");
  if (!std::isfinite(theta2_offset)) throw ConfigError("verify: theta2 offset must be finite");
}

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

Check within(std::string label, double measured, double target, double tol) {
  return {std::move(label), measured, target, tol, Relation::within, std::abs(measured - target) <= tol};
}

Check at_most(std::string label, double measured, double limit) {
  return {std::move(label), measured, limit, 0.0, Relation::at_most, measured <= limit};
}

Check at_least(std::string label, double measured, double limit) {
  return {std::move(label), measured, limit, 0.0, Relation::at_least, measured >= limit};
}

std::string fmt(double v, int prec = 6) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

using Psi = PureState<double>;

Psi random_pure(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Psi(Complex<double>(n(rng), n(rng)), Complex<double>(n(rng), n(rng)));
}

BlochVector<double> random_ball(Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (;;) {
    const BlochVector<double> b{u(rng), u(rng), u(rng)};
    if (b.norm() <= 1.0) return b;
  }
}

// ---------------------------------------------------------------------------

CriterionResult kraus_completeness(const AcceptanceOptions& o) {
  CriterionResult r{1, "Kraus completeness and conditional purity", {}, {}};
  double completeness = 0.0, purity = 0.0;
  Rng rng = SeedPath(o.seed).child(1).engine();
  std::vector<Psi> inputs;
  for (int i = 0; i < 100; ++i) inputs.push_back(random_pure(rng));
  for (int d = 0; d <= 90; ++d) {
    const auto pm = kraus_pair(d * kDeg);
    const Operator<double> sum = pm.m0.adjoint() * pm.m0 + pm.m1.adjoint() * pm.m1;
    completeness = std::max(completeness, (sum - Operator<double>::Identity()).cwiseAbs().maxCoeff());
    for (const auto& psi : inputs) {
      for (const Outcome k : {Outcome::zero, Outcome::one}) {
        const auto post = measure_partial(State::from_pure(psi), d * kDeg, k).post;
        purity = std::max(purity, std::abs(bloch_from_density(post).norm() - 1.0));
      }
    }
  }
  r.checks.push_back(within("max |sum M^dag M - I|, theta 0..90 deg", completeness, 0.0, 1e-12));
  r.checks.push_back(within("max |Bloch norm - 1|, 100 random pure inputs", purity, 0.0, 1e-9));
  return r;
}

CriterionResult dephasing_law(const AcceptanceOptions& o) {
  CriterionResult r{2, "Unconditional backaction is dephasing by cos(theta)", {}, {}};
  Rng rng = SeedPath(o.seed).child(2).engine();
  double err = 0.0;
  for (int i = 0; i < 20; ++i) {
    const auto in = random_ball(rng);
    const State rho = density_from_bloch(in);
    for (int d = 0; d <= 90; ++d) {
      const double c = std::cos(d * kDeg);
      const auto out = bloch_from_density(backaction_unconditional(rho, d * kDeg));
      err = std::max({err, std::abs(out.x - in.x * c), std::abs(out.y - in.y * c), std::abs(out.z - in.z)});
    }
  }
  r.checks.push_back(within("max deviation from (x cos, y cos, z)", err, 0.0, 1e-12));
  return r;
}

CriterionResult strength_map(const AcceptanceOptions&) {
  CriterionResult r{3, "Gate strength at 229 ns", {}, {}};
  const double theta = strength_from_tau({kHyperfineCoupling, 229e-9});
  r.checks.push_back(within("theta(229 ns) [deg]", theta / kDeg, 90.0, 0.1));
  return r;
}

CriterionResult steering_identity(const AcceptanceOptions& o) {
  CriterionResult r{4, "Second measurement converts the mirror branch to the target", {}, {}};
  double infid = 0.0, tan_err = 0.0;
  for (int d = 1; d < 90; ++d) {
    const double t1 = d * kDeg;
    const double t2 = theta2_of_theta1(t1) + o.theta2_offset;
    tan_err = std::max(tan_err, std::abs(std::tan(t2 / 2) - std::sin(t1)));
    const auto post = measure_partial(State::from_pure(wrong_state(t1)), std::clamp(t2, 0.0, std::numbers::pi / 2),
                                      Outcome::zero)
                          .post;
    infid = std::max(infid, std::abs(1.0 - fidelity(post, target_state(t1))));
  }
  r.checks.push_back(within("max |1 - F(success branch, target)|, theta1 1..89 deg", infid, 0.0, 1e-10));
  r.checks.push_back(within("max |tan(theta2/2) - sin(theta1)|", tan_err, 0.0, 1e-12));
  if (o.theta2_offset != 0.0) r.notes.push_back("theta2 offset applied: " + fmt(o.theta2_offset / kDeg) + " deg");
  return r;
}

CriterionResult herald_statistics(const AcceptanceOptions& o) {
  CriterionResult r{5, "Herald frequency of the ideal protocol", {}, {}};
  std::uint64_t g = 0;
  for (const int d : {10, 30, 60, 90}) {
    ProtocolConfig cfg;
    cfg.theta1 = d * kDeg;
    cfg.trials = o.trials;
    const auto s = run_trials(cfg, SeedPath(o.seed).child({5, g++}), true, o.threads);
    const double p = success_probability_exact(cfg.theta1).p_herald;
    const double z = std::abs(s.herald_probability.value - p) / binomial_se(p, o.trials);
    r.checks.push_back(at_most("|MC - exact| / sigma at theta1 = " + std::to_string(d) + " deg", z, 5.0));
  }
  const auto e90 = success_probability_exact(std::numbers::pi / 2);
  r.checks.push_back(within("exact herald probability at 90 deg", e90.p_herald, 0.5, 0.005));
  r.checks.push_back(within("(1 + cos theta1)/2 at 90 deg", e90.printed_formula, 0.5, 0.005));
  for (const int d : {10, 30, 60}) {
    const auto e = success_probability_exact(d * kDeg);
    r.notes.push_back("theta1 = " + std::to_string(d) + " deg: exact " + fmt(e.p_herald) + ", (1 + cos theta1)/2 = " +
                      fmt(e.printed_formula) + ", difference " + fmt(e.printed_formula - e.p_herald));
  }
  return r;
}

CriterionResult weak_values(const AcceptanceOptions&) {
  CriterionResult r{6, "Modified weak value", {}, {}};
  WeakValueSetup<double> s;
  s.theta = 5 * kDeg;
  s.phi = 85 * kDeg;
  const double wm = modified_weak_value(s);
  r.checks.push_back(within("W_m(5 deg, 85 deg) vs 1/sin(5 deg)", wm, 1.0 / std::sin(5 * kDeg), 1e-9));
  r.checks.push_back(within("W_m(5 deg, 85 deg) vs measured 10 +- 3", wm, 10.0, 3.0));
  double worst = 0.0;
  for (const double theta : {1e-3, 5e-4, 1e-4}) {
    for (int d = 0; d <= 80; ++d) {
      WeakValueSetup<double> w;
      w.theta = theta;
      w.phi = d * kDeg;
      const double wv = weak_value(w.psi_i, postselection_state(w.phi)).real();
      worst = std::max(worst, std::abs(modified_weak_value(w) - wv) / (2 * theta));
    }
  }
  r.checks.push_back(at_most("max |W_m - W| / (2 theta), theta <= 1e-3, phi <= 80 deg", worst, 1.0));
  return r;
}

CriterionResult readout_calibration(const AcceptanceOptions& o) {
  CriterionResult r{7, "Calibrated readout reproduces the measured fidelities", {}, {}};
  const ReadoutModel m = ReadoutModel::calibrated();
  const SeedPath root = SeedPath(o.seed).child(7);
  const auto conv = qnd_fidelity(m, ReadoutMode::conventional, o.trials, root.child(0), o.threads);
  const auto dyn = qnd_fidelity(m, ReadoutMode::dynamical_stop, o.trials, root.child(1), o.threads);
  const auto out = readout_outcome_fidelity(m, o.trials, root.child(2), o.threads);
  r.checks.push_back(within("post-readout F(|0>), conventional", conv.fidelity_0.value, 0.18, 0.02));
  r.checks.push_back(within("post-readout F(|0>), dynamical stop", dyn.fidelity_0.value, 0.86, 0.02));
  // Quoted as 1.00: the residual comes from dark counts after a flip.
  r.checks.push_back(within("post-readout F(|0> | photon), dynamical stop", dyn.fidelity_0_given_photon.value, 1.0,
                            0.005));
  r.checks.push_back(within("post-readout F(|1>), dynamical stop", dyn.fidelity_1.value, 0.996, 0.006));
  r.checks.push_back(within("average post-readout fidelity, dynamical stop", dyn.average_fidelity.value, 0.93, 0.01));
  r.checks.push_back(within("outcome fidelity |0>", out.bright_given_0.value, 0.853, 0.01));
  r.checks.push_back(within("outcome fidelity |1>", out.dark_given_1.value, 0.986, 0.005));

  const std::vector<double> t25{25e-6}, tend{m.duration()};
  const auto c25 = nuclear_coherence_curve(m, ReadoutMode::conventional, t25, o.trials, root.child(3), o.threads);
  const auto sat = nuclear_coherence_curve(m, ReadoutMode::dynamical_stop, tend, o.trials, root.child(4), o.threads);
  r.checks.push_back(within("nuclear F(|x>) after 25 us conventional", c25[0].fidelity_x.value, 0.5, 0.03));
  r.checks.push_back(within("nuclear F(|x>) saturation, dynamical stop", sat[0].fidelity_x.value, 0.615, 0.01));
  r.notes.push_back("model: p_det " + fmt(m.p_det) + ", p_flip " + fmt(m.p_flip) + ", p_dark " + fmt(m.p_dark) +
                    ", kappa " + fmt(m.kappa) + ", c_floor " + fmt(m.c_floor));
  return r;
}

CriterionResult feedback_vs_postselection(const AcceptanceOptions& o) {
  CriterionResult r{8, "Feedback beats the post-selection bound; herald rate plateaus", {}, {}};
  ProtocolConfig cfg;
  cfg.theta1 = 30 * kDeg;
  cfg.noise = NoiseModel{};
  cfg.trials = o.trials;
  cfg.seed = SeedPath(o.seed).child(8).engine()();
  std::vector<double> budgets;
  for (const double us : {1, 2, 3, 4, 5, 7, 10, 15, 20, 25, 30, 40, 50, 60, 80, 100}) budgets.push_back(us * 1e-6);
  const auto curve = sweep_vs_readout_time(cfg, budgets, o.threads);
  double worst_z = std::numeric_limits<double>::infinity();
  double worst_budget = 0;
  for (const auto& pt : curve.points) {
    const double sigma = std::hypot(pt.heralded_fidelity.std_error, pt.postselection_bound.std_error);
    const double z = (pt.heralded_fidelity.value - pt.postselection_bound.value) / sigma;
    if (z < worst_z) {
      worst_z = z;
      worst_budget = pt.budget;
    }
    r.notes.push_back("budget " + fmt(pt.budget * 1e6) + " us: F_fb " + fmt(pt.heralded_fidelity.value, 5) + " +- " +
                      fmt(pt.heralded_fidelity.std_error, 2) + ", bound " + fmt(pt.postselection_bound.value, 5) +
                      " +- " + fmt(pt.postselection_bound.std_error, 2) + ", herald " +
                      fmt(pt.herald_probability.value, 4));
  }
  r.checks.push_back(at_least("min (F_fb - bound)/sigma over budgets (worst at " + fmt(worst_budget * 1e6) + " us)",
                              worst_z, -3.0));
  const double p_end = curve.points.back().herald_probability.value;
  double spread = 0.0;
  for (const auto& pt : curve.points)
    if (pt.budget > 25e-6) spread = std::max(spread, std::abs(pt.herald_probability.value - p_end) / p_end);
  r.checks.push_back(at_most("max relative herald-rate change for budgets > 25 us", spread, 0.05));
  return r;
}

CriterionResult process_tomography_oracle(const AcceptanceOptions&) {
  CriterionResult r{9, "Process tomography matches the analytic chi", {}, {}};
  double worst_u = 0.0, worst_c = 0.0;
  for (int d = 0; d <= 90; d += 5) {
    const double theta = d * kDeg;
    const auto pm = kraus_pair(theta);
    const std::vector<Operator<double>> both{pm.m0, pm.m1};
    const auto u = process_tomography<double>([theta](const State& s) { return backaction_unconditional(s, theta); },
                                              chi_from_kraus<double>(both), ChannelKind::trace_preserving);
    worst_u = std::max(worst_u, std::abs(1.0 - u.fidelity));
    for (const Outcome k : {Outcome::zero, Outcome::one}) {
      const Operator<double> kk = pm.kraus(k);
      const std::vector<Operator<double>> one{kk};
      const auto c = process_tomography<double>(
          [kk](const State& s) { return State::from_matrix(kk * s.matrix() * kk.adjoint()); },
          chi_from_kraus<double>(one), ChannelKind::trace_decreasing);
      worst_c = std::max(worst_c, std::abs(1.0 - c.fidelity));
    }
  }
  r.checks.push_back(within("max |1 - F_process|, unconditional, theta 0..90 deg", worst_u, 0.0, 1e-9));
  r.checks.push_back(within("max |1 - F_process|, conditional, theta 0..90 deg", worst_c, 0.0, 1e-9));
  return r;
}

CriterionResult fringe_round_trip(const AcceptanceOptions& o) {
  CriterionResult r{10, "Fringe fit recovers A and T2* within 3 sigma", {}, {}};
  const FringeModel truth;
  const auto taus = linspace(0.0, 4e-6, 100);
  int passes = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng rng = SeedPath(o.seed).child({10, s}).engine();
    const auto fit = fit_fringe(generate_fringe_data(truth, taus, 500, rng));
    const double za = std::abs(fit.params.coupling - truth.coupling) / fit.std_errors.coupling;
    const double zt = std::abs(fit.params.t2star - truth.t2star) / fit.std_errors.t2star;
    const bool ok = fit.converged && za <= 3.0 && zt <= 3.0;
    passes += ok;
    if (!ok) r.notes.push_back("seed " + std::to_string(s) + ": z_A " + fmt(za, 3) + ", z_T2 " + fmt(zt, 3));
  }
  r.checks.push_back(at_least("seeds with both parameters inside 3 sigma (of 20)", passes, 19));
  return r;
}

}  // namespace

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts,
                                            const std::function<void(const CriterionResult&)>& on_result) {
  opts.validate();
  using Fn = CriterionResult (*)(const AcceptanceOptions&);
  const Fn all[] = {kraus_completeness, dephasing_law,       strength_map,
                    steering_identity,  herald_statistics,   weak_values,
                    readout_calibration, feedback_vs_postselection, process_tomography_oracle,
                    fringe_round_trip};
  std::vector<CriterionResult> out;
  for (int id = 1; id <= 10; ++id) {
    if (!opts.only.empty() && std::find(opts.only.begin(), opts.only.end(), id) == opts.only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    CriterionResult r;
    try {
      r = all[id - 1](opts);
    } catch (const std::exception& e) {
      // A throwing criterion fails rather than aborting the suite.
      r = CriterionResult{id, "criterion " + std::to_string(id), {}, {}};
      r.checks.push_back({std::string("exception: ") + e.what(), 0, 0, 0, Relation::within, false});
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (on_result) on_result(r);
    out.push_back(std::move(r));
  }
  return out;
}

void print_result(std::ostream& os, const CriterionResult& r) {
  std::size_t ok = 0;
  for (const auto& c : r.checks) ok += c.pass;
  os << (r.pass() ? "PASS" : "FAIL") << "  criterion " << r.id << ": " << r.title << " (" << ok << "/"
     << r.checks.size() << " checks, " << fmt(r.seconds, 3) << " s)\n";
  for (const auto& c : r.checks) {
    os << "      " << (c.pass ? "ok  " : "FAIL") << " " << c.label << ": " << fmt(c.measured, 8);
    switch (c.relation) {
      case Relation::within:
        os << " (target " << fmt(c.target, 8) << " +- " << fmt(c.tolerance, 3) << ")";
        break;
      case Relation::at_most:
        os << " (limit <= " << fmt(c.target) << ")";
        break;
      case Relation::at_least:
        os << " (limit >= " << fmt(c.target) << ")";
        break;
    }
    os << "\n";
  }
  for (const auto& n : r.notes) os << "      note: " << n << "\n";
}

}  // namespace weakmeas
