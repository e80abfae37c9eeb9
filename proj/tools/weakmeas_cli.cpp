// weakmeas: run experiments, verify acceptance criteria, calibrate readout.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>

#include "weakmeas/acceptance.hpp"
#include "weakmeas/errors.hpp"
#include "weakmeas/experiments.hpp"
#include "weakmeas/random.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

enum Exit { kOk = 0, kCriteriaFailed = 1, kConfig = 2, kInfeasible = 3, kError = 4 };

json load_json(const fs::path& p) {
  std::ifstream f(p);
  if (!f) throw weakmeas::ConfigError("cannot open " + p.string());
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw weakmeas::ConfigError(p.string() + ": " + e.what());
  }
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  unsigned threads = weakmeas::default_thread_count();
  std::optional<std::size_t> trials_override;
};

void add_common(CLI::App* app, Common& c, bool config_required) {
  auto* opt = app->add_option("--config", c.config, "JSON config file");
  if (config_required) opt->required();
  opt->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "Master seed (overrides the config)");
  app->add_option("--out", c.out, "Output directory (overrides the config)");
  app->add_option("--threads", c.threads, "Worker threads (default: $WEAKMEAS_THREADS or 1)")
      ->check(CLI::PositiveNumber);
  app->add_option("--trials-override", c.trials_override, "Replace every Monte Carlo sample count");
}

int cmd_run(const Common& c) {
  auto cfg = weakmeas::ExperimentConfig::load(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.output = c.out;
  const auto man = weakmeas::run_experiment(cfg, {c.threads, c.trials_override});
  std::cout << "experiment " << cfg.experiment << " (seed " << man.seed << ") wrote";
  for (const auto& f : man.outputs) std::cout << " " << f;
  std::cout << " and manifest.json to " << cfg.output.string() << " in " << man.wall_seconds << " s\n";
  return kOk;
}

int cmd_verify(const Common& c, double theta2_offset_deg, const std::vector<int>& only) {
  weakmeas::AcceptanceOptions opts;
  if (!c.config.empty()) {
    const json j = load_json(c.config);
    if (!j.is_object()) throw weakmeas::ConfigError("verify config: expected a JSON object");
    for (const auto& [k, v] : j.items()) {
      try {
        if (k == "trials") {
          if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
            throw weakmeas::ConfigError("verify config.trials: expected a non-negative integer");
          }
          opts.trials = v.get<std::size_t>();
        } else if (k == "seed") {
          opts.seed = v.get<std::uint64_t>();
        } else if (k == "theta2_offset_deg") {
          theta2_offset_deg += v.get<double>();
        } else if (k == "only") {
          opts.only = v.get<std::vector<int>>();
        } else {
          throw weakmeas::ConfigError("verify config: unknown key '" + k + "'");
        }
      } catch (const json::exception&) {
        throw weakmeas::ConfigError("verify config." + k + ": wrong type");
      }
    }
  }
  if (c.seed) opts.seed = *c.seed;
  if (c.trials_override) opts.trials = *c.trials_override;
  if (!only.empty()) opts.only = only;
  opts.threads = c.threads;
  opts.theta2_offset = theta2_offset_deg * std::numbers::pi / 180.0;
  opts.validate();

  bool ok = true;
  json report = json::array();
  const auto results = weakmeas::run_acceptance(opts, [&](const weakmeas::CriterionResult& r) {
    weakmeas::print_result(std::cout, r);
    std::cout.flush();
    ok = ok && r.pass();
  });
  for (const auto& r : results) {
    json checks = json::array();
    for (const auto& k : r.checks) {
      checks.push_back({{"label", k.label},
                        {"measured", k.measured},
                        {"target", k.target},
                        {"tolerance", k.tolerance},
                        {"pass", k.pass}});
    }
    report.push_back({{"criterion", r.id}, {"title", r.title}, {"pass", r.pass()}, {"checks", checks},
                      {"notes", r.notes}});
  }
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    std::ofstream f(fs::path(c.out) / "verify.json");
    f << json{{"seed", opts.seed}, {"trials", opts.trials}, {"criteria", report}}.dump(2) << '\n';
  }
  std::cout << (ok ? "ALL CRITERIA PASS" : "SOME CRITERIA FAIL") << "\n";
  return ok ? kOk : kCriteriaFailed;
}

int cmd_calibrate(const Common& c) {
  weakmeas::ReadoutTargets targets;
  if (!c.config.empty()) targets = weakmeas::readout_targets_from_json(load_json(c.config));
  const fs::path out = c.out.empty() ? fs::path("out") : fs::path(c.out);
  const json j = weakmeas::run_calibration(targets, out);
  std::cout << j.dump(2) << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Partial-measurement and measurement-only feedback simulator"};
  app.set_version_flag("--version", std::string(WEAKMEAS_VERSION));
  app.require_subcommand(1);

  Common run_opts, verify_opts, cal_opts;
  auto* run = app.add_subcommand("run", "Run one experiment from a JSON config");
  add_common(run, run_opts, true);

  auto* verify = app.add_subcommand("verify", "Run the acceptance criteria");
  add_common(verify, verify_opts, false);
  double theta2_offset_deg = 0.0;
  std::vector<int> only;
  verify->add_option("--theta2-offset-deg", theta2_offset_deg, "Perturb the second measurement strength");
  verify->add_option("--only", only, "Criterion ids to run");

  auto* cal = app.add_subcommand("calibrate", "Fit the readout model to target fidelities");
  add_common(cal, cal_opts, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(run_opts);
    if (*verify) return cmd_verify(verify_opts, theta2_offset_deg, only);
    if (*cal) return cmd_calibrate(cal_opts);
  } catch (const weakmeas::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const weakmeas::InfeasibleTargets& e) {
    std::cerr << "infeasible targets: " << e.what() << "\n";
    return kInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kError;
  }
  return kError;
}
