#include "weakmeas/experiments.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "weakmeas/acceptance.hpp"
#include "weakmeas/errors.hpp"

using namespace weakmeas;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("weakmeas_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

std::vector<std::vector<double>> read_rows(const fs::path& p, std::vector<std::string>* header = nullptr) {
  std::ifstream f(p);
  std::string line;
  std::getline(f, line);
  if (header) {
    std::stringstream hs(line);
    for (std::string c; std::getline(hs, c, ',');) header->push_back(c);
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(f, line)) {
    std::stringstream ls(line);
    std::vector<double> row;
    for (std::string c; std::getline(ls, c, ',');) row.push_back(std::stod(c));
    rows.push_back(row);
  }
  return rows;
}

ExperimentConfig config(const std::string& experiment, json params, const fs::path& out) {
  return ExperimentConfig::from_json(
      {{"experiment", experiment}, {"parameters", std::move(params)}, {"seed", 7}, {"output", out.string()}});
}

}  // namespace

TEST(FormatDouble, RoundTripsExactly) {
  for (const double v : {0.1, 1.0 / 3.0, 1e-300, 12345.678, -2.5e-7}) EXPECT_EQ(std::stod(format_double(v)), v);
  EXPECT_EQ(format_double(-0.0), "0");
}

TEST(CsvTable, SchemaChecked) {
  CsvTable t{{"a", "b"}, {}};
  t.add({1, 2});
  EXPECT_NO_THROW(t.check());
  EXPECT_EQ(t.str(), "a,b\n1,2\n");
  t.add({1});
  EXPECT_THROW(t.check(), Error);
  CsvTable nan{{"a"}, {{std::numeric_limits<double>::quiet_NaN()}}};
  EXPECT_THROW(nan.check(), Error);
  CsvTable dup{{"a", "a"}, {}};
  EXPECT_THROW(dup.check(), Error);
}

TEST(ExperimentConfig, RejectsUnknownKeysAndExperiments) {
  EXPECT_THROW(ExperimentConfig::from_json({{"experiment", "fringe"}, {"colour", 1}}), ConfigError);
  EXPECT_THROW(ExperimentConfig::from_json({{"experiment", "teleport"}}), ConfigError);
  EXPECT_THROW(ExperimentConfig::from_json({{"parameters", json::object()}}), ConfigError);
  EXPECT_THROW(ExperimentConfig::from_json({{"experiment", "fringe"}, {"seed", -1}}), ConfigError);
  const auto out = scratch("unknown_param");
  try {
    run_experiment(config("fringe", {{"shotz", 10}}, out));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("shotz"), std::string::npos);
  }
  EXPECT_FALSE(fs::exists(out / "manifest.json"));
}

TEST(ExperimentConfig, ZeroTrialsRejected) {
  const auto out = scratch("zero");
  EXPECT_THROW(run_experiment(config("readout", {{"trials", 0}}, out)), ConfigError);
  RunOptions o;
  o.trials_override = 0;
  EXPECT_THROW(run_experiment(config("readout", json::object(), out), o), ConfigError);
}

TEST(RunExperiment, ByteIdenticalAcrossRunsAndThreadCounts) {
  const auto a = scratch("det_a"), b = scratch("det_b");
  RunOptions one{1, 5000}, four{4, 5000};
  const auto ma = run_experiment(config("coherence", json::object(), a), one);
  const auto mb = run_experiment(config("coherence", json::object(), b), four);
  ASSERT_EQ(ma.outputs, mb.outputs);
  for (const auto& f : ma.outputs) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  EXPECT_EQ(ma.config.at("parameters"), mb.config.at("parameters"));
}

TEST(RunExperiment, SeedChangesOutput) {
  const auto a = scratch("seed_a"), b = scratch("seed_b");
  auto ca = config("readout", {{"trials", 5000}}, a);
  auto cb = ca;
  cb.seed = 8;
  cb.output = b;
  run_experiment(ca);
  run_experiment(cb);
  EXPECT_NE(slurp(a / "readout_qnd.csv"), slurp(b / "readout_qnd.csv"));
}

TEST(RunExperiment, ManifestEchoesResolvedConfig) {
  const auto out = scratch("manifest");
  const auto m = run_experiment(config("weakvalue", {{"trials", 1000}}, out));
  const json j = json::parse(slurp(out / "manifest.json"));
  EXPECT_EQ(j.at("seed"), 7);
  EXPECT_EQ(j.at("version"), WEAKMEAS_VERSION);
  EXPECT_EQ(j.at("outputs"), json(m.outputs));
  EXPECT_EQ(j.at("config").at("parameters").at("theta_deg"), 5.0);  // default filled in
  EXPECT_GE(j.at("wall_seconds").get<double>(), 0.0);
}

TEST(RunExperiment, BackactionStructure) {
  const auto out = scratch("backaction");
  run_experiment(config("backaction", {{"shots", 2000}}, out));
  std::vector<std::string> header;
  const auto rows = read_rows(out / "backaction_bloch.csv", &header);
  ASSERT_EQ(rows.size(), 12u);  // 4 angles x 3 branches
  EXPECT_EQ(header[0], "theta_deg");
  for (const auto& r : rows) {
    const double norm = std::sqrt(r[3] * r[3] + r[4] * r[4] + r[5] * r[5]);
    if (r[1] < 2) {
      EXPECT_NEAR(norm, 1.0, 1e-9);  // conditional kick keeps the length
    } else {
      EXPECT_NEAR(r[3], std::cos(r[0] * std::numbers::pi / 180), 1e-12);  // unconditional dephasing
    }
  }
  for (const auto& r : read_rows(out / "backaction_process.csv")) EXPECT_NEAR(r[3], 1.0, 1e-9);
}

TEST(RunExperiment, WeakValuePeaksAtEightyFiveDegrees) {
  const auto out = scratch("weakvalue");
  run_experiment(config("weakvalue", {{"trials", 1000}}, out));
  const auto rows = read_rows(out / "weakvalue.csv");
  std::size_t best = 0;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows[i][2] > rows[best][2]) best = i;
  EXPECT_EQ(rows[best][0], 85.0);
  EXPECT_NEAR(rows[best][2], 11.47, 0.005);
}

TEST(RunExperiment, FringeDataReadableAsDataset) {
  const auto out = scratch("fringe");
  run_experiment(config("fringe", json::object(), out));
  const auto fit = read_rows(out / "fringe_fit.csv");
  ASSERT_EQ(fit.size(), 1u);
  EXPECT_NEAR(fit[0][10], 90.0, 0.5);  // theta at 229 ns
  EXPECT_EQ(read_rows(out / "fringe_data.csv").size(), 100u);
}

TEST(ReadoutTargets, UnknownKeyRejected) {
  EXPECT_THROW(readout_targets_from_json({{"bright", 0.9}}), ConfigError);
  EXPECT_EQ(readout_targets_from_json({{"bright_given_0", 0.9}}).bright_given_0, 0.9);
}

TEST(Acceptance, MutatedSecondStrengthFailsCriterionFour) {
  AcceptanceOptions o;
  o.only = {4};
  EXPECT_TRUE(run_acceptance(o).at(0).pass());
  o.theta2_offset = std::numbers::pi / 180;
  const auto r = run_acceptance(o);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_FALSE(r[0].pass());
}

TEST(Acceptance, ZeroTrialsIsAConfigError) {
  AcceptanceOptions o;
  o.trials = 0;
  EXPECT_THROW(run_acceptance(o), ConfigError);
}
