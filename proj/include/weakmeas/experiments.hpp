#pragma once

// Declarative experiment runner: one JSON config per experiment, CSV curves
// out, plus a JSON manifest.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "weakmeas/readout.hpp"

namespace weakmeas {

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"fringe", "backaction", "weakvalue", "readout", "coherence", "feedback"};
  return names;
}

struct ExperimentConfig {
  std::string experiment;
  nlohmann::json parameters = nlohmann::json::object();
  std::uint64_t seed = 1;
  std::filesystem::path output = "out";

  /// Top-level keys: experiment, parameters, seed, output. Anything else is
  /// rejected with the key named in the message.
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& file);
  nlohmann::json to_json() const;
};

struct RunOptions {
  unsigned threads = 1;
  /// Replaces every Monte Carlo sample count (trials, ideal_trials, shots).
  std::optional<std::size_t> trials_override;
};

struct RunManifest {
  nlohmann::json config;  // echo with defaults filled in
  std::uint64_t seed = 0;
  std::string version;
  std::vector<std::string> outputs;  // file names relative to the output dir
  double wall_seconds = 0;

  nlohmann::json to_json() const;
};

/// Validates the config, runs the experiment, writes CSVs and manifest.json
/// into config.output. CSV contents depend only on (config, seed).
RunManifest run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Readout targets from a JSON table (keys as in ReadoutTargets); unknown
/// keys are rejected.
ReadoutTargets readout_targets_from_json(const nlohmann::json& j);

/// Runs the readout calibration and writes calibration.json into `out`.
nlohmann::json run_calibration(const ReadoutTargets& targets, const std::filesystem::path& out);

// Numeric CSV table with a schema check before anything touches disk.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void add(std::vector<double> row) { rows.push_back(std::move(row)); }
  /// Throws if a row has the wrong width or a non-finite value.
  void check() const;
  std::string str() const;
};

/// Shortest round-trip decimal representation; deterministic across runs.
std::string format_double(double v);

}  // namespace weakmeas
