#pragma once

// Acceptance suite: each criterion reports measured value, target and
// tolerance for every sub-check.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace weakmeas {

enum class Relation { within, at_most, at_least };

struct Check {
  std::string label;
  double measured;
  double target;     // centre, or the limit for one-sided checks
  double tolerance;  // zero for one-sided checks
  Relation relation;
  bool pass;
};

struct CriterionResult {
  int id;
  std::string title;
  std::vector<Check> checks;
  std::vector<std::string> notes;  // reported, not gating
  double seconds = 0;

  bool pass() const;
};

struct AcceptanceOptions {
  std::size_t trials = 100000;
  std::uint64_t seed = 20120419;
  unsigned threads = 1;
  /// Mutation hook: added to the second-measurement strength (rad).
  double theta2_offset = 0.0;
  /// Criteria to run (1-10); empty runs all.
  std::vector<int> only;

  void validate() const;
};

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts,
                                            const std::function<void(const CriterionResult&)>& on_result = {});

/// One line per criterion, followed by indented notes.
void print_result(std::ostream& os, const CriterionResult& r);

}  // namespace weakmeas
