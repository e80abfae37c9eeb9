// Runs every acceptance criterion at the default trial count and prints one
// line per criterion; exits nonzero if any fails.

#include <cstdlib>
#include <iostream>

#include "weakmeas/acceptance.hpp"
#include "weakmeas/random.hpp"

int main() {
  weakmeas::AcceptanceOptions opts;
  opts.threads = weakmeas::default_thread_count();
  bool ok = true;
  weakmeas::run_acceptance(opts, [&](const weakmeas::CriterionResult& r) {
    weakmeas::print_result(std::cout, r);
    std::cout.flush();
    ok = ok && r.pass();
  });
  std::cout << (ok ? "ALL CRITERIA PASS" : "SOME CRITERIA FAIL") << "\n";
  return ok ? EXIT_SUCCESS : EXIT_FAILURE;
}
