#pragma once

#include <string>
#include <vector>

namespace qshed {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

// Named self-check suites behind the `verify` subcommand. Each check compares
// production code against an independent route (closed form, Monte Carlo,
// exhaustive search). With force_failure set, one input per suite is
// deliberately corrupted to demonstrate that the comparison actually bites.
std::vector<std::string> verify_suite_names();
std::vector<CheckResult> run_verify_suite(const std::string& suite, bool force_failure);

}  // namespace qshed
