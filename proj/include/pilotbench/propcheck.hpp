// SPDX-License-Identifier: Apache-2.0
//
// Named property checks over the whole library: exact identities, oracle
// comparisons and constraint invariants. Shared by the `selftest` CLI
// subcommand and the acceptance harness.
#pragma once

#include <functional>
#include <string>
#include <vector>

namespace pilotbench {

struct CheckResult {
  bool pass = false;
  std::string detail;
};

struct PropCheck {
  std::string name;
  std::function<CheckResult()> run;
};

// The exact property suite (no training, CPU-cheap).
std::vector<PropCheck> property_suite();

}  // namespace pilotbench
