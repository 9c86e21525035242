// SPDX-License-Identifier: Apache-2.0
//
// Experiment orchestration: runs a parsed config over its sweep axis,
// methods and seeds; trains learned methods when no matching checkpoint
// exists; writes metrics.csv (the contract), figures and diagnostic dumps;
// exposes the bundled figure configs and the self-test entry point.
#pragma once

#include <string>
#include <vector>

#include "pilotbench/config.hpp"
#include "pilotbench/propcheck.hpp"

namespace pilotbench {

struct RunOptions {
  int jobs = 0;               // parallel sweep workers; 0 = runtime default
  std::string out_override;   // overrides cfg.out_dir when nonempty
};

// Returns a process exit code: 0 on success.
int run_experiment(ExperimentConfig cfg, const RunOptions& opts = {});
int run_config_file(const std::string& path, const RunOptions& opts = {});

// Bundled figure configurations. scale is "desk" or "paper".
std::vector<std::string> bundled_figures();
std::string bundled_config_text(const std::string& figure_id,
                                const std::string& scale);
int reproduce(const std::string& figure_id, const std::string& scale,
              const RunOptions& opts = {});

// Criterion-style determinism check: runs a miniature experiment twice into
// fresh directories and compares metrics.csv byte for byte.
PropCheck determinism_check();

// Runs the property suite plus the determinism check, printing one line per
// check. Returns the number of failures.
int selftest();

}  // namespace pilotbench
