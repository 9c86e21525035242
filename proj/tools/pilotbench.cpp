// SPDX-License-Identifier: Apache-2.0
//
// pilotbench: train, evaluate and compare learned and model-based designs
// for three pilots-to-decisions tasks (RIS reflection + beamforming from
// uplink pilots, FDD limited feedback precoding, active mmWave beam
// alignment).
//
//   pilotbench run <config.json> [--jobs N] [--out DIR]
//   pilotbench reproduce <fig4|fig7|fig10|fig11> --scale <desk|paper>
//   pilotbench selftest
//
// PILOT_SEED in the environment overrides the config's seed list.
#include <CLI11.hpp>

#include "pilotbench/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"physical-layer learning-to-optimize workbench"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  int jobs = 0;
  auto* run_cmd = app.add_subcommand("run", "run an experiment config");
  run_cmd->add_option("config", config_path, "JSON experiment config")
      ->required();
  run_cmd->add_option("--jobs", jobs, "max parallel sweep workers");
  run_cmd->add_option("--out", out_dir, "output directory override");

  std::string figure, scale = "desk";
  auto* repro_cmd =
      app.add_subcommand("reproduce", "run a bundled figure config");
  repro_cmd->add_option("figure", figure, "fig4, fig7, fig10 or fig11")
      ->required();
  repro_cmd->add_option("--scale", scale, "desk (default) or paper");
  repro_cmd->add_option("--jobs", jobs, "max parallel sweep workers");
  repro_cmd->add_option("--out", out_dir, "output directory override");

  auto* selftest_cmd =
      app.add_subcommand("selftest", "run the property suites");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  pilotbench::RunOptions opts;
  opts.jobs = jobs;
  opts.out_override = out_dir;

  if (run_cmd->parsed()) return pilotbench::run_config_file(config_path, opts);
  if (repro_cmd->parsed()) return pilotbench::reproduce(figure, scale, opts);
  if (selftest_cmd->parsed()) return pilotbench::selftest() == 0 ? 0 : 1;
  return 2;
}
