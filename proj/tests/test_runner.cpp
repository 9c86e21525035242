#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "pilotbench/plotting.hpp"
#include "pilotbench/runner.hpp"
#include "pilotbench/tasks.hpp"

using namespace pilotbench;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A micro config that trains in seconds: tiny GNN, two sweep values.
ExperimentConfig micro_ris() {
  ExperimentConfig cfg = parse_config(bundled_config_text("fig4", "desk"));
  cfg.dims = DimsConfig{2, 3, 1, 4, 0, 0, 1};
  cfg.sweep = {"pilot_len", {4, 8}};
  cfg.methods = {"gnn", "lmmse_bcd", "perfect_csi"};
  cfg.seeds = {5, 6};
  cfg.model.hidden = 8;
  cfg.model.rounds = 1;
  cfg.train.batch = 8;
  cfg.train.iters = 15;
  cfg.train.val_size = 8;
  cfg.train.val_every = 15;
  cfg.stats_draws = 2000;
  cfg.n_eval = 25;
  return cfg;
}

int count_lines(const std::string& text) {
  int n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

}  // namespace

TEST_CASE("run_experiment produces the full output set") {
  auto cfg = micro_ris();
  const std::string dir = "/tmp/pb_run_test";
  fs::remove_all(dir);
  RunOptions opts;
  opts.out_override = dir;
  REQUIRE(run_experiment(cfg, opts) == 0);

  const std::string csv = slurp(dir + "/metrics.csv");
  REQUIRE(!csv.empty());
  // Header + one row per (method, sweep value, seed).
  CHECK(count_lines(csv) == 1 + 3 * 2 * 2);
  CHECK(csv.find("perfect_csi") != std::string::npos);

  CHECK(fs::exists(dir + "/config.json"));
  CHECK(fs::exists(dir + "/figures/sweep.svg"));
  CHECK(fs::exists(dir + "/figures/sweep.png"));
  // Checkpoints for the learned method only: 2 sweep values x 2 seeds.
  int ckpts = 0;
  for (auto& entry : fs::directory_iterator(dir + "/checkpoints")) {
    (void)entry;
    ++ckpts;
  }
  CHECK(ckpts == 4);
  // LMMSE stats cache was created.
  CHECK(!fs::is_empty(dir + "/cache"));

  // PNG magic bytes.
  const std::string png = slurp(dir + "/figures/sweep.png");
  CHECK(png.substr(1, 3) == "PNG");

  // Rerun with identical config reuses checkpoints and reproduces the CSV.
  REQUIRE(run_experiment(cfg, opts) == 0);
  CHECK(slurp(dir + "/metrics.csv") == csv);
  fs::remove_all(dir);
}

TEST_CASE("checkpoints are keyed by config fingerprint") {
  auto cfg = micro_ris();
  cfg.sweep = {"pilot_len", {4}};
  cfg.seeds = {5};
  cfg.methods = {"gnn"};
  const std::string dir = "/tmp/pb_fp_test";
  fs::remove_all(dir);
  RunOptions opts;
  opts.out_override = dir;
  REQUIRE(run_experiment(cfg, opts) == 0);
  const std::string first = slurp(dir + "/metrics.csv");

  // A different training budget changes the fingerprint, so the stale
  // checkpoint must not be reused.
  auto cfg2 = cfg;
  cfg2.train.iters = 30;
  REQUIRE(run_experiment(cfg2, opts) == 0);
  int ckpts = 0;
  for (auto& entry : fs::directory_iterator(dir + "/checkpoints")) {
    (void)entry;
    ++ckpts;
  }
  CHECK(ckpts == 2);
  CHECK(slurp(dir + "/metrics.csv") != first);
  fs::remove_all(dir);
}

TEST_CASE("invalid configs exit with code 2 and a diagnostic") {
  const std::string dir = "/tmp/pb_badcfg";
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    std::ofstream out(dir + "/bad.json");
    out << "{ definitely not json";
  }
  CHECK(run_config_file(dir + "/bad.json", {}) == 2);
  CHECK(run_config_file(dir + "/missing.json", {}) == 2);
  fs::remove_all(dir);
}

TEST_CASE("posterior diagnostics dump per-episode CSVs") {
  ExperimentConfig cfg = parse_config(bundled_config_text("fig11", "desk"));
  cfg.dims.num_antennas = 8;
  cfg.dims.stages = 3;
  cfg.sweep = {"stages", {3}};
  cfg.model.lstm_width = 16;
  cfg.model.head_hidden = 16;
  cfg.train.batch = 8;
  cfg.train.iters = 10;
  cfg.train.val_size = 8;
  cfg.train.val_every = 10;
  cfg.n_eval = 10;
  cfg.diagnostics.posterior_episodes = 2;
  cfg.diagnostics.posterior_grid = 50;

  const std::string dir = "/tmp/pb_diag_test";
  fs::remove_all(dir);
  RunOptions opts;
  opts.out_override = dir;
  REQUIRE(run_experiment(cfg, opts) == 0);
  const std::string ep0 = slurp(dir + "/posterior/episode0000.csv");
  REQUIRE(!ep0.empty());
  CHECK(ep0.find("stage,angle_deg,posterior,pattern_db") == 0);
  // stages x grid rows + header.
  CHECK(count_lines(ep0) == 1 + 3 * 50);
  CHECK(fs::exists(dir + "/posterior/episode0001.csv"));
  fs::remove_all(dir);
}

TEST_CASE("svg and png renderers produce sane output") {
  PlotSpec spec;
  spec.title = "demo";
  spec.x_label = "x";
  spec.y_label = "y";
  PlotSeries s;
  s.label = "series";
  s.x = {1, 2, 3};
  s.y = {0.5, 0.7, 0.65};
  s.ci = {0.05, 0.04, 0.06};
  spec.series.push_back(s);
  const std::string svg = render_svg(spec);
  CHECK(svg.find("<svg") == 0);
  CHECK(svg.find("polyline") != std::string::npos);
  CHECK(svg.find("demo") != std::string::npos);
  const std::string png = render_png(spec);
  CHECK(png.size() > 100);
  CHECK(png.substr(1, 3) == "PNG");
}

TEST_CASE("selftest-style property checks report pass") {
  // Spot-check two cheap entries from the suite.
  auto checks = property_suite();
  REQUIRE(!checks.empty());
  bool found_array = false;
  for (const auto& c : checks) {
    if (c.name.find("array response") != std::string::npos) {
      found_array = true;
      auto result = c.run();
      CHECK(result.pass);
    }
    if (c.name.find("mrt optimality") != std::string::npos) {
      auto result = c.run();
      CHECK(result.pass);
    }
  }
  CHECK(found_array);
}
