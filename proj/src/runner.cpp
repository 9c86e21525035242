// SPDX-License-Identifier: Apache-2.0
#include "pilotbench/runner.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "pilotbench/active_sensing.hpp"
#include "pilotbench/parallel.hpp"
#include "pilotbench/plotting.hpp"
#include "pilotbench/tasks.hpp"

namespace pilotbench {

namespace fs = std::filesystem;

namespace {

constexpr double kRad2Deg = 180.0 / std::numbers::pi;

bool timing_enabled() {
  const char* env = std::getenv("PILOT_TIMING");
  return env != nullptr && std::string(env) == "wall";
}

// Fig.-11-style diagnostics: per-episode CSV dumps of the posterior over
// the AoA grid and the sensing beam patterns, stage by stage.
void dump_posterior_diagnostics(const ExperimentConfig& point,
                                const MethodBundle& bundle,
                                const std::string& out_dir,
                                std::uint64_t seed) {
  const auto& diag = point.diagnostics;
  if (diag.posterior_episodes <= 0 || point.task != TaskKind::active ||
      !bundle.lstm)
    return;
  fs::create_directories(out_dir + "/posterior");

  const auto grid =
      uniform_grid(point.angle_min, point.angle_max, diag.posterior_grid);
  Eigen::VectorXd prior =
      Eigen::VectorXd::Constant(diag.posterior_grid, 1.0 / diag.posterior_grid);
  const double sigma1 = point.sigma1();
  const double power = point.p_uplink();

  for (int ep = 0; ep < diag.posterior_episodes; ++ep) {
    RngStream stream(derive_seed(seed, "posterior-episode", ep));
    auto channel =
        sample_multipath(point.dims.num_antennas, point.dims.num_paths,
                         point.angle_min, point.angle_max, stream);
    RngStream noise(stream.next_u64());
    auto trace = bundle.lstm->rollout(channel, sigma1, noise);

    std::ostringstream csv;
    csv << "stage,angle_deg,posterior,pattern_db\r\n";
    for (int t = 1; t <= point.dims.stages; ++t) {
      auto post = posterior_update(grid, trace.sensing.leftCols(t),
                                   trace.measurements.head(t), power, sigma1,
                                   prior);
      auto pattern = beam_pattern(trace.sensing.col(t - 1), grid);
      for (int g = 0; g < grid.size(); ++g) {
        csv << t << ',' << grid(g) * kRad2Deg << ',' << post(g) << ','
            << 10.0 * std::log10(std::max(pattern(g), 1e-12)) << "\r\n";
      }
    }
    char name[64];
    std::snprintf(name, sizeof(name), "/posterior/episode%04d.csv", ep);
    write_file_atomic(out_dir + name, csv.str());
  }
}

void write_figures(const ExperimentConfig& cfg,
                   const std::vector<MetricsRecord>& records,
                   const std::string& out_dir) {
  PlotSpec spec;
  spec.title = to_string(cfg.task) + " sweep over " + cfg.sweep.axis;
  spec.x_label = cfg.sweep.axis;
  spec.y_label = cfg.task == TaskKind::active
                     ? "mean normalized gain"
                     : (to_string(cfg.utility_kind) == "sum"
                            ? "sum rate (bits/s/Hz)"
                            : "min rate (bits/s/Hz)");
  for (const auto& method : cfg.methods) {
    PlotSeries series;
    series.label = method;
    for (int value : cfg.sweep.values) {
      double mean = 0, ci = 0;
      int count = 0;
      for (const auto& r : records)
        if (r.method == method && r.sweep_value == value) {
          mean += r.utility_mean;
          ci += std::isfinite(r.ci_halfwidth) ? r.ci_halfwidth : 0.0;
          ++count;
        }
      if (count == 0) continue;
      series.x.push_back(value);
      series.y.push_back(mean / count);
      series.ci.push_back(ci / count);
    }
    spec.series.push_back(std::move(series));
  }
  fs::create_directories(out_dir + "/figures");
  write_file_atomic(out_dir + "/figures/sweep.svg", render_svg(spec));
  write_file_atomic(out_dir + "/figures/sweep.png", render_png(spec));
}

}  // namespace

int run_experiment(ExperimentConfig cfg, const RunOptions& opts) {
  try {
    validate(cfg);
    if (!opts.out_override.empty()) cfg.out_dir = opts.out_override;
    if (opts.jobs > 0) par::set_max_threads(opts.jobs);
    if (const char* env = std::getenv("PILOT_SEED")) {
      cfg.seeds = {static_cast<std::uint64_t>(std::strtoull(env, nullptr, 10))};
    }

    const std::string out_dir = cfg.out_dir.empty() ? "out" : cfg.out_dir;
    fs::create_directories(out_dir);
    fs::create_directories(out_dir + "/checkpoints");

    // Canonical copy of the config next to its outputs.
    write_file_atomic(out_dir + "/config.json", serialize_config(cfg));

    struct WorkItem {
      int sweep_value;
      std::uint64_t seed;
    };
    std::vector<WorkItem> items;
    for (int value : cfg.sweep.values)
      for (std::uint64_t seed : cfg.seeds) items.push_back({value, seed});

    // The LMMSE statistics cache is shared across sweep points; build it
    // before the parallel region so workers only read.
    bool needs_stats = false;
    for (const auto& m : cfg.methods) needs_stats |= m == "lmmse_bcd";
    if (needs_stats)
      stats_for(cfg.at_sweep_value(cfg.sweep.values[0]), out_dir + "/cache");

    std::vector<std::vector<MetricsRecord>> rows(items.size());
    std::vector<std::string> errors(items.size());

    par::for_each(static_cast<std::int64_t>(items.size()),
                  [&](std::int64_t idx) {
      const auto& item = items[idx];
      try {
        ExperimentConfig point = cfg.at_sweep_value(item.sweep_value);
        MethodBundle bundle =
            prepare_bundle(point, cfg.methods, item.seed,
                           out_dir + "/checkpoints", out_dir + "/cache");
        for (const auto& method : cfg.methods) {
          const auto started = std::chrono::steady_clock::now();
          auto summary = evaluate_method(point, method, bundle, cfg.n_eval,
                                         item.seed);
          const double elapsed =
              std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                            started)
                  .count();
          MetricsRecord r;
          r.task = to_string(cfg.task);
          r.method = method;
          r.sweep_value = item.sweep_value;
          r.utility_mean = summary.mean;
          r.ci_halfwidth = summary.ci_halfwidth;
          r.n_eval = summary.n;
          r.seed = item.seed;
          r.wall_time_s = timing_enabled() ? elapsed : 0.0;
          rows[idx].push_back(r);
        }
        if (point.diagnostics.posterior_episodes > 0 &&
            item.seed == cfg.seeds[0])
          dump_posterior_diagnostics(point, bundle, out_dir, item.seed);
      } catch (const std::exception& e) {
        errors[idx] = e.what();
      }
    });

    for (const auto& err : errors)
      if (!err.empty()) {
        std::fprintf(stderr, "error: %s\n", err.c_str());
        return 1;
      }

    std::vector<MetricsRecord> records;
    for (const auto& part : rows)
      records.insert(records.end(), part.begin(), part.end());
    if (!write_file_atomic(out_dir + "/metrics.csv", metrics_to_csv(records))) {
      std::fprintf(stderr, "error: cannot write %s/metrics.csv\n",
                   out_dir.c_str());
      return 1;
    }
    write_figures(cfg, records, out_dir);
    return 0;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

int run_config_file(const std::string& path, const RunOptions& opts) {
  try {
    return run_experiment(load_config(path), opts);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}

int reproduce(const std::string& figure_id, const std::string& scale,
              const RunOptions& opts) {
  std::string text;
  try {
    text = bundled_config_text(figure_id, scale);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\nvalid figure ids:", e.what());
    for (const auto& id : bundled_figures())
      std::fprintf(stderr, " %s", id.c_str());
    std::fprintf(stderr, "\n");
    return 2;
  }
  ExperimentConfig cfg = parse_config(text);
  RunOptions local = opts;
  if (local.out_override.empty())
    local.out_override = "out/" + figure_id + "_" + scale;
  return run_experiment(cfg, local);
}

PropCheck determinism_check() {
  return {"determinism: identical seeds give byte-identical metrics.csv",
          []() -> CheckResult {
            ExperimentConfig cfg = parse_config(
                bundled_config_text("fig4", "desk"));
            cfg.dims = DimsConfig{2, 2, 1, 2, 0, 0, 1};
            cfg.sweep = {"pilot_len", {2}};
            cfg.methods = {"gnn", "perfect_csi"};
            cfg.seeds = {11};
            cfg.model.hidden = 8;
            cfg.model.rounds = 1;
            cfg.train.batch = 8;
            cfg.train.iters = 20;
            cfg.train.val_size = 16;
            cfg.train.val_every = 10;
            cfg.n_eval = 40;

            auto run_into = [&](const std::string& dir) {
              std::filesystem::remove_all(dir);
              RunOptions opts;
              opts.out_override = dir;
              return run_experiment(cfg, opts);
            };
            const std::string base =
                (std::filesystem::temp_directory_path() / "pb_det").string();
            if (run_into(base + "_a") != 0 || run_into(base + "_b") != 0)
              return {false, "run failed"};
            std::ifstream a(base + "_a/metrics.csv", std::ios::binary);
            std::ifstream b(base + "_b/metrics.csv", std::ios::binary);
            std::stringstream sa, sb;
            sa << a.rdbuf();
            sb << b.rdbuf();
            if (sa.str().empty()) return {false, "empty metrics.csv"};
            if (sa.str() != sb.str())
              return {false, "metrics.csv bytes differ between runs"};
            return {true, "identical across fresh runs"};
          }};
}

int selftest() {
  auto checks = property_suite();
  checks.push_back(determinism_check());
  int failures = 0;
  for (const auto& check : checks) {
    CheckResult result;
    try {
      result = check.run();
    } catch (const std::exception& e) {
      result = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s  %s%s%s\n", result.pass ? "PASS" : "FAIL",
                check.name.c_str(), result.detail.empty() ? "" : " — ",
                result.detail.c_str());
    if (!result.pass) ++failures;
  }
  std::printf("%d/%zu checks passed\n",
              static_cast<int>(checks.size()) - failures, checks.size());
  return failures;
}

}  // namespace pilotbench
