// SPDX-License-Identifier: Apache-2.0
//
// Declarative experiment description: dimensions, powers, noise, sweep axis,
// methods, seeds. JSON on disk with a versioned schema; the canonical
// serialization (sorted keys) is what configuration hashes are computed on.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pilotbench/chanmodels.hpp"
#include "pilotbench/ris_sim.hpp"

namespace pilotbench {

enum class TaskKind { ris, fdd, active };

TaskKind task_from_string(const std::string& s);
std::string to_string(TaskKind task);

struct DimsConfig {
  int num_antennas = 4;      // M
  int num_ris_elements = 0;  // N (ris task)
  int num_users = 2;         // K
  int pilot_len = 8;         // L
  int feedback_bits = 10;    // B (fdd)
  int stages = 4;            // T (active)
  int num_paths = 2;         // L_p (fdd, active)
};

struct PowerConfig {
  // Linear milliwatts internally; parsed from *_dbm or linear fields.
  double downlink = 100.0;   // P_d
  double uplink = 31.622776601683793;  // P_u
};

struct NoiseConfig {
  double downlink_var = 3.1622776601683794e-9;  // sigma0^2 (-85 dBm)
  double uplink_var = 1e-10;                    // sigma1^2 (-100 dBm)
};

struct ModelConfig {
  int hidden = 64;        // GNN width / fdd encoder width
  int rounds = 3;         // GNN rounds
  int hidden_layers = 3;  // fdd MLP depth
  int lstm_width = 128;
  int head_hidden = 128;
  std::string objective = "beamforming";  // active: beamforming | aoa
};

struct TrainSection {
  int batch = 128;
  long iters = 2000;
  double lr = 1e-3;
  int grad_chunks = 8;
  int val_size = 500;
  int val_every = 200;
  int plateau_patience = 3;
  double anneal_start = 1.0;
  double anneal_factor = 1.2;
  double anneal_max = 30.0;
  int anneal_every = 0;
};

struct SweepConfig {
  std::string axis;          // pilot_len | feedback_bits | stages
  std::vector<int> values;
};

struct DiagnosticsConfig {
  int posterior_episodes = 0;  // active task: per-episode posterior dumps
  int posterior_grid = 1000;
};

struct ExperimentConfig {
  int schema_version = 1;
  TaskKind task = TaskKind::ris;
  Utility utility_kind = Utility::sum;
  DimsConfig dims;
  PowerConfig power;
  NoiseConfig noise;
  bool has_snr_override = false;
  double snr_db = 0.0;
  double angle_min = -1.0471975511965976;  // radians
  double angle_max = 1.0471975511965976;
  GeometryConfig geometry;
  ModelConfig model;
  TrainSection train;
  int n_eval = 1000;
  int stats_draws = 100000;
  SweepConfig sweep;
  std::vector<std::string> methods;
  std::vector<std::uint64_t> seeds;
  std::string out_dir = "out";
  DiagnosticsConfig diagnostics;

  // Effective powers/noises after the optional SNR override (the override
  // pins the noise variance at 1 and sets the power to the linear SNR).
  double p_downlink() const;
  double p_uplink() const;
  double sigma0() const;  // std dev
  double sigma1() const;

  // Returns a copy with the sweep axis dimension set to `value`.
  ExperimentConfig at_sweep_value(int value) const;
};

// Parse/serialize. parse_config throws std::invalid_argument with a
// line/field diagnostic on malformed input; validate() checks cross-field
// rules (exactly one sweep axis, methods known for the task, ...).
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
std::string serialize_config(const ExperimentConfig& cfg);  // canonical form
void validate(const ExperimentConfig& cfg);

std::vector<std::string> methods_for(TaskKind task);

// FNV-1a over the canonical serialization.
std::uint64_t config_hash(const ExperimentConfig& cfg);

// One evaluation row.
struct MetricsRecord {
  std::string task;
  std::string method;
  int sweep_value = 0;
  double utility_mean = 0.0;
  double ci_halfwidth = 0.0;
  int n_eval = 0;
  std::uint64_t seed = 0;
  double wall_time_s = 0.0;
};

// RFC-4180 CSV with a header row in MetricsRecord field order.
std::string metrics_to_csv(const std::vector<MetricsRecord>& records);

}  // namespace pilotbench
