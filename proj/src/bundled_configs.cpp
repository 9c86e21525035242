// SPDX-License-Identifier: Apache-2.0
//
// Built-in experiment configurations behind `reproduce <figure> --scale ...`.
// Desk-scale configs use reduced dimensions that train in minutes on a CPU;
// paper-scale configs carry the published dimensions and powers verbatim.
#include <stdexcept>
#include <string>
#include <vector>

#include "pilotbench/runner.hpp"

namespace pilotbench {

namespace {

const char* kFig4Desk = R"json({
  "schema_version": 1,
  "task": "ris",
  "utility": "sum",
  "dims": {"num_antennas": 4, "num_ris_elements": 20, "num_users": 2,
           "pilot_len": 4},
  "power": {"uplink_dbm": 15.0, "downlink_dbm": 20.0},
  "noise": {"uplink_dbm": -100.0, "downlink_dbm": -85.0},
  "model": {"hidden": 64, "rounds": 3},
  "train": {"batch": 128, "iters": 4000, "lr": 1e-3, "val_size": 256,
            "val_every": 250, "grad_chunks": 8},
  "eval": {"n_eval": 1000},
  "stats": {"n_draws": 100000},
  "sweep": {"axis": "pilot_len", "values": [4, 12, 20]},
  "methods": ["gnn", "lmmse_bcd", "perfect_csi"],
  "seeds": [1, 2, 3, 4, 5],
  "out_dir": "out/fig4_desk"
})json";

const char* kFig4Paper = R"json({
  "schema_version": 1,
  "task": "ris",
  "utility": "sum",
  "dims": {"num_antennas": 8, "num_ris_elements": 100, "num_users": 3,
           "pilot_len": 6},
  "power": {"uplink_dbm": 15.0, "downlink_dbm": 20.0},
  "noise": {"uplink_dbm": -100.0, "downlink_dbm": -85.0},
  "model": {"hidden": 256, "rounds": 3},
  "train": {"batch": 256, "iters": 40000, "lr": 1e-3, "val_size": 1000,
            "val_every": 1000, "grad_chunks": 8},
  "eval": {"n_eval": 1000},
  "stats": {"n_draws": 100000},
  "sweep": {"axis": "pilot_len", "values": [6, 12, 18, 24, 30, 36]},
  "methods": ["gnn", "lmmse_bcd", "perfect_csi"],
  "seeds": [1, 2, 3],
  "out_dir": "out/fig4_paper"
})json";

const char* kFig7Desk = R"json({
  "schema_version": 1,
  "task": "fdd",
  "dims": {"num_antennas": 16, "num_users": 2, "pilot_len": 8,
           "num_paths": 2},
  "snr_db": 10.0,
  "angles": {"min_deg": -30.0, "max_deg": 30.0},
  "model": {"hidden": 128, "hidden_layers": 3},
  "train": {"batch": 128, "iters": 6000, "lr": 1e-3, "val_size": 256,
            "val_every": 300, "grad_chunks": 8,
            "anneal_every": 300, "anneal_factor": 1.2, "anneal_max": 30.0},
  "eval": {"n_eval": 1000},
  "sweep": {"axis": "feedback_bits", "values": [5, 10, 20, 30]},
  "methods": ["dl_e2e", "omp_zf", "mrt"],
  "seeds": [1, 2, 3, 4, 5],
  "out_dir": "out/fig7_desk"
})json";

const char* kFig7Paper = R"json({
  "schema_version": 1,
  "task": "fdd",
  "dims": {"num_antennas": 64, "num_users": 2, "pilot_len": 8,
           "num_paths": 2},
  "snr_db": 10.0,
  "angles": {"min_deg": -30.0, "max_deg": 30.0},
  "model": {"hidden": 512, "hidden_layers": 3},
  "train": {"batch": 256, "iters": 50000, "lr": 1e-3, "val_size": 1000,
            "val_every": 1000, "grad_chunks": 8,
            "anneal_every": 2500, "anneal_factor": 1.2, "anneal_max": 30.0},
  "eval": {"n_eval": 1000},
  "sweep": {"axis": "feedback_bits", "values": [5, 10, 15, 20, 25, 30, 40]},
  "methods": ["dl_e2e", "omp_zf", "mrt"],
  "seeds": [1, 2, 3],
  "out_dir": "out/fig7_paper"
})json";

const char* kFig10Desk = R"json({
  "schema_version": 1,
  "task": "active",
  "dims": {"num_antennas": 32, "num_paths": 3},
  "snr_db": 0.0,
  "angles": {"min_deg": -60.0, "max_deg": 60.0},
  "model": {"lstm_width": 128, "head_hidden": 128,
            "objective": "beamforming"},
  "train": {"batch": 64, "iters": 2000, "lr": 1e-3, "val_size": 256,
            "val_every": 200, "grad_chunks": 8},
  "eval": {"n_eval": 1000},
  "sweep": {"axis": "stages", "values": [2, 4, 8]},
  "methods": ["lstm", "learned_fixed", "random_omp"],
  "seeds": [1, 2, 3, 4, 5],
  "out_dir": "out/fig10_desk"
})json";

const char* kFig10Paper = R"json({
  "schema_version": 1,
  "task": "active",
  "dims": {"num_antennas": 64, "num_paths": 3},
  "snr_db": 0.0,
  "angles": {"min_deg": -60.0, "max_deg": 60.0},
  "model": {"lstm_width": 512, "head_hidden": 512,
            "objective": "beamforming"},
  "train": {"batch": 128, "iters": 30000, "lr": 1e-3, "val_size": 1000,
            "val_every": 1000, "grad_chunks": 8},
  "eval": {"n_eval": 1000},
  "sweep": {"axis": "stages", "values": [2, 4, 6, 8, 10, 12]},
  "methods": ["lstm", "learned_fixed", "random_omp"],
  "seeds": [1, 2, 3],
  "out_dir": "out/fig10_paper"
})json";

const char* kFig11Desk = R"json({
  "schema_version": 1,
  "task": "active",
  "dims": {"num_antennas": 32, "num_paths": 1, "stages": 8},
  "snr_db": 0.0,
  "angles": {"min_deg": -60.0, "max_deg": 60.0},
  "model": {"lstm_width": 128, "head_hidden": 128, "objective": "aoa"},
  "train": {"batch": 64, "iters": 2000, "lr": 1e-3, "val_size": 256,
            "val_every": 200, "grad_chunks": 8},
  "eval": {"n_eval": 200},
  "sweep": {"axis": "stages", "values": [8]},
  "methods": ["lstm"],
  "seeds": [1],
  "out_dir": "out/fig11_desk",
  "diagnostics": {"posterior_episodes": 100, "posterior_grid": 1000}
})json";

const char* kFig11Paper = R"json({
  "schema_version": 1,
  "task": "active",
  "dims": {"num_antennas": 64, "num_paths": 1, "stages": 12},
  "snr_db": 0.0,
  "angles": {"min_deg": -60.0, "max_deg": 60.0},
  "model": {"lstm_width": 512, "head_hidden": 512, "objective": "aoa"},
  "train": {"batch": 128, "iters": 30000, "lr": 1e-3, "val_size": 1000,
            "val_every": 1000, "grad_chunks": 8},
  "eval": {"n_eval": 200},
  "sweep": {"axis": "stages", "values": [12]},
  "methods": ["lstm"],
  "seeds": [1],
  "out_dir": "out/fig11_paper",
  "diagnostics": {"posterior_episodes": 100, "posterior_grid": 1000}
})json";

}  // namespace

std::vector<std::string> bundled_figures() {
  return {"fig4", "fig7", "fig10", "fig11"};
}

std::string bundled_config_text(const std::string& figure_id,
                                const std::string& scale) {
  const bool desk = scale == "desk";
  if (!desk && scale != "paper")
    throw std::invalid_argument("unknown scale: " + scale);
  if (figure_id == "fig4") return desk ? kFig4Desk : kFig4Paper;
  if (figure_id == "fig7") return desk ? kFig7Desk : kFig7Paper;
  if (figure_id == "fig10") return desk ? kFig10Desk : kFig10Paper;
  if (figure_id == "fig11") return desk ? kFig11Desk : kFig11Paper;
  throw std::invalid_argument("unknown figure id: " + figure_id);
}

}  // namespace pilotbench
