// SPDX-License-Identifier: Apache-2.0
#include "pilotbench/config.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace pilotbench {

using nlohmann::json;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }

// Reads a power-like field given either as "<name>_dbm" or linear "<name>".
double read_power(const json& j, const std::string& name, double fallback) {
  if (j.contains(name + "_dbm")) return dbm_to_mw(j.at(name + "_dbm"));
  if (j.contains(name)) return j.at(name);
  return fallback;
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).template get<T>();
}

}  // namespace

TaskKind task_from_string(const std::string& s) {
  if (s == "ris") return TaskKind::ris;
  if (s == "fdd") return TaskKind::fdd;
  if (s == "active") return TaskKind::active;
  throw std::invalid_argument("unknown task: " + s);
}

std::string to_string(TaskKind task) {
  switch (task) {
    case TaskKind::ris: return "ris";
    case TaskKind::fdd: return "fdd";
    case TaskKind::active: return "active";
  }
  return "?";
}

double ExperimentConfig::p_downlink() const {
  return has_snr_override ? std::pow(10.0, snr_db / 10.0) : power.downlink;
}
double ExperimentConfig::p_uplink() const {
  return has_snr_override ? std::pow(10.0, snr_db / 10.0) : power.uplink;
}
double ExperimentConfig::sigma0() const {
  return has_snr_override ? 1.0 : std::sqrt(noise.downlink_var);
}
double ExperimentConfig::sigma1() const {
  return has_snr_override ? 1.0 : std::sqrt(noise.uplink_var);
}

ExperimentConfig ExperimentConfig::at_sweep_value(int value) const {
  ExperimentConfig point = *this;
  if (sweep.axis == "pilot_len")
    point.dims.pilot_len = value;
  else if (sweep.axis == "feedback_bits")
    point.dims.feedback_bits = value;
  else if (sweep.axis == "stages")
    point.dims.stages = value;
  else
    throw std::invalid_argument("unknown sweep axis: " + sweep.axis);
  point.sweep.values = {value};
  return point;
}

std::vector<std::string> methods_for(TaskKind task) {
  switch (task) {
    case TaskKind::ris:
      return {"gnn", "lmmse_bcd", "perfect_csi"};
    case TaskKind::fdd:
      return {"dl_e2e", "omp_zf", "mrt", "zf_csi"};
    case TaskKind::active:
      return {"lstm", "learned_fixed", "random_omp", "bisection"};
  }
  return {};
}

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config parse error: ") + e.what());
  }

  ExperimentConfig cfg;
  try {
    maybe(j, "schema_version", cfg.schema_version);
    if (cfg.schema_version != 1)
      throw std::invalid_argument("unsupported schema_version");
    cfg.task = task_from_string(j.at("task").get<std::string>());
    if (j.contains("utility"))
      cfg.utility_kind = utility_from_string(j.at("utility"));

    if (j.contains("dims")) {
      const json& d = j.at("dims");
      maybe(d, "num_antennas", cfg.dims.num_antennas);
      maybe(d, "num_ris_elements", cfg.dims.num_ris_elements);
      maybe(d, "num_users", cfg.dims.num_users);
      maybe(d, "pilot_len", cfg.dims.pilot_len);
      maybe(d, "feedback_bits", cfg.dims.feedback_bits);
      maybe(d, "stages", cfg.dims.stages);
      maybe(d, "num_paths", cfg.dims.num_paths);
    }
    if (j.contains("power")) {
      const json& p = j.at("power");
      cfg.power.downlink = read_power(p, "downlink", cfg.power.downlink);
      cfg.power.uplink = read_power(p, "uplink", cfg.power.uplink);
    }
    if (j.contains("noise")) {
      const json& n = j.at("noise");
      cfg.noise.downlink_var = read_power(n, "downlink", cfg.noise.downlink_var);
      cfg.noise.uplink_var = read_power(n, "uplink", cfg.noise.uplink_var);
    }
    if (j.contains("snr_db")) {
      cfg.has_snr_override = true;
      cfg.snr_db = j.at("snr_db");
    }
    if (j.contains("angles")) {
      const json& a = j.at("angles");
      if (a.contains("min_deg")) cfg.angle_min = a.at("min_deg").get<double>() * kDeg;
      if (a.contains("max_deg")) cfg.angle_max = a.at("max_deg").get<double>() * kDeg;
    }
    if (j.contains("geometry")) {
      const json& g = j.at("geometry");
      auto read_vec = [&](const char* key, Eigen::Vector2d& out) {
        if (g.contains(key)) {
          auto v = g.at(key).get<std::vector<double>>();
          if (v.size() != 2)
            throw std::invalid_argument(std::string("geometry.") + key +
                                        " must have 2 entries");
          out = Eigen::Vector2d(v[0], v[1]);
        }
      };
      read_vec("bs", cfg.geometry.bs_pos);
      read_vec("ris", cfg.geometry.ris_pos);
      read_vec("user_min", cfg.geometry.user_min);
      read_vec("user_max", cfg.geometry.user_max);
      maybe(g, "ref_loss_db", cfg.geometry.ref_loss_db);
      maybe(g, "exp_direct", cfg.geometry.exponent_direct);
      maybe(g, "exp_ris", cfg.geometry.exponent_ris);
      maybe(g, "rician", cfg.geometry.rician_factor);
    }
    if (j.contains("model")) {
      const json& m = j.at("model");
      maybe(m, "hidden", cfg.model.hidden);
      maybe(m, "rounds", cfg.model.rounds);
      maybe(m, "hidden_layers", cfg.model.hidden_layers);
      maybe(m, "lstm_width", cfg.model.lstm_width);
      maybe(m, "head_hidden", cfg.model.head_hidden);
      maybe(m, "objective", cfg.model.objective);
    }
    if (j.contains("train")) {
      const json& t = j.at("train");
      maybe(t, "batch", cfg.train.batch);
      maybe(t, "iters", cfg.train.iters);
      maybe(t, "lr", cfg.train.lr);
      maybe(t, "grad_chunks", cfg.train.grad_chunks);
      maybe(t, "val_size", cfg.train.val_size);
      maybe(t, "val_every", cfg.train.val_every);
      maybe(t, "plateau_patience", cfg.train.plateau_patience);
      maybe(t, "anneal_start", cfg.train.anneal_start);
      maybe(t, "anneal_factor", cfg.train.anneal_factor);
      maybe(t, "anneal_max", cfg.train.anneal_max);
      maybe(t, "anneal_every", cfg.train.anneal_every);
    }
    if (j.contains("eval")) maybe(j.at("eval"), "n_eval", cfg.n_eval);
    if (j.contains("stats")) maybe(j.at("stats"), "n_draws", cfg.stats_draws);

    const json& s = j.at("sweep");
    cfg.sweep.axis = s.at("axis");
    cfg.sweep.values = s.at("values").get<std::vector<int>>();

    cfg.methods = j.at("methods").get<std::vector<std::string>>();
    cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    maybe(j, "out_dir", cfg.out_dir);
    if (j.contains("diagnostics")) {
      const json& d = j.at("diagnostics");
      maybe(d, "posterior_episodes", cfg.diagnostics.posterior_episodes);
      maybe(d, "posterior_grid", cfg.diagnostics.posterior_grid);
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config field error: ") + e.what());
  }

  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

void validate(const ExperimentConfig& cfg) {
  const DimsConfig& d = cfg.dims;
  if (d.num_antennas < 1 || d.num_users < 1 || d.num_ris_elements < 0 ||
      d.pilot_len < 1 || d.feedback_bits < 0 || d.stages < 0 ||
      d.num_paths < 1)
    throw std::invalid_argument("config: nonpositive dimension");
  if (cfg.sweep.axis != "pilot_len" && cfg.sweep.axis != "feedback_bits" &&
      cfg.sweep.axis != "stages")
    throw std::invalid_argument("config: unknown sweep axis " +
                                cfg.sweep.axis);
  if (cfg.sweep.values.empty())
    throw std::invalid_argument("config: sweep.values is empty");
  if (cfg.methods.empty())
    throw std::invalid_argument("config: methods is empty");
  auto known = methods_for(cfg.task);
  for (const auto& m : cfg.methods) {
    bool ok = false;
    for (const auto& k : known) ok = ok || k == m;
    if (!ok) {
      std::string avail;
      for (const auto& k : known) avail += (avail.empty() ? "" : ", ") + k;
      throw std::invalid_argument("config: method '" + m +
                                  "' not implemented for task '" +
                                  to_string(cfg.task) + "'; available: " +
                                  avail);
    }
  }
  if (cfg.seeds.empty())
    throw std::invalid_argument("config: seeds is empty");
  if (!(cfg.angle_min < cfg.angle_max))
    throw std::invalid_argument("config: empty angle range");
  if (cfg.task == TaskKind::ris) {
    if (cfg.dims.pilot_len % cfg.dims.num_users != 0)
      throw std::invalid_argument(
          "config: pilot_len must be a multiple of num_users for the ris task");
    if (cfg.sweep.axis == "pilot_len")
      for (int v : cfg.sweep.values)
        if (v % cfg.dims.num_users != 0)
          throw std::invalid_argument(
              "config: swept pilot_len " + std::to_string(v) +
              " is not a multiple of num_users");
  }
}

std::string serialize_config(const ExperimentConfig& cfg) {
  json j;
  j["schema_version"] = cfg.schema_version;
  j["task"] = to_string(cfg.task);
  j["utility"] = to_string(cfg.utility_kind);
  j["dims"] = {{"num_antennas", cfg.dims.num_antennas},
               {"num_ris_elements", cfg.dims.num_ris_elements},
               {"num_users", cfg.dims.num_users},
               {"pilot_len", cfg.dims.pilot_len},
               {"feedback_bits", cfg.dims.feedback_bits},
               {"stages", cfg.dims.stages},
               {"num_paths", cfg.dims.num_paths}};
  j["power"] = {{"downlink", cfg.power.downlink},
                {"uplink", cfg.power.uplink}};
  j["noise"] = {{"downlink", cfg.noise.downlink_var},
                {"uplink", cfg.noise.uplink_var}};
  if (cfg.has_snr_override) j["snr_db"] = cfg.snr_db;
  j["angles"] = {{"min_deg", cfg.angle_min / kDeg},
                 {"max_deg", cfg.angle_max / kDeg}};
  j["geometry"] = {
      {"bs", {cfg.geometry.bs_pos.x(), cfg.geometry.bs_pos.y()}},
      {"ris", {cfg.geometry.ris_pos.x(), cfg.geometry.ris_pos.y()}},
      {"user_min", {cfg.geometry.user_min.x(), cfg.geometry.user_min.y()}},
      {"user_max", {cfg.geometry.user_max.x(), cfg.geometry.user_max.y()}},
      {"ref_loss_db", cfg.geometry.ref_loss_db},
      {"exp_direct", cfg.geometry.exponent_direct},
      {"exp_ris", cfg.geometry.exponent_ris},
      {"rician", cfg.geometry.rician_factor}};
  j["model"] = {{"hidden", cfg.model.hidden},
                {"rounds", cfg.model.rounds},
                {"hidden_layers", cfg.model.hidden_layers},
                {"lstm_width", cfg.model.lstm_width},
                {"head_hidden", cfg.model.head_hidden},
                {"objective", cfg.model.objective}};
  j["train"] = {{"batch", cfg.train.batch},
                {"iters", cfg.train.iters},
                {"lr", cfg.train.lr},
                {"grad_chunks", cfg.train.grad_chunks},
                {"val_size", cfg.train.val_size},
                {"val_every", cfg.train.val_every},
                {"plateau_patience", cfg.train.plateau_patience},
                {"anneal_start", cfg.train.anneal_start},
                {"anneal_factor", cfg.train.anneal_factor},
                {"anneal_max", cfg.train.anneal_max},
                {"anneal_every", cfg.train.anneal_every}};
  j["eval"] = {{"n_eval", cfg.n_eval}};
  j["stats"] = {{"n_draws", cfg.stats_draws}};
  j["sweep"] = {{"axis", cfg.sweep.axis}, {"values", cfg.sweep.values}};
  j["methods"] = cfg.methods;
  j["seeds"] = cfg.seeds;
  j["out_dir"] = cfg.out_dir;
  j["diagnostics"] = {
      {"posterior_episodes", cfg.diagnostics.posterior_episodes},
      {"posterior_grid", cfg.diagnostics.posterior_grid}};
  return j.dump(2);
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  const std::string canon = serialize_config(cfg);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char c : s) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

std::string fmt_double(double v) {
  std::ostringstream ss;
  ss.precision(10);
  ss << v;
  return ss.str();
}
}  // namespace

std::string metrics_to_csv(const std::vector<MetricsRecord>& records) {
  std::string out =
      "task,method,sweep_value,utility_mean,ci_halfwidth,n_eval,seed,"
      "wall_time_s\r\n";
  for (const auto& r : records) {
    out += csv_field(r.task) + ',' + csv_field(r.method) + ',' +
           std::to_string(r.sweep_value) + ',' + fmt_double(r.utility_mean) +
           ',' + fmt_double(r.ci_halfwidth) + ',' + std::to_string(r.n_eval) +
           ',' + std::to_string(r.seed) + ',' + fmt_double(r.wall_time_s) +
           "\r\n";
  }
  return out;
}

}  // namespace pilotbench
