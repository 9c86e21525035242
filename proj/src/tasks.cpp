// SPDX-License-Identifier: Apache-2.0
#include "pilotbench/tasks.hpp"

#include <cmath>
#include <filesystem>
#include <stdexcept>

namespace pilotbench {

bool method_is_learned(const std::string& method) {
  return method == "gnn" || method == "dl_e2e" || method == "lstm" ||
         method == "learned_fixed";
}

SensingConfig sensing_config_of(const ExperimentConfig& cfg) {
  SensingConfig s;
  s.num_antennas = cfg.dims.num_antennas;
  s.stages = cfg.dims.stages;
  s.num_paths = cfg.dims.num_paths;
  s.power = cfg.p_uplink();
  s.sigma1 = cfg.sigma1();
  s.aoa_min = cfg.angle_min;
  s.aoa_max = cfg.angle_max;
  s.lstm_width = cfg.model.lstm_width;
  s.head_hidden = cfg.model.head_hidden;
  s.objective = cfg.model.objective == "aoa" ? SensingObjective::aoa
                                             : SensingObjective::beamforming;
  return s;
}

FddConfig fdd_config_of(const ExperimentConfig& cfg) {
  FddConfig f;
  f.num_antennas = cfg.dims.num_antennas;
  f.num_users = cfg.dims.num_users;
  f.pilot_len = cfg.dims.pilot_len;
  f.feedback_bits = cfg.dims.feedback_bits;
  f.num_paths = cfg.dims.num_paths;
  f.total_power = cfg.p_downlink();
  f.sigma0 = cfg.sigma0();
  f.aod_min = cfg.angle_min;
  f.aod_max = cfg.angle_max;
  f.hidden = cfg.model.hidden;
  f.hidden_layers = cfg.model.hidden_layers;
  return f;
}

RisPilotPlan pilot_plan_of(const ExperimentConfig& cfg) {
  return make_pilot_plan(cfg.dims.num_users, cfg.dims.num_ris_elements,
                         cfg.dims.pilot_len, cfg.p_uplink());
}

double ris_input_scale(const ExperimentConfig& cfg) {
  return std::sqrt(direct_gain_at_region_center(cfg.geometry));
}

// ---------------------------------------------------------------------------
// RIS GNN

RisGnnTask::RisGnnTask(const ExperimentConfig& cfg, std::uint64_t init_seed)
    : cfg_(cfg), plan_(pilot_plan_of(cfg)) {
  GnnConfig gc;
  gc.rounds = cfg.model.rounds;
  gc.hidden = cfg.model.hidden;
  gnn_ = std::make_shared<RisGnn>(
      cfg.dims.num_antennas, cfg.dims.num_ris_elements, cfg.dims.num_users,
      plan_.num_blocks(), cfg.p_downlink(), ris_input_scale(cfg), gc,
      init_seed);
}

ParamStore& RisGnnTask::params() { return gnn_->params(); }

std::vector<RisChannelSet> RisGnnTask::draw_batch(std::uint64_t master_seed,
                                                  std::string_view tag,
                                                  long base, int first,
                                                  int count) const {
  std::vector<RisChannelSet> batch;
  batch.reserve(count);
  for (int i = 0; i < count; ++i) {
    RngStream stream(derive_seed(master_seed, tag,
                                 static_cast<std::uint64_t>(base) + first + i));
    batch.push_back(sample_ris_channels(cfg_.geometry, cfg_.dims.num_antennas,
                                        cfg_.dims.num_ris_elements,
                                        cfg_.dims.num_users, stream));
  }
  return batch;
}

ad::Var RisGnnTask::chunk_loss(ad::Tape& tape,
                               const std::vector<ad::Var>& pvars,
                               std::uint64_t master_seed, long iter, int first,
                               int count, int batch) {
  auto draws = draw_batch(master_seed, "train-draw",
                          iter * static_cast<long>(batch), first, count);
  RngStream noise(derive_seed(master_seed, "train-noise",
                              static_cast<std::uint64_t>(iter), first));
  ad::Var mean_loss = gnn_->loss(tape, pvars, draws, plan_, cfg_.sigma0(),
                                 cfg_.sigma1(), cfg_.utility_kind, noise);
  return tape.scale(mean_loss, static_cast<double>(count) / batch);
}

double RisGnnTask::validation_utility(std::uint64_t master_seed, int n) {
  auto draws = draw_batch(master_seed, "valid", 0, 0, n);
  RngStream noise(derive_seed(master_seed, "valid-noise"));
  ad::Tape tape;
  auto pvars = push_params(tape, gnn_->params());
  ad::Var loss = gnn_->loss(tape, pvars, draws, plan_, cfg_.sigma0(),
                            cfg_.sigma1(), cfg_.utility_kind, noise);
  return -loss.val()(0, 0);
}

// ---------------------------------------------------------------------------
// FDD end-to-end

FddTask::FddTask(const ExperimentConfig& cfg, std::uint64_t init_seed)
    : cfg_(cfg) {
  fdd_ = std::make_shared<FddModel>(fdd_config_of(cfg), init_seed);
}

ParamStore& FddTask::params() { return fdd_->params(); }

std::vector<std::vector<Eigen::VectorXcd>> FddTask::draw_batch(
    std::uint64_t master_seed, std::string_view tag, long base, int first,
    int count) const {
  std::vector<std::vector<Eigen::VectorXcd>> batch;
  batch.reserve(count);
  for (int i = 0; i < count; ++i) {
    RngStream stream(derive_seed(master_seed, tag,
                                 static_cast<std::uint64_t>(base) + first + i));
    std::vector<Eigen::VectorXcd> users;
    for (int k = 0; k < cfg_.dims.num_users; ++k)
      users.push_back(sample_multipath(cfg_.dims.num_antennas,
                                       cfg_.dims.num_paths, cfg_.angle_min,
                                       cfg_.angle_max, stream)
                          .coeffs);
    batch.push_back(std::move(users));
  }
  return batch;
}

ad::Var FddTask::chunk_loss(ad::Tape& tape, const std::vector<ad::Var>& pvars,
                            std::uint64_t master_seed, long iter, int first,
                            int count, int batch) {
  auto draws = draw_batch(master_seed, "train-draw",
                          iter * static_cast<long>(batch), first, count);
  RngStream noise(derive_seed(master_seed, "train-noise",
                              static_cast<std::uint64_t>(iter), first));
  ad::Var mean_loss =
      fdd_->loss(tape, pvars, draws, BitMode::straight, noise);
  return tape.scale(mean_loss, static_cast<double>(count) / batch);
}

double FddTask::validation_utility(std::uint64_t master_seed, int n) {
  auto draws = draw_batch(master_seed, "valid", 0, 0, n);
  RngStream noise(derive_seed(master_seed, "valid-noise"));
  ad::Tape tape;
  auto pvars = push_params(tape, fdd_->params());
  // Hard bits: validation measures what evaluation will see.
  ad::Var loss = fdd_->loss(tape, pvars, draws, BitMode::hard, noise);
  return -loss.val()(0, 0);
}

void FddTask::post_step(long) { fdd_->project_pilot_columns(); }
double FddTask::aux_state() const { return fdd_->st_beta(); }
void FddTask::set_aux_state(double beta) { fdd_->set_st_beta(beta); }

// ---------------------------------------------------------------------------
// Active sensing

ActiveTaskBase::ActiveTaskBase(const ExperimentConfig& cfg)
    : cfg_(cfg), sensing_(sensing_config_of(cfg)) {}

std::vector<SparseMultipathChannel> ActiveTaskBase::draw_batch(
    std::uint64_t master_seed, std::string_view tag, long base, int first,
    int count) const {
  std::vector<SparseMultipathChannel> batch;
  batch.reserve(count);
  for (int i = 0; i < count; ++i) {
    RngStream stream(derive_seed(master_seed, tag,
                                 static_cast<std::uint64_t>(base) + first + i));
    batch.push_back(sample_multipath(cfg_.dims.num_antennas,
                                     cfg_.dims.num_paths, cfg_.angle_min,
                                     cfg_.angle_max, stream));
  }
  return batch;
}

double ActiveTaskBase::validation_utility(std::uint64_t master_seed, int n) {
  auto draws = draw_batch(master_seed, "valid", 0, 0, n);
  RngStream noise(derive_seed(master_seed, "valid-noise"));
  ad::Tape tape;
  auto pvars = push_params(tape, params());
  return -batch_loss(tape, pvars, draws, noise).val()(0, 0);
}

ActiveAgentTask::ActiveAgentTask(const ExperimentConfig& cfg,
                                 std::uint64_t init_seed)
    : ActiveTaskBase(cfg) {
  agent_ = std::make_shared<ActiveAgent>(sensing_, init_seed);
}

ParamStore& ActiveAgentTask::params() { return agent_->params(); }

ad::Var ActiveAgentTask::batch_loss(
    ad::Tape& tape, const std::vector<ad::Var>& pvars,
    const std::vector<SparseMultipathChannel>& draws, RngStream& noise) const {
  return agent_->loss(tape, pvars, draws, noise);
}

ad::Var ActiveAgentTask::chunk_loss(ad::Tape& tape,
                                    const std::vector<ad::Var>& pvars,
                                    std::uint64_t master_seed, long iter,
                                    int first, int count, int batch) {
  auto draws = draw_batch(master_seed, "train-draw",
                          iter * static_cast<long>(batch), first, count);
  RngStream noise(derive_seed(master_seed, "train-noise",
                              static_cast<std::uint64_t>(iter), first));
  return tape.scale(batch_loss(tape, pvars, draws, noise),
                    static_cast<double>(count) / batch);
}

LearnedFixedTask::LearnedFixedTask(const ExperimentConfig& cfg,
                                   std::uint64_t init_seed)
    : ActiveTaskBase(cfg) {
  fixed_ = std::make_shared<FixedSensing>(sensing_, FixedSensing::Mode::learned,
                                          init_seed);
}

ParamStore& LearnedFixedTask::params() { return fixed_->params(); }

ad::Var LearnedFixedTask::batch_loss(
    ad::Tape& tape, const std::vector<ad::Var>& pvars,
    const std::vector<SparseMultipathChannel>& draws, RngStream& noise) const {
  return fixed_->loss(tape, pvars, draws, noise);
}

ad::Var LearnedFixedTask::chunk_loss(ad::Tape& tape,
                                     const std::vector<ad::Var>& pvars,
                                     std::uint64_t master_seed, long iter,
                                     int first, int count, int batch) {
  auto draws = draw_batch(master_seed, "train-draw",
                          iter * static_cast<long>(batch), first, count);
  RngStream noise(derive_seed(master_seed, "train-noise",
                              static_cast<std::uint64_t>(iter), first));
  return tape.scale(batch_loss(tape, pvars, draws, noise),
                    static_cast<double>(count) / batch);
}

// ---------------------------------------------------------------------------
// LMMSE statistics with disk cache

std::shared_ptr<StackedChannelStats> stats_for(const ExperimentConfig& cfg,
                                               const std::string& cache_dir) {
  // The cached quantity depends only on the scenario (geometry, dims,
  // noise), not on the plan, sweep point, methods or seeds; hash a reduced
  // config so every sweep point shares one cache entry.
  ExperimentConfig scenario = cfg;
  scenario.sweep = {"pilot_len", {0}};
  scenario.methods = {"perfect_csi"};
  scenario.seeds = {0};
  scenario.train = TrainSection{};
  scenario.n_eval = 0;
  scenario.out_dir.clear();
  scenario.dims.pilot_len = 0;
  const std::uint64_t hash = config_hash(scenario);

  auto plan = pilot_plan_of(cfg);
  std::string path;
  if (!cache_dir.empty()) {
    std::filesystem::create_directories(cache_dir);
    char name[64];
    std::snprintf(name, sizeof(name), "stats_%016llx.plsc",
                  static_cast<unsigned long long>(hash));
    path = cache_dir + "/" + name;
    if (auto cached = load_stats_cache(path, hash)) {
      auto stats = std::make_shared<StackedChannelStats>(std::move(*cached));
      stats->sigma1 = cfg.sigma1();
      stats->attach_plan(plan);
      return stats;
    }
  }

  RngStream rng(derive_seed(hash, "stats-base"));
  auto stats = std::make_shared<StackedChannelStats>(estimate_stats(
      cfg.geometry, cfg.dims.num_antennas, cfg.dims.num_ris_elements,
      cfg.dims.num_users, plan, cfg.sigma1(), cfg.stats_draws, rng));
  if (!path.empty()) save_stats_cache(path, *stats, hash, cfg.stats_draws);
  return stats;
}

// ---------------------------------------------------------------------------
// Bundle preparation

std::uint64_t method_fingerprint(const ExperimentConfig& point,
                                 const std::string& method,
                                 std::uint64_t seed) {
  std::uint64_t h = config_hash(point);
  auto mix = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  };
  mix(method);
  mix(std::to_string(seed));
  return h;
}

namespace {

TrainConfig train_config_of(const ExperimentConfig& cfg, std::uint64_t seed) {
  TrainConfig tc;
  tc.batch = cfg.train.batch;
  tc.iters = cfg.train.iters;
  tc.lr = cfg.train.lr;
  tc.grad_chunks = cfg.train.grad_chunks;
  tc.master_seed = seed;
  tc.val_size = cfg.train.val_size;
  tc.val_every = cfg.train.val_every;
  tc.plateau_patience = cfg.train.plateau_patience;
  tc.anneal_start = cfg.train.anneal_start;
  tc.anneal_factor = cfg.train.anneal_factor;
  tc.anneal_max = cfg.train.anneal_max;
  tc.anneal_every = cfg.train.anneal_every;
  return tc;
}

bool save_checkpoint_atomic(const std::string& path,
                            const PolicyCheckpoint& ckpt) {
  const std::string tmp = path + ".tmp";
  if (!save_checkpoint(tmp, ckpt)) return false;
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  return !ec;
}

void prepare_learned(const ExperimentConfig& point, const std::string& method,
                     std::uint64_t seed, const std::string& ckpt_dir,
                     MethodBundle& bundle) {
  const std::uint64_t fp = method_fingerprint(point, method, seed);
  std::string path;
  if (!ckpt_dir.empty()) {
    std::filesystem::create_directories(ckpt_dir);
    char name[128];
    std::snprintf(name, sizeof(name), "%s_%s_%s%d_seed%llu_%016llx.plcx",
                  to_string(point.task).c_str(), method.c_str(),
                  point.sweep.axis.c_str(), point.sweep.values[0],
                  static_cast<unsigned long long>(seed),
                  static_cast<unsigned long long>(fp));
    path = ckpt_dir + "/" + name;
  }
  const std::uint64_t init_seed = derive_seed(seed, "model-init");

  auto finish = [&](TrainableTask& task, auto model_ptr) {
    if (!path.empty()) {
      if (auto ckpt = load_checkpoint(path);
          ckpt && ckpt->fingerprint == fp) {
        restore_params(task.params(), *ckpt);
        task.set_aux_state(ckpt->aux);
        return model_ptr;
      }
    }
    auto trained = train(task, train_config_of(point, seed), fp);
    restore_params(task.params(), trained);
    task.set_aux_state(trained.aux);
    if (!path.empty()) save_checkpoint_atomic(path, trained);
    return model_ptr;
  };

  if (method == "gnn") {
    RisGnnTask task(point, init_seed);
    bundle.gnn = finish(task, task.model());
  } else if (method == "dl_e2e") {
    FddTask task(point, init_seed);
    bundle.fdd = finish(task, task.model());
  } else if (method == "lstm") {
    ActiveAgentTask task(point, init_seed);
    bundle.lstm = finish(task, task.model());
  } else if (method == "learned_fixed") {
    LearnedFixedTask task(point, init_seed);
    bundle.learned_fixed = finish(task, task.model());
  } else {
    throw std::invalid_argument("prepare_learned: unknown method " + method);
  }
}

}  // namespace

MethodBundle prepare_bundle(const ExperimentConfig& point,
                            const std::vector<std::string>& methods,
                            std::uint64_t seed, const std::string& ckpt_dir,
                            const std::string& stats_cache_dir) {
  MethodBundle bundle;
  for (const auto& method : methods) {
    if (method_is_learned(method))
      prepare_learned(point, method, seed, ckpt_dir, bundle);
    else if (method == "lmmse_bcd" && !bundle.stats)
      bundle.stats = stats_for(point, stats_cache_dir);
  }
  return bundle;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

double eval_ris_draw(const ExperimentConfig& cfg, const std::string& method,
                     const MethodBundle& bundle, RngStream& stream) {
  auto channels =
      sample_ris_channels(cfg.geometry, cfg.dims.num_antennas,
                          cfg.dims.num_ris_elements, cfg.dims.num_users,
                          stream);
  RngStream noise(stream.next_u64());
  const double sigma0 = cfg.sigma0();

  if (method == "perfect_csi")
    return perfect_csi_bound(channels, cfg.p_downlink(), sigma0,
                             cfg.utility_kind);

  auto plan = pilot_plan_of(cfg);
  auto received = uplink_pilots(channels, plan, cfg.sigma1(), noise);
  RisDecision decision;
  if (method == "gnn") {
    decision = bundle.gnn->decide(matched_filter(received, plan));
  } else if (method == "lmmse_bcd") {
    auto estimate = lmmse_estimate(received, plan, *bundle.stats);
    decision = bcd_optimize(estimate, cfg.p_downlink(), sigma0,
                            cfg.utility_kind)
                   .decision;
  } else {
    throw std::invalid_argument("unknown ris method: " + method);
  }
  return utility(achievable_rates(channels, decision, sigma0),
                 cfg.utility_kind);
}

double eval_fdd_draw(const ExperimentConfig& cfg, const std::string& method,
                     const MethodBundle& bundle, RngStream& stream) {
  std::vector<Eigen::VectorXcd> channels;
  for (int k = 0; k < cfg.dims.num_users; ++k)
    channels.push_back(sample_multipath(cfg.dims.num_antennas,
                                        cfg.dims.num_paths, cfg.angle_min,
                                        cfg.angle_max, stream)
                           .coeffs);
  RngStream noise(stream.next_u64());
  const double sigma0 = cfg.sigma0();
  const double p_d = cfg.p_downlink();

  Eigen::MatrixXcd precoder;
  if (method == "dl_e2e") {
    precoder = bundle.fdd->decide(channels, sigma0, noise);
  } else if (method == "mrt") {
    precoder = mrt_full_csi(channels, p_d);
  } else if (method == "zf_csi") {
    precoder = zf_precoding(channels, p_d);
  } else if (method == "omp_zf") {
    // OMP estimation from received pilots, per-path scalar quantization at
    // B bits, ZF on the reconstructions. Rank-deficient reconstructions
    // fall back to MRT on the estimates.
    Eigen::MatrixXcd pilots(cfg.dims.num_antennas, cfg.dims.pilot_len);
    RngStream pilot_rng(derive_seed(config_hash(cfg), "omp-pilots"));
    for (int c = 0; c < pilots.cols(); ++c) {
      Eigen::VectorXcd col(cfg.dims.num_antennas);
      for (int r = 0; r < cfg.dims.num_antennas; ++r)
        col(r) = pilot_rng.cnormal();
      pilots.col(c) = col * (std::sqrt(p_d) / col.norm());
    }
    std::vector<Eigen::VectorXcd> reconstructed;
    for (const auto& h : channels) {
      auto rx = downlink_pilot_rx(h, pilots, p_d, sigma0, noise);
      auto est = omp_estimate(rx, pilots, 4 * cfg.dims.num_antennas,
                              cfg.dims.num_paths, cfg.angle_min,
                              cfg.angle_max);
      reconstructed.push_back(quantized_feedback_reconstruct(
          est.paths, cfg.dims.num_antennas, cfg.dims.feedback_bits, 4.0,
          cfg.angle_min, cfg.angle_max));
    }
    try {
      precoder = zf_precoding(reconstructed, p_d);
    } catch (const std::invalid_argument&) {
      bool all_nonzero = true;
      for (const auto& h : reconstructed)
        all_nonzero = all_nonzero && h.norm() > 0;
      precoder = all_nonzero ? mrt_full_csi(reconstructed, p_d)
                             : mrt_full_csi(channels, p_d);
    }
  } else {
    throw std::invalid_argument("unknown fdd method: " + method);
  }
  return rates_from_effective(channels, precoder, sigma0).sum();
}

double eval_active_draw(const ExperimentConfig& cfg, const std::string& method,
                        const MethodBundle& bundle, RngStream& stream) {
  auto channel =
      sample_multipath(cfg.dims.num_antennas, cfg.dims.num_paths,
                       cfg.angle_min, cfg.angle_max, stream);
  RngStream noise(stream.next_u64());
  const double sigma1 = cfg.sigma1();

  if (method == "lstm") {
    auto trace = bundle.lstm->rollout(channel, sigma1, noise);
    return normalized_gain(channel.coeffs, trace.design);
  }
  if (method == "learned_fixed") {
    auto trace = bundle.learned_fixed->rollout(channel, sigma1, noise);
    return normalized_gain(channel.coeffs, trace.design);
  }
  if (method == "random_omp") {
    SensingConfig sc = sensing_config_of(cfg);
    FixedSensing random(sc, FixedSensing::Mode::random,
                        derive_seed(config_hash(cfg), "random-sensing"));
    auto trace = random.rollout(channel, sigma1, noise);
    auto v = omp_beamformer(trace, sc.power, 4 * cfg.dims.num_antennas,
                            cfg.dims.num_paths, cfg.angle_min, cfg.angle_max);
    return normalized_gain(channel.coeffs, v);
  }
  if (method == "bisection") {
    auto res = bisection_baseline(channel, cfg.dims.stages, cfg.p_uplink(),
                                  sigma1, cfg.angle_min, cfg.angle_max, noise);
    return normalized_gain(channel.coeffs, res.design);
  }
  throw std::invalid_argument("unknown active method: " + method);
}

}  // namespace

double evaluate_draw(const ExperimentConfig& cfg, const std::string& method,
                     const MethodBundle& bundle, RngStream& stream) {
  switch (cfg.task) {
    case TaskKind::ris: return eval_ris_draw(cfg, method, bundle, stream);
    case TaskKind::fdd: return eval_fdd_draw(cfg, method, bundle, stream);
    case TaskKind::active: return eval_active_draw(cfg, method, bundle, stream);
  }
  throw std::logic_error("bad task");
}

EvalSummary evaluate_method(const ExperimentConfig& cfg,
                            const std::string& method,
                            const MethodBundle& bundle, int n_eval,
                            std::uint64_t seed) {
  return mc_evaluate(n_eval, seed, [&](RngStream& stream) {
    return evaluate_draw(cfg, method, bundle, stream);
  });
}

}  // namespace pilotbench
