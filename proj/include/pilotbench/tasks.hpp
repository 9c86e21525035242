// SPDX-License-Identifier: Apache-2.0
//
// Bridges between experiment configurations, the learned models and the
// training/evaluation engine: one TrainableTask adapter per learned method
// and a shared per-method Monte-Carlo evaluator. Evaluation draws are
// paired across methods: draw i always sees the same channel realization.
#pragma once

#include <memory>
#include <string>

#include "pilotbench/active_sensing.hpp"
#include "pilotbench/config.hpp"
#include "pilotbench/engine.hpp"
#include "pilotbench/fdd_feedback.hpp"
#include "pilotbench/ris_baselines.hpp"
#include "pilotbench/ris_gnn.hpp"

namespace pilotbench {

// Model and scenario objects for one sweep point; only the members a
// config's methods need are populated.
struct MethodBundle {
  std::shared_ptr<RisGnn> gnn;
  std::shared_ptr<StackedChannelStats> stats;  // lmmse_bcd
  std::shared_ptr<FddModel> fdd;
  std::shared_ptr<ActiveAgent> lstm;
  std::shared_ptr<FixedSensing> learned_fixed;
};

bool method_is_learned(const std::string& method);

// Training adapters. The master seed passed by the engine seeds the data
// streams; model construction takes its own init seed.

class RisGnnTask : public TrainableTask {
 public:
  RisGnnTask(const ExperimentConfig& cfg, std::uint64_t init_seed);
  ParamStore& params() override;
  ad::Var chunk_loss(ad::Tape&, const std::vector<ad::Var>&, std::uint64_t,
                     long, int, int, int) override;
  double validation_utility(std::uint64_t master_seed, int n) override;
  std::shared_ptr<RisGnn> model() { return gnn_; }

 private:
  std::vector<RisChannelSet> draw_batch(std::uint64_t master_seed,
                                        std::string_view tag, long base,
                                        int first, int count) const;
  ExperimentConfig cfg_;
  RisPilotPlan plan_;
  std::shared_ptr<RisGnn> gnn_;
};

class FddTask : public TrainableTask {
 public:
  FddTask(const ExperimentConfig& cfg, std::uint64_t init_seed);
  ParamStore& params() override;
  ad::Var chunk_loss(ad::Tape&, const std::vector<ad::Var>&, std::uint64_t,
                     long, int, int, int) override;
  double validation_utility(std::uint64_t master_seed, int n) override;
  void post_step(long iter) override;
  double aux_state() const override;
  void set_aux_state(double beta) override;
  std::shared_ptr<FddModel> model() { return fdd_; }

 private:
  std::vector<std::vector<Eigen::VectorXcd>> draw_batch(
      std::uint64_t master_seed, std::string_view tag, long base, int first,
      int count) const;
  ExperimentConfig cfg_;
  std::shared_ptr<FddModel> fdd_;
};

// Shared by the LSTM agent and the learned fixed-sensing baseline.
class ActiveTaskBase : public TrainableTask {
 public:
  explicit ActiveTaskBase(const ExperimentConfig& cfg);
  double validation_utility(std::uint64_t master_seed, int n) override;

 protected:
  virtual ad::Var batch_loss(ad::Tape&, const std::vector<ad::Var>&,
                             const std::vector<SparseMultipathChannel>&,
                             RngStream&) const = 0;
  std::vector<SparseMultipathChannel> draw_batch(std::uint64_t master_seed,
                                                 std::string_view tag,
                                                 long base, int first,
                                                 int count) const;
  ExperimentConfig cfg_;
  SensingConfig sensing_;
};

class ActiveAgentTask : public ActiveTaskBase {
 public:
  ActiveAgentTask(const ExperimentConfig& cfg, std::uint64_t init_seed);
  ParamStore& params() override;
  ad::Var chunk_loss(ad::Tape&, const std::vector<ad::Var>&, std::uint64_t,
                     long, int, int, int) override;
  std::shared_ptr<ActiveAgent> model() { return agent_; }

 protected:
  ad::Var batch_loss(ad::Tape&, const std::vector<ad::Var>&,
                     const std::vector<SparseMultipathChannel>&,
                     RngStream&) const override;

 private:
  std::shared_ptr<ActiveAgent> agent_;
};

class LearnedFixedTask : public ActiveTaskBase {
 public:
  LearnedFixedTask(const ExperimentConfig& cfg, std::uint64_t init_seed);
  ParamStore& params() override;
  ad::Var chunk_loss(ad::Tape&, const std::vector<ad::Var>&, std::uint64_t,
                     long, int, int, int) override;
  std::shared_ptr<FixedSensing> model() { return fixed_; }

 protected:
  ad::Var batch_loss(ad::Tape&, const std::vector<ad::Var>&,
                     const std::vector<SparseMultipathChannel>&,
                     RngStream&) const override;

 private:
  std::shared_ptr<FixedSensing> fixed_;
};

// Scenario helpers shared between training, evaluation and the CLI.
SensingConfig sensing_config_of(const ExperimentConfig& cfg);
FddConfig fdd_config_of(const ExperimentConfig& cfg);
RisPilotPlan pilot_plan_of(const ExperimentConfig& cfg);
double ris_input_scale(const ExperimentConfig& cfg);

// LMMSE second-order statistics for the config's scenario, cached on disk
// under cache_dir (empty = no caching) and keyed by the scenario hash.
std::shared_ptr<StackedChannelStats> stats_for(const ExperimentConfig& cfg,
                                               const std::string& cache_dir);

// Fingerprint of one (sweep point, method, seed) training work item.
std::uint64_t method_fingerprint(const ExperimentConfig& point,
                                 const std::string& method,
                                 std::uint64_t seed);

// Trains every learned method in `methods` at one sweep point, or restores
// it from a fingerprint-matching checkpoint under ckpt_dir (empty = no
// persistence), and attaches whatever the baselines need (LMMSE stats).
MethodBundle prepare_bundle(const ExperimentConfig& point,
                            const std::vector<std::string>& methods,
                            std::uint64_t seed, const std::string& ckpt_dir,
                            const std::string& stats_cache_dir);

// Per-draw utility of one method; stream is the draw's own substream and
// must be used to sample the channel first so draws pair across methods.
double evaluate_draw(const ExperimentConfig& cfg, const std::string& method,
                     const MethodBundle& bundle, RngStream& stream);

EvalSummary evaluate_method(const ExperimentConfig& cfg,
                            const std::string& method,
                            const MethodBundle& bundle, int n_eval,
                            std::uint64_t seed);

}  // namespace pilotbench
