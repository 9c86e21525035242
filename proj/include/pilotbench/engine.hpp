// SPDX-License-Identifier: Apache-2.0
//
// Training and evaluation substrate: Adam over a ParamStore, an
// infinite-data training loop with chunked gradient accumulation,
// best-validation checkpointing, and deterministic Monte-Carlo evaluation.
// All data streams derive from (master seed, tag, index), with distinct
// tags for training, validation and evaluation.
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pilotbench/nn.hpp"

namespace pilotbench {

struct TrainConfig {
  int batch = 128;
  long iters = 2000;
  double lr = 1e-3;
  int grad_chunks = 8;       // fixed chunking; results independent of threads
  std::uint64_t master_seed = 1;
  int val_size = 1000;
  int val_every = 200;
  int plateau_patience = 3;  // validations without improvement -> lr /= 2
  // Straight-through slope annealing (tasks that use it).
  double anneal_start = 1.0;
  double anneal_factor = 1.2;
  double anneal_max = 30.0;
  int anneal_every = 0;      // iterations per annealing step; 0 disables
};

// A model the engine can train. chunk_loss must return the loss of samples
// [first, first+count) of the given iteration scaled so the chunk losses of
// one iteration sum to the batch mean loss.
class TrainableTask {
 public:
  virtual ~TrainableTask() = default;
  virtual ParamStore& params() = 0;
  virtual ad::Var chunk_loss(ad::Tape& tape,
                             const std::vector<ad::Var>& pvars,
                             std::uint64_t master_seed, long iter, int first,
                             int count, int batch) = 0;
  // Mean utility on the fixed validation set (higher is better).
  virtual double validation_utility(std::uint64_t master_seed, int n) = 0;
  // Called after every optimizer step (constraint projections).
  virtual void post_step(long iter) { (void)iter; }
  // Scalar model state carried through checkpoints (annealing slope).
  virtual double aux_state() const { return 0.0; }
  virtual void set_aux_state(double aux) { (void)aux; }
};

// Serialized training state. Binary layout ("PLCX1", little endian):
//   magic[5] version:u32 fingerprint:u64 iteration:i64 aux:f64 adam_t:i64
//   n_params:u32 { name_len:u16 name dtype:u8(0=f64) rows:u32 cols:u32 data }
//   n_opt:u32 (same record layout, names prefixed m/ and v/)
//   n_val:u32 { iter:i64 utility:f64 }
struct PolicyCheckpoint {
  std::uint64_t fingerprint = 0;
  long iteration = 0;
  double aux = 0.0;
  long adam_step = 0;
  std::vector<std::pair<std::string, ad::Mat>> parameters;
  std::vector<std::pair<std::string, ad::Mat>> adam_m, adam_v;
  std::vector<std::pair<long, double>> val_history;
};

bool save_checkpoint(const std::string& path, const PolicyCheckpoint& ckpt);
std::optional<PolicyCheckpoint> load_checkpoint(const std::string& path);

// Loads checkpointed parameters into a store; the names and shapes must
// match exactly.
void restore_params(ParamStore& params,
                    const PolicyCheckpoint& ckpt);

class Adam {
 public:
  Adam(ParamStore& params, double lr);
  void step(const std::vector<ad::Mat>& grads);
  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  long steps() const { return t_; }
  std::vector<ad::Mat>& m() { return m_; }
  std::vector<ad::Mat>& v() { return v_; }
  void set_state(std::vector<ad::Mat> m, std::vector<ad::Mat> v, long t);

 private:
  ParamStore& params_;
  double lr_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  long t_ = 0;
  std::vector<ad::Mat> m_, v_;
};

// Runs the training loop: fresh draws every iteration, chunked gradient
// accumulation (parallel across chunks, reduced in fixed order), Adam,
// periodic validation, best-validation checkpoint returned. Aborts on a
// non-finite loss and returns the last finite state. Deterministic given
// the config.
PolicyCheckpoint train(TrainableTask& task, const TrainConfig& cfg,
                       std::uint64_t fingerprint);

// Deterministic Monte-Carlo summary over n draws: mean and a 95%
// normal-approximation confidence halfwidth (NaN when n == 1). draw_fn gets
// a stream derived from (seed, "eval", index); draws run in parallel and
// reduce in index order.
struct EvalSummary {
  double mean = 0.0;
  double ci_halfwidth = 0.0;
  int n = 0;
};

EvalSummary mc_evaluate(int n, std::uint64_t seed,
                        const std::function<double(RngStream&)>& draw_fn);

}  // namespace pilotbench
