// SPDX-License-Identifier: Apache-2.0
#include "pilotbench/engine.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "pilotbench/parallel.hpp"

namespace pilotbench {

Adam::Adam(ParamStore& params, double lr) : params_(params), lr_(lr) {
  for (int i = 0; i < params.count(); ++i) {
    m_.push_back(ad::Mat::Zero(params.value(i).rows(), params.value(i).cols()));
    v_.push_back(ad::Mat::Zero(params.value(i).rows(), params.value(i).cols()));
  }
}

void Adam::step(const std::vector<ad::Mat>& grads) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  for (int i = 0; i < params_.count(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
    v_[i] = beta2_ * v_[i].array().matrix() +
            (1.0 - beta2_) * grads[i].cwiseProduct(grads[i]);
    params_.value(i).array() -=
        lr_ * (m_[i].array() / bc1) /
        ((v_[i].array() / bc2).sqrt() + eps_);
  }
}

void Adam::set_state(std::vector<ad::Mat> m, std::vector<ad::Mat> v, long t) {
  m_ = std::move(m);
  v_ = std::move(v);
  t_ = t;
}

namespace {

constexpr char kCkptMagic[5] = {'P', 'L', 'C', 'X', '1'};

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
bool read_pod(std::ifstream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return bool(in);
}

void write_named(std::ofstream& out,
                 const std::vector<std::pair<std::string, ad::Mat>>& arrays) {
  write_pod(out, static_cast<std::uint32_t>(arrays.size()));
  for (const auto& [name, mat] : arrays) {
    write_pod(out, static_cast<std::uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod(out, std::uint8_t{0});  // dtype f64
    write_pod(out, static_cast<std::uint32_t>(mat.rows()));
    write_pod(out, static_cast<std::uint32_t>(mat.cols()));
    out.write(reinterpret_cast<const char*>(mat.data()),
              static_cast<std::streamsize>(sizeof(double) * mat.size()));
  }
}

bool read_named(std::ifstream& in,
                std::vector<std::pair<std::string, ad::Mat>>& arrays) {
  std::uint32_t count = 0;
  if (!read_pod(in, count)) return false;
  arrays.clear();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint16_t len = 0;
    if (!read_pod(in, len)) return false;
    std::string name(len, '\0');
    in.read(name.data(), len);
    std::uint8_t dtype = 0;
    std::uint32_t rows = 0, cols = 0;
    if (!read_pod(in, dtype) || dtype != 0) return false;
    if (!read_pod(in, rows) || !read_pod(in, cols)) return false;
    ad::Mat mat(rows, cols);
    in.read(reinterpret_cast<char*>(mat.data()),
            static_cast<std::streamsize>(sizeof(double) * mat.size()));
    if (!in) return false;
    arrays.emplace_back(std::move(name), std::move(mat));
  }
  return true;
}

}  // namespace

bool save_checkpoint(const std::string& path, const PolicyCheckpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return false;
  out.write(kCkptMagic, 5);
  write_pod(out, std::uint32_t{1});
  write_pod(out, ckpt.fingerprint);
  write_pod(out, static_cast<std::int64_t>(ckpt.iteration));
  write_pod(out, ckpt.aux);
  write_pod(out, static_cast<std::int64_t>(ckpt.adam_step));
  write_named(out, ckpt.parameters);
  std::vector<std::pair<std::string, ad::Mat>> opt;
  for (const auto& [n, m] : ckpt.adam_m) opt.emplace_back("m/" + n, m);
  for (const auto& [n, m] : ckpt.adam_v) opt.emplace_back("v/" + n, m);
  write_named(out, opt);
  write_pod(out, static_cast<std::uint32_t>(ckpt.val_history.size()));
  for (const auto& [it, val] : ckpt.val_history) {
    write_pod(out, static_cast<std::int64_t>(it));
    write_pod(out, val);
  }
  return bool(out);
}

std::optional<PolicyCheckpoint> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[5];
  in.read(magic, 5);
  if (!in || std::memcmp(magic, kCkptMagic, 5) != 0) return std::nullopt;
  std::uint32_t version = 0;
  if (!read_pod(in, version) || version != 1) return std::nullopt;

  PolicyCheckpoint ckpt;
  std::int64_t iteration = 0, adam_step = 0;
  if (!read_pod(in, ckpt.fingerprint) || !read_pod(in, iteration) ||
      !read_pod(in, ckpt.aux) || !read_pod(in, adam_step))
    return std::nullopt;
  ckpt.iteration = iteration;
  ckpt.adam_step = adam_step;
  if (!read_named(in, ckpt.parameters)) return std::nullopt;
  std::vector<std::pair<std::string, ad::Mat>> opt;
  if (!read_named(in, opt)) return std::nullopt;
  for (auto& [name, mat] : opt) {
    if (name.rfind("m/", 0) == 0)
      ckpt.adam_m.emplace_back(name.substr(2), std::move(mat));
    else if (name.rfind("v/", 0) == 0)
      ckpt.adam_v.emplace_back(name.substr(2), std::move(mat));
  }
  std::uint32_t n_val = 0;
  if (!read_pod(in, n_val)) return std::nullopt;
  for (std::uint32_t i = 0; i < n_val; ++i) {
    std::int64_t it = 0;
    double val = 0;
    if (!read_pod(in, it) || !read_pod(in, val)) return std::nullopt;
    ckpt.val_history.emplace_back(it, val);
  }
  return ckpt;
}

void restore_params(ParamStore& params, const PolicyCheckpoint& ckpt) {
  if (static_cast<int>(ckpt.parameters.size()) != params.count())
    throw std::invalid_argument("restore_params: parameter count mismatch");
  for (const auto& [name, mat] : ckpt.parameters) {
    const int h = params.find(name);
    if (h < 0)
      throw std::invalid_argument("restore_params: unknown parameter " + name);
    if (params.value(h).rows() != mat.rows() ||
        params.value(h).cols() != mat.cols())
      throw std::invalid_argument("restore_params: shape mismatch for " + name);
    params.value(h) = mat;
  }
}

namespace {

PolicyCheckpoint snapshot(const TrainableTask& task_const, ParamStore& params,
                          Adam& opt, std::uint64_t fingerprint, long iter,
                          double aux,
                          const std::vector<std::pair<long, double>>& hist) {
  (void)task_const;
  PolicyCheckpoint ckpt;
  ckpt.fingerprint = fingerprint;
  ckpt.iteration = iter;
  ckpt.aux = aux;
  ckpt.adam_step = opt.steps();
  for (int i = 0; i < params.count(); ++i) {
    ckpt.parameters.emplace_back(params.name(i), params.value(i));
    ckpt.adam_m.emplace_back(params.name(i), opt.m()[i]);
    ckpt.adam_v.emplace_back(params.name(i), opt.v()[i]);
  }
  ckpt.val_history = hist;
  return ckpt;
}

}  // namespace

PolicyCheckpoint train(TrainableTask& task, const TrainConfig& cfg,
                       std::uint64_t fingerprint) {
  ParamStore& params = task.params();
  Adam opt(params, cfg.lr);
  task.set_aux_state(cfg.anneal_start);

  std::vector<std::pair<long, double>> history;
  double best_utility = -std::numeric_limits<double>::infinity();
  PolicyCheckpoint best =
      snapshot(task, params, opt, fingerprint, 0, task.aux_state(), history);
  int stale_validations = 0;

  auto validate_at = [&](long iter) {
    const double utility =
        task.validation_utility(cfg.master_seed, cfg.val_size);
    history.emplace_back(iter, utility);
    if (utility > best_utility) {
      best_utility = utility;
      best = snapshot(task, params, opt, fingerprint, iter, task.aux_state(),
                      history);
      stale_validations = 0;
    } else {
      if (++stale_validations >= cfg.plateau_patience) {
        opt.set_lr(opt.lr() * 0.5);
        stale_validations = 0;
      }
    }
  };

  if (cfg.iters == 0) {
    validate_at(0);
    best.val_history = history;
    return best;
  }

  const int chunks = std::max(1, std::min(cfg.grad_chunks, cfg.batch));
  std::vector<std::vector<ad::Mat>> chunk_grads(chunks);
  std::vector<double> chunk_losses(chunks);

  for (long iter = 0; iter < cfg.iters; ++iter) {
    par::for_each(chunks, [&](std::int64_t c) {
      const int first = static_cast<int>(c) * cfg.batch / chunks;
      const int last = static_cast<int>(c + 1) * cfg.batch / chunks;
      ad::Tape tape;
      auto pvars = push_params(tape, params);
      ad::Var loss = task.chunk_loss(tape, pvars, cfg.master_seed, iter, first,
                                     last - first, cfg.batch);
      tape.backward(loss);
      chunk_losses[c] = loss.val()(0, 0);
      chunk_grads[c] = collect_grads(tape, pvars);
    });

    double loss_total = 0.0;
    for (int c = 0; c < chunks; ++c) loss_total += chunk_losses[c];
    if (!std::isfinite(loss_total)) {
      best.val_history = history;
      return best;  // divergence: last finite state wins
    }

    std::vector<ad::Mat> grads = chunk_grads[0];
    for (int c = 1; c < chunks; ++c)
      for (std::size_t i = 0; i < grads.size(); ++i)
        grads[i] += chunk_grads[c][i];

    opt.step(grads);
    task.post_step(iter);

    if (cfg.anneal_every > 0 && (iter + 1) % cfg.anneal_every == 0)
      task.set_aux_state(std::min(task.aux_state() * cfg.anneal_factor,
                                  cfg.anneal_max));

    if ((iter + 1) % cfg.val_every == 0 || iter + 1 == cfg.iters)
      validate_at(iter + 1);
  }

  best.val_history = history;
  return best;
}

EvalSummary mc_evaluate(int n, std::uint64_t seed,
                        const std::function<double(RngStream&)>& draw_fn) {
  std::vector<double> values(n);
  par::for_each(n, [&](std::int64_t i) {
    RngStream stream(derive_seed(seed, "eval", static_cast<std::uint64_t>(i)));
    values[i] = draw_fn(stream);
  });
  EvalSummary summary;
  summary.n = n;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= std::max(n, 1);
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  summary.mean = mean;
  summary.ci_halfwidth =
      n > 1 ? 1.96 * std::sqrt(var / (n - 1) / n)
            : std::numeric_limits<double>::quiet_NaN();
  return summary;
}

}  // namespace pilotbench
