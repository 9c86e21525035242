// SPDX-License-Identifier: Apache-2.0
#include "pilotbench/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace pilotbench {

int ParamStore::add(std::string name, ad::Mat init) {
  if (find(name) >= 0)
    throw std::invalid_argument("duplicate parameter name: " + name);
  names_.push_back(std::move(name));
  values_.push_back(std::move(init));
  return static_cast<int>(values_.size()) - 1;
}

int ParamStore::find(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return static_cast<int>(i);
  return -1;
}

Eigen::Index ParamStore::flat_size() const {
  Eigen::Index n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

Eigen::VectorXd ParamStore::flatten() const {
  Eigen::VectorXd out(flat_size());
  Eigen::Index at = 0;
  for (const auto& v : values_) {
    out.segment(at, v.size()) = Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
    at += v.size();
  }
  return out;
}

void ParamStore::unflatten(const Eigen::VectorXd& flat) {
  if (flat.size() != flat_size())
    throw std::invalid_argument("unflatten: size mismatch");
  Eigen::Index at = 0;
  for (auto& v : values_) {
    Eigen::Map<Eigen::VectorXd>(v.data(), v.size()) = flat.segment(at, v.size());
    at += v.size();
  }
}

std::vector<ad::Var> push_params(ad::Tape& tape, const ParamStore& params) {
  std::vector<ad::Var> vars;
  vars.reserve(params.count());
  for (int i = 0; i < params.count(); ++i) vars.push_back(tape.leaf(params.value(i)));
  return vars;
}

std::vector<ad::Mat> collect_grads(const ad::Tape& tape,
                                   const std::vector<ad::Var>& vars) {
  std::vector<ad::Mat> grads;
  grads.reserve(vars.size());
  for (const auto& v : vars) grads.push_back(tape.grad(v));
  return grads;
}

ad::Mat glorot(Eigen::Index rows, Eigen::Index cols, RngStream& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  ad::Mat m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i)
      m(i, j) = rng.uniform(-limit, limit);
  return m;
}

Mlp::Mlp(ParamStore& store, const std::string& prefix,
         const std::vector<int>& widths, RngStream& rng) {
  if (widths.size() < 2) throw std::invalid_argument("Mlp: need >= 2 widths");
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    w_.push_back(store.add(prefix + ".w" + std::to_string(l),
                           glorot(widths[l], widths[l + 1], rng)));
    b_.push_back(store.add(prefix + ".b" + std::to_string(l),
                           ad::Mat::Zero(1, widths[l + 1])));
  }
}

ad::Var Mlp::apply(ad::Tape& tape, const std::vector<ad::Var>& pvars,
                   ad::Var x) const {
  ad::Var h = x;
  for (std::size_t l = 0; l < w_.size(); ++l) {
    h = tape.add_rowvec(tape.matmul(h, pvars[w_[l]]), pvars[b_[l]]);
    if (l + 1 < w_.size()) h = tape.relu(h);
  }
  return h;
}

}  // namespace pilotbench
