// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "pilotbench/autodiff.hpp"
#include "pilotbench/rng.hpp"

namespace pilotbench {

// Ordered, named set of trainable real matrices. Order is fixed at
// construction time; the optimizer, checkpoint serialization and tape
// push/collect all rely on it.
class ParamStore {
 public:
  int add(std::string name, ad::Mat init);

  int count() const { return static_cast<int>(values_.size()); }
  ad::Mat& value(int handle) { return values_[handle]; }
  const ad::Mat& value(int handle) const { return values_[handle]; }
  const std::string& name(int handle) const { return names_[handle]; }
  int find(const std::string& name) const;  // -1 when absent

  // Flat view used by finite-difference checks and the optimizer.
  Eigen::Index flat_size() const;
  Eigen::VectorXd flatten() const;
  void unflatten(const Eigen::VectorXd& flat);

 private:
  std::vector<std::string> names_;
  std::vector<ad::Mat> values_;
};

// Pushes every parameter onto a tape as a leaf, in store order.
std::vector<ad::Var> push_params(ad::Tape& tape, const ParamStore& params);

// Reads the gradient of every parameter after tape.backward().
std::vector<ad::Mat> collect_grads(const ad::Tape& tape,
                                   const std::vector<ad::Var>& vars);

// Glorot-uniform initialization.
ad::Mat glorot(Eigen::Index rows, Eigen::Index cols, RngStream& rng);

// Fully connected stack with ReLU hidden activations and a linear output
// layer. Layers are registered in the given store under "<prefix>.w<i>" /
// "<prefix>.b<i>". Inputs are row-major batches (B x in).
class Mlp {
 public:
  Mlp() = default;
  Mlp(ParamStore& store, const std::string& prefix,
      const std::vector<int>& widths, RngStream& rng);

  ad::Var apply(ad::Tape& tape, const std::vector<ad::Var>& pvars,
                ad::Var x) const;

 private:
  std::vector<int> w_, b_;
};

}  // namespace pilotbench
