// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode automatic differentiation over real Eigen matrices. The tape
// is rebuilt for every loss evaluation (dynamic graph); batches ride along
// the row dimension so the node count is independent of the batch size.
// Complex quantities are carried as separate real/imaginary parts; see
// ad_complex.hpp for the composite ops.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

namespace pilotbench::ad {

using Mat = Eigen::MatrixXd;

class Tape;

// Lightweight handle into a tape. Valid for the lifetime of the tape that
// created it.
class Var {
 public:
  Var() = default;
  bool valid() const { return tape_ != nullptr; }
  const Mat& val() const;
  Eigen::Index rows() const { return val().rows(); }
  Eigen::Index cols() const { return val().cols(); }

 private:
  friend class Tape;
  Var(Tape* tape, int idx) : tape_(tape), idx_(idx) {}
  Tape* tape_ = nullptr;
  int idx_ = -1;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaves. Both participate in backward; "leaf" is what parameters use.
  Var leaf(Mat value);
  Var constant(Mat value);

  // Elementwise arithmetic (same shape).
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  Var neg(Var a);

  // Scalar arithmetic.
  Var scale(Var a, double s);
  Var add_scalar(Var a, double s);

  // Matrix product; constant-operand overloads avoid putting large fixed
  // data on the tape.
  Var matmul(Var a, Var b);
  Var matmul(const Mat& a, Var b);
  Var matmul(Var a, const Mat& b);

  // Per-row matrix-vector product with a per-row constant matrix:
  // out.row(i) = mats[i] * v.row(i)^T. v is B x n, mats are m x n, out is
  // B x m. This is the batched linear map used when every sample in a batch
  // carries its own channel matrix.
  Var batch_matvec(const std::vector<Mat>& mats, Var v);

  // Structure ops.
  Var hcat(const std::vector<Var>& parts);
  Var slice_cols(Var a, Eigen::Index first, Eigen::Index count);
  Var rowsum(Var a);                        // B x n -> B x 1
  Var sum_all(Var a);                       // -> 1 x 1
  Var mean_all(Var a);                      // -> 1 x 1
  Var broadcast_cols(Var col, Eigen::Index n);  // B x 1 -> B x n
  Var add_rowvec(Var a, Var row);           // B x n + 1 x n

  // Elementwise nonlinearities.
  Var relu(Var a);
  Var tanh_(Var a);
  Var sigmoid(Var a);
  Var exp_(Var a);
  Var log_(Var a);
  Var sqrt_(Var a);
  Var square(Var a);
  Var clamp_min(Var a, double lo);
  Var cwise_max(Var a, Var b);
  Var cwise_min(Var a, Var b);

  // Binary sign with a smooth backward: forward is sign(x) in {-1,+1},
  // backward passes d/dx tanh(beta*x). The straight-through estimator.
  Var sign_st(Var a, double beta);

  // Runs backpropagation from a 1x1 output. Gradients accumulate into every
  // node; read them with grad(). May be called once per tape.
  void backward(Var out);

  const Mat& grad(Var v) const;
  const Mat& value(int idx) const { return nodes_[idx].value; }
  std::size_t size() const { return nodes_.size(); }

 private:
  friend class Var;
  struct Node {
    Mat value;
    Mat grad;
    // Propagates this node's grad into its parents. Empty for leaves.
    std::function<void(Tape&, int)> backprop;
  };

  Var push(Mat value, std::function<void(Tape&, int)> backprop);
  Mat& grad_ref(int idx) { return nodes_[idx].grad; }

  std::vector<Node> nodes_;
  bool ran_backward_ = false;
};

}  // namespace pilotbench::ad
