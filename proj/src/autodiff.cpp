// SPDX-License-Identifier: Apache-2.0
#include "pilotbench/autodiff.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

namespace pilotbench::ad {

const Mat& Var::val() const { return tape_->value(idx_); }

Var Tape::push(Mat value, std::function<void(Tape&, int)> backprop) {
  Node n;
  n.value = std::move(value);
  n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::leaf(Mat value) { return push(std::move(value), {}); }
Var Tape::constant(Mat value) { return push(std::move(value), {}); }

namespace {
void check_same_shape(const Var& a, const Var& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("ad: shape mismatch");
}
}  // namespace

Var Tape::add(Var a, Var b) {
  check_same_shape(a, b);
  int ia = a.idx_, ib = b.idx_;
  return push(a.val() + b.val(), [ia, ib](Tape& t, int self) {
    t.grad_ref(ia) += t.grad_ref(self);
    t.grad_ref(ib) += t.grad_ref(self);
  });
}

Var Tape::sub(Var a, Var b) {
  check_same_shape(a, b);
  int ia = a.idx_, ib = b.idx_;
  return push(a.val() - b.val(), [ia, ib](Tape& t, int self) {
    t.grad_ref(ia) += t.grad_ref(self);
    t.grad_ref(ib) -= t.grad_ref(self);
  });
}

Var Tape::mul(Var a, Var b) {
  check_same_shape(a, b);
  int ia = a.idx_, ib = b.idx_;
  return push(a.val().cwiseProduct(b.val()), [ia, ib](Tape& t, int self) {
    t.grad_ref(ia) += t.grad_ref(self).cwiseProduct(t.value(ib));
    t.grad_ref(ib) += t.grad_ref(self).cwiseProduct(t.value(ia));
  });
}

Var Tape::div(Var a, Var b) {
  check_same_shape(a, b);
  int ia = a.idx_, ib = b.idx_;
  return push(a.val().cwiseQuotient(b.val()), [ia, ib](Tape& t, int self) {
    const Mat& g = t.grad_ref(self);
    const Mat& bv = t.value(ib);
    t.grad_ref(ia) += g.cwiseQuotient(bv);
    t.grad_ref(ib) -=
        g.cwiseProduct(t.value(self)).cwiseQuotient(bv);
  });
}

Var Tape::neg(Var a) {
  int ia = a.idx_;
  return push(-a.val(), [ia](Tape& t, int self) {
    t.grad_ref(ia) -= t.grad_ref(self);
  });
}

Var Tape::scale(Var a, double s) {
  int ia = a.idx_;
  return push(a.val() * s, [ia, s](Tape& t, int self) {
    t.grad_ref(ia) += t.grad_ref(self) * s;
  });
}

Var Tape::add_scalar(Var a, double s) {
  int ia = a.idx_;
  return push(a.val().array() + s, [ia](Tape& t, int self) {
    t.grad_ref(ia) += t.grad_ref(self);
  });
}

Var Tape::matmul(Var a, Var b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("ad: matmul shapes");
  int ia = a.idx_, ib = b.idx_;
  return push(a.val() * b.val(), [ia, ib](Tape& t, int self) {
    const Mat& g = t.grad_ref(self);
    t.grad_ref(ia) += g * t.value(ib).transpose();
    t.grad_ref(ib) += t.value(ia).transpose() * g;
  });
}

Var Tape::matmul(const Mat& a, Var b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("ad: matmul shapes");
  int ib = b.idx_;
  return push(a * b.val(), [a, ib](Tape& t, int self) {
    t.grad_ref(ib) += a.transpose() * t.grad_ref(self);
  });
}

Var Tape::matmul(Var a, const Mat& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("ad: matmul shapes");
  int ia = a.idx_;
  return push(a.val() * b, [b, ia](Tape& t, int self) {
    t.grad_ref(ia) += t.grad_ref(self) * b.transpose();
  });
}

Var Tape::batch_matvec(const std::vector<Mat>& mats, Var v) {
  const auto batch = static_cast<Eigen::Index>(mats.size());
  if (v.rows() != batch) throw std::invalid_argument("ad: batch_matvec rows");
  if (batch == 0) throw std::invalid_argument("ad: batch_matvec empty");
  const Eigen::Index m = mats[0].rows();
  Mat out(batch, m);
  for (Eigen::Index i = 0; i < batch; ++i) {
    if (mats[i].cols() != v.cols() || mats[i].rows() != m)
      throw std::invalid_argument("ad: batch_matvec mat shape");
    out.row(i) = (mats[i] * v.val().row(i).transpose()).transpose();
  }
  int iv = v.idx_;
  return push(std::move(out), [mats, iv](Tape& t, int self) {
    const Mat& g = t.grad_ref(self);
    Mat& gv = t.grad_ref(iv);
    for (Eigen::Index i = 0; i < g.rows(); ++i)
      gv.row(i) += (mats[i].transpose() * g.row(i).transpose()).transpose();
  });
}

Var Tape::hcat(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("ad: hcat empty");
  const Eigen::Index r = parts[0].rows();
  Eigen::Index total = 0;
  for (const Var& p : parts) {
    if (p.rows() != r) throw std::invalid_argument("ad: hcat rows");
    total += p.cols();
  }
  Mat out(r, total);
  std::vector<int> idx;
  std::vector<Eigen::Index> widths;
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleCols(at, p.cols()) = p.val();
    idx.push_back(p.idx_);
    widths.push_back(p.cols());
    at += p.cols();
  }
  return push(std::move(out), [idx, widths](Tape& t, int self) {
    const Mat& g = t.grad_ref(self);
    Eigen::Index at2 = 0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      t.grad_ref(idx[k]) += g.middleCols(at2, widths[k]);
      at2 += widths[k];
    }
  });
}

Var Tape::slice_cols(Var a, Eigen::Index first, Eigen::Index count) {
  if (first < 0 || first + count > a.cols())
    throw std::invalid_argument("ad: slice_cols range");
  int ia = a.idx_;
  return push(a.val().middleCols(first, count),
              [ia, first, count](Tape& t, int self) {
                t.grad_ref(ia).middleCols(first, count) += t.grad_ref(self);
              });
}

Var Tape::rowsum(Var a) {
  int ia = a.idx_;
  return push(a.val().rowwise().sum(), [ia](Tape& t, int self) {
    t.grad_ref(ia) +=
        t.grad_ref(self) * Mat::Ones(1, t.value(ia).cols());
  });
}

Var Tape::sum_all(Var a) {
  int ia = a.idx_;
  Mat out(1, 1);
  out(0, 0) = a.val().sum();
  return push(std::move(out), [ia](Tape& t, int self) {
    t.grad_ref(ia).array() += t.grad_ref(self)(0, 0);
  });
}

Var Tape::mean_all(Var a) {
  const double inv = 1.0 / static_cast<double>(a.rows() * a.cols());
  return scale(sum_all(a), inv);
}

Var Tape::broadcast_cols(Var col, Eigen::Index n) {
  if (col.cols() != 1) throw std::invalid_argument("ad: broadcast_cols");
  int ia = col.idx_;
  return push(col.val() * Mat::Ones(1, n), [ia](Tape& t, int self) {
    t.grad_ref(ia) += t.grad_ref(self).rowwise().sum();
  });
}

Var Tape::add_rowvec(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols())
    throw std::invalid_argument("ad: add_rowvec shapes");
  int ia = a.idx_, ir = row.idx_;
  Mat out = a.val();
  out.rowwise() += row.val().row(0);
  return push(std::move(out), [ia, ir](Tape& t, int self) {
    const Mat& g = t.grad_ref(self);
    t.grad_ref(ia) += g;
    t.grad_ref(ir) += g.colwise().sum();
  });
}

Var Tape::relu(Var a) {
  int ia = a.idx_;
  return push(a.val().cwiseMax(0.0), [ia](Tape& t, int self) {
    t.grad_ref(ia) +=
        t.grad_ref(self).cwiseProduct((t.value(ia).array() > 0.0).cast<double>().matrix());
  });
}

Var Tape::tanh_(Var a) {
  int ia = a.idx_;
  return push(a.val().array().tanh(), [ia](Tape& t, int self) {
    const Mat& y = t.value(self);
    t.grad_ref(ia).array() +=
        t.grad_ref(self).array() * (1.0 - y.array().square());
  });
}

Var Tape::sigmoid(Var a) {
  int ia = a.idx_;
  Mat out = (1.0 / (1.0 + (-a.val().array()).exp())).matrix();
  return push(std::move(out), [ia](Tape& t, int self) {
    const Mat& y = t.value(self);
    t.grad_ref(ia).array() +=
        t.grad_ref(self).array() * y.array() * (1.0 - y.array());
  });
}

Var Tape::exp_(Var a) {
  int ia = a.idx_;
  return push(a.val().array().exp(), [ia](Tape& t, int self) {
    t.grad_ref(ia).array() +=
        t.grad_ref(self).array() * t.value(self).array();
  });
}

Var Tape::log_(Var a) {
  int ia = a.idx_;
  return push(a.val().array().log(), [ia](Tape& t, int self) {
    t.grad_ref(ia).array() +=
        t.grad_ref(self).array() / t.value(ia).array();
  });
}

Var Tape::sqrt_(Var a) {
  int ia = a.idx_;
  return push(a.val().array().sqrt(), [ia](Tape& t, int self) {
    t.grad_ref(ia).array() +=
        t.grad_ref(self).array() * 0.5 / t.value(self).array();
  });
}

Var Tape::square(Var a) {
  int ia = a.idx_;
  return push(a.val().array().square(), [ia](Tape& t, int self) {
    t.grad_ref(ia).array() +=
        t.grad_ref(self).array() * 2.0 * t.value(ia).array();
  });
}

Var Tape::clamp_min(Var a, double lo) {
  int ia = a.idx_;
  return push(a.val().cwiseMax(lo), [ia, lo](Tape& t, int self) {
    t.grad_ref(ia).array() +=
        t.grad_ref(self).array() *
        (t.value(ia).array() > lo).cast<double>();
  });
}

Var Tape::cwise_max(Var a, Var b) {
  check_same_shape(a, b);
  int ia = a.idx_, ib = b.idx_;
  return push(a.val().cwiseMax(b.val()), [ia, ib](Tape& t, int self) {
    // Ties route to the first argument so the subgradient is deterministic.
    Eigen::ArrayXXd take_a =
        (t.value(ia).array() >= t.value(ib).array()).cast<double>();
    t.grad_ref(ia).array() += t.grad_ref(self).array() * take_a;
    t.grad_ref(ib).array() += t.grad_ref(self).array() * (1.0 - take_a);
  });
}

Var Tape::cwise_min(Var a, Var b) {
  check_same_shape(a, b);
  int ia = a.idx_, ib = b.idx_;
  return push(a.val().cwiseMin(b.val()), [ia, ib](Tape& t, int self) {
    Eigen::ArrayXXd take_a =
        (t.value(ia).array() <= t.value(ib).array()).cast<double>();
    t.grad_ref(ia).array() += t.grad_ref(self).array() * take_a;
    t.grad_ref(ib).array() += t.grad_ref(self).array() * (1.0 - take_a);
  });
}

Var Tape::sign_st(Var a, double beta) {
  int ia = a.idx_;
  Mat out = (a.val().array() >= 0.0).cast<double>() * 2.0 - 1.0;
  return push(std::move(out), [ia, beta](Tape& t, int self) {
    Eigen::ArrayXXd th = (beta * t.value(ia).array()).tanh();
    t.grad_ref(ia).array() +=
        t.grad_ref(self).array() * beta * (1.0 - th.square());
  });
}

void Tape::backward(Var out) {
  if (ran_backward_) throw std::logic_error("ad: backward already ran");
  if (out.rows() != 1 || out.cols() != 1)
    throw std::invalid_argument("ad: backward needs a scalar output");
  ran_backward_ = true;
  for (Node& n : nodes_) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  nodes_[out.idx_].grad(0, 0) = 1.0;
  for (int i = out.idx_; i >= 0; --i) {
    if (nodes_[i].backprop) nodes_[i].backprop(*this, i);
  }
}

const Mat& Tape::grad(Var v) const {
  if (!ran_backward_) throw std::logic_error("ad: backward has not run");
  return nodes_[v.idx_].grad;
}

}  // namespace pilotbench::ad
