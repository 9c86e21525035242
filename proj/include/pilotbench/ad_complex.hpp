// SPDX-License-Identifier: Apache-2.0
//
// Complex-valued composites over the real tape. A CVar is a pair of
// same-shape real nodes (re, im); every op expands to the usual four-real
// form. Batches ride along rows, so a B x n CVar is a batch of B complex
// row vectors.
#pragma once

#include <Eigen/Dense>

#include "pilotbench/autodiff.hpp"

namespace pilotbench::ad {

using CMat = Eigen::MatrixXcd;

struct CVar {
  Var re, im;
  Eigen::Index rows() const { return re.rows(); }
  Eigen::Index cols() const { return re.cols(); }
};

inline CVar cconstant(Tape& t, const CMat& z) {
  return {t.constant(z.real()), t.constant(z.imag())};
}

inline CVar cadd(Tape& t, CVar a, CVar b) {
  return {t.add(a.re, b.re), t.add(a.im, b.im)};
}

inline CVar csub(Tape& t, CVar a, CVar b) {
  return {t.sub(a.re, b.re), t.sub(a.im, b.im)};
}

inline CVar cconj(Tape& t, CVar a) { return {a.re, t.neg(a.im)}; }

// Elementwise complex product.
inline CVar cmul(Tape& t, CVar a, CVar b) {
  Var re = t.sub(t.mul(a.re, b.re), t.mul(a.im, b.im));
  Var im = t.add(t.mul(a.re, b.im), t.mul(a.im, b.re));
  return {re, im};
}

// Elementwise |z|^2; real result.
inline Var cabs2(Tape& t, CVar a) {
  return t.add(t.square(a.re), t.square(a.im));
}

// Row-wise complex inner sum: for B x n inputs returns B x 1 with
// entry_i = sum_j a(i,j) * b(i,j). No conjugation; callers conjugate
// explicitly where the formula requires it.
inline CVar crowdot(Tape& t, CVar a, CVar b) {
  CVar p = cmul(t, a, b);
  return {t.rowsum(p.re), t.rowsum(p.im)};
}

// Per-sample complex matrix-vector product out.row(i) = mats[i] * v.row(i)^T
// with constant complex matrices and a CVar batch of row vectors.
inline CVar cbatch_matvec(Tape& t, const std::vector<CMat>& mats, CVar v) {
  std::vector<Mat> re(mats.size()), im(mats.size());
  for (std::size_t i = 0; i < mats.size(); ++i) {
    re[i] = mats[i].real();
    im[i] = mats[i].imag();
  }
  Var out_re = t.sub(t.batch_matvec(re, v.re), t.batch_matvec(im, v.im));
  Var out_im = t.add(t.batch_matvec(re, v.im), t.batch_matvec(im, v.re));
  return {out_re, out_im};
}

// Normalizes every complex entry to unit modulus, flooring the magnitude at
// eps so the map stays differentiable almost everywhere.
inline CVar cnormalize_entries(Tape& t, CVar a, double eps = 1e-12) {
  Var mag = t.clamp_min(t.sqrt_(cabs2(t, a)), eps);
  return {t.div(a.re, mag), t.div(a.im, mag)};
}

// Scales each row of a to unit L2 norm (complex vector norm across cols).
inline CVar cnormalize_rows(Tape& t, CVar a, double eps = 1e-30) {
  Var n2 = t.clamp_min(t.rowsum(cabs2(t, a)), eps);
  Var inv = t.div(t.constant(Mat::Ones(a.rows(), 1)), t.sqrt_(n2));
  Var invb = t.broadcast_cols(inv, a.cols());
  return {t.mul(a.re, invb), t.mul(a.im, invb)};
}

}  // namespace pilotbench::ad
