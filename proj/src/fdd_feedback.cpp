// SPDX-License-Identifier: Apache-2.0
#include "pilotbench/fdd_feedback.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pilotbench {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kLog2 = 0.6931471805599453;
}  // namespace

Eigen::RowVectorXcd downlink_pilot_rx(const Eigen::VectorXcd& channel,
                                      const Eigen::MatrixXcd& pilots,
                                      double column_power, double sigma0,
                                      RngStream& rng) {
  if (pilots.rows() != channel.size())
    throw std::invalid_argument("downlink_pilot_rx: shape mismatch");
  for (Eigen::Index l = 0; l < pilots.cols(); ++l)
    if (pilots.col(l).squaredNorm() > column_power * (1 + 1e-9))
      throw std::invalid_argument(
          "downlink_pilot_rx: pilot column exceeds the power constraint");
  Eigen::RowVectorXcd rx = channel.transpose() * pilots;
  if (sigma0 > 0.0)
    for (Eigen::Index l = 0; l < rx.size(); ++l) rx(l) += sigma0 * rng.cnormal();
  return rx;
}

FddModel::FddModel(const FddConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
  RngStream rng(derive_seed(init_seed, "fdd-init"));
  const int m = cfg_.num_antennas;
  const int l = cfg_.pilot_len;

  // Pilot columns start at full power in random directions.
  ad::Mat xre(m, l), xim(m, l);
  for (int c = 0; c < l; ++c) {
    Eigen::VectorXcd col(m);
    for (int r = 0; r < m; ++r) col(r) = rng.cnormal();
    col *= std::sqrt(cfg_.total_power) / col.norm();
    xre.col(c) = col.real();
    xim.col(c) = col.imag();
  }
  pilots_re_ = params_.add("pilots.re", xre);
  pilots_im_ = params_.add("pilots.im", xim);

  std::vector<int> enc{2 * l};
  for (int i = 0; i < cfg_.hidden_layers; ++i) enc.push_back(cfg_.hidden);
  enc.push_back(cfg_.feedback_bits);
  encoder_ = Mlp(params_, "encoder", enc, rng);

  std::vector<int> prec{cfg_.num_users * cfg_.feedback_bits};
  for (int i = 0; i < cfg_.hidden_layers; ++i) prec.push_back(cfg_.hidden);
  prec.push_back(2 * m * cfg_.num_users);
  precoder_ = Mlp(params_, "precoder", prec, rng);

  // Received-pilot entries have energy ~ P_d L_p + sigma0^2; normalize the
  // encoder input to that scale.
  input_scale_ = std::sqrt(cfg_.total_power * cfg_.num_paths +
                           cfg_.sigma0 * cfg_.sigma0);
}

Eigen::MatrixXcd FddModel::pilot_matrix() const {
  const ad::Mat& re = params_.value(pilots_re_);
  const ad::Mat& im = params_.value(pilots_im_);
  Eigen::MatrixXcd x(re.rows(), re.cols());
  x.real() = re;
  x.imag() = im;
  return x;
}

void FddModel::project_pilot_columns() {
  ad::Mat& re = params_.value(pilots_re_);
  ad::Mat& im = params_.value(pilots_im_);
  for (Eigen::Index c = 0; c < re.cols(); ++c) {
    const double p = re.col(c).squaredNorm() + im.col(c).squaredNorm();
    if (p > cfg_.total_power) {
      const double s = std::sqrt(cfg_.total_power / p);
      re.col(c) *= s;
      im.col(c) *= s;
    }
  }
}

namespace {

ad::Var apply_bits(ad::Tape& tape, ad::Var pre, BitMode mode, double beta) {
  switch (mode) {
    case BitMode::hard:
    case BitMode::straight:
      return tape.sign_st(pre, beta);
    case BitMode::surrogate:
      return tape.tanh_(tape.scale(pre, beta));
  }
  throw std::logic_error("apply_bits: bad mode");
}

}  // namespace

FddModel::PipelineOut FddModel::pipeline(
    ad::Tape& tape, const std::vector<ad::Var>& pvars,
    const std::vector<std::vector<Eigen::VectorXcd>>& batch, BitMode mode,
    RngStream& noise_rng) const {
  const int m = cfg_.num_antennas;
  const int l = cfg_.pilot_len;
  const int k_users = cfg_.num_users;
  const auto b_size = static_cast<Eigen::Index>(batch.size());

  ad::Var x_re = pvars[pilots_re_];
  ad::Var x_im = pvars[pilots_im_];

  // Received pilots per user: Y_k = H_k X + N_k, batched along rows.
  std::vector<ad::Var> bits(k_users);
  for (int k = 0; k < k_users; ++k) {
    ad::Mat h_re(b_size, m), h_im(b_size, m), n_re(b_size, l), n_im(b_size, l);
    for (Eigen::Index i = 0; i < b_size; ++i) {
      if (static_cast<int>(batch[i].size()) != k_users)
        throw std::invalid_argument("FddModel: bad user count in batch");
      h_re.row(i) = batch[i][k].real().transpose();
      h_im.row(i) = batch[i][k].imag().transpose();
      for (int c = 0; c < l; ++c) {
        const std::complex<double> n = cfg_.sigma0 * noise_rng.cnormal();
        n_re(i, c) = n.real();
        n_im(i, c) = n.imag();
      }
    }
    ad::Var y_re = tape.add(
        tape.sub(tape.matmul(h_re, x_re), tape.matmul(h_im, x_im)),
        tape.constant(n_re));
    ad::Var y_im = tape.add(
        tape.add(tape.matmul(h_re, x_im), tape.matmul(h_im, x_re)),
        tape.constant(n_im));
    ad::Var feats = tape.scale(tape.hcat({y_re, y_im}), 1.0 / input_scale_);
    ad::Var pre = encoder_.apply(tape, pvars, feats);
    bits[k] = apply_bits(tape, pre, mode, st_beta_);
  }

  ad::Var all_bits = tape.hcat(bits);
  ad::Var flat = precoder_.apply(tape, pvars, all_bits);

  // Exact total-power normalization across all K beamformers.
  PipelineOut out;
  std::vector<ad::CVar> raw(k_users);
  ad::Var total;
  for (int k = 0; k < k_users; ++k) {
    raw[k] = {tape.slice_cols(flat, 2 * m * k, m),
              tape.slice_cols(flat, 2 * m * k + m, m)};
    ad::Var p = tape.rowsum(ad::cabs2(tape, raw[k]));
    total = k == 0 ? p : tape.add(total, p);
  }
  ad::Var gain = tape.sqrt_(tape.div(
      tape.constant(ad::Mat::Constant(b_size, 1, cfg_.total_power)),
      tape.clamp_min(total, 1e-300)));
  ad::Var gain_b = tape.broadcast_cols(gain, m);
  out.beams.resize(k_users);
  for (int k = 0; k < k_users; ++k)
    out.beams[k] = {tape.mul(raw[k].re, gain_b), tape.mul(raw[k].im, gain_b)};
  return out;
}

Eigen::VectorXd FddModel::encoder_forward(const Eigen::RowVectorXcd& rx,
                                          BitMode mode) const {
  ad::Tape tape;
  auto pvars = push_params(tape, params_);
  ad::Mat feats(1, 2 * cfg_.pilot_len);
  for (int ell = 0; ell < cfg_.pilot_len; ++ell) {
    feats(0, ell) = rx(ell).real() / input_scale_;
    feats(0, cfg_.pilot_len + ell) = rx(ell).imag() / input_scale_;
  }
  ad::Var pre = encoder_.apply(tape, pvars, tape.constant(feats));
  ad::Var out = apply_bits(tape, pre, mode, st_beta_);
  return out.val().row(0).transpose();
}

Eigen::MatrixXcd FddModel::precoder_forward(const Eigen::VectorXd& bits) const {
  const int m = cfg_.num_antennas;
  const int k_users = cfg_.num_users;
  if (bits.size() != k_users * cfg_.feedback_bits)
    throw std::invalid_argument("precoder_forward: feedback length mismatch");
  ad::Tape tape;
  auto pvars = push_params(tape, params_);
  ad::Var flat =
      precoder_.apply(tape, pvars, tape.constant(bits.transpose()));

  Eigen::MatrixXcd w(m, k_users);
  double total = 0.0;
  for (int k = 0; k < k_users; ++k)
    for (int i = 0; i < m; ++i) {
      const std::complex<double> z(flat.val()(0, 2 * m * k + i),
                                   flat.val()(0, 2 * m * k + m + i));
      w(i, k) = z;
      total += std::norm(z);
    }
  w *= std::sqrt(cfg_.total_power / std::max(total, 1e-300));
  return w;
}

Eigen::MatrixXcd FddModel::decide(
    const std::vector<Eigen::VectorXcd>& channels, double sigma0_pilot,
    RngStream& noise_rng) const {
  const auto x = pilot_matrix();
  Eigen::VectorXd all(cfg_.num_users * cfg_.feedback_bits);
  for (int k = 0; k < cfg_.num_users; ++k) {
    auto rx = downlink_pilot_rx(channels[k], x, cfg_.total_power, sigma0_pilot,
                                noise_rng);
    all.segment(k * cfg_.feedback_bits, cfg_.feedback_bits) =
        encoder_forward(rx, BitMode::hard);
  }
  return precoder_forward(all);
}

ad::Var FddModel::loss(ad::Tape& tape, const std::vector<ad::Var>& pvars,
                       const std::vector<std::vector<Eigen::VectorXcd>>& batch,
                       BitMode mode, RngStream& noise_rng) const {
  if (batch.empty()) throw std::invalid_argument("FddModel::loss: empty batch");
  const int k_users = cfg_.num_users;
  const auto b_size = static_cast<Eigen::Index>(batch.size());

  PipelineOut net = pipeline(tape, pvars, batch, mode, noise_rng);

  ad::Var sum_rate;
  for (int k = 0; k < k_users; ++k) {
    ad::Mat h_re(b_size, cfg_.num_antennas), h_im(b_size, cfg_.num_antennas);
    for (Eigen::Index i = 0; i < b_size; ++i) {
      h_re.row(i) = batch[i][k].real().transpose();
      h_im.row(i) = batch[i][k].imag().transpose();
    }
    ad::CVar h = {tape.constant(h_re), tape.constant(h_im)};
    ad::Var signal;
    ad::Var interference = tape.constant(
        ad::Mat::Constant(b_size, 1, cfg_.sigma0 * cfg_.sigma0));
    for (int j = 0; j < k_users; ++j) {
      ad::Var p = ad::cabs2(tape, ad::crowdot(tape, h, net.beams[j]));
      if (j == k)
        signal = p;
      else
        interference = tape.add(interference, p);
    }
    ad::Var rate = tape.scale(
        tape.log_(tape.add_scalar(tape.div(signal, interference), 1.0)),
        1.0 / kLog2);
    sum_rate = k == 0 ? rate : tape.add(sum_rate, rate);
  }
  return tape.neg(tape.mean_all(sum_rate));
}

Eigen::MatrixXcd mrt_full_csi(const std::vector<Eigen::VectorXcd>& channels,
                              double total_power) {
  const int k_users = static_cast<int>(channels.size());
  if (k_users == 0) throw std::invalid_argument("mrt_full_csi: no users");
  const int m = static_cast<int>(channels[0].size());
  Eigen::MatrixXcd w(m, k_users);
  for (int k = 0; k < k_users; ++k) {
    const double norm = channels[k].norm();
    if (norm <= 0.0)
      throw std::invalid_argument("mrt_full_csi: zero channel");
    w.col(k) = channels[k].conjugate() / norm *
               std::sqrt(total_power / k_users);
  }
  return w;
}

Eigen::MatrixXcd zf_precoding(const std::vector<Eigen::VectorXcd>& channels,
                              double total_power) {
  const int k_users = static_cast<int>(channels.size());
  if (k_users == 0) throw std::invalid_argument("zf_precoding: no users");
  const int m = static_cast<int>(channels[0].size());
  if (k_users > m)
    throw std::invalid_argument("zf_precoding: more users than antennas");

  Eigen::MatrixXcd stack(k_users, m);  // rows h_k^T
  for (int k = 0; k < k_users; ++k) stack.row(k) = channels[k].transpose();

  // Right pseudo-inverse; H W0 = I when H has full row rank.
  Eigen::MatrixXcd gram = stack * stack.adjoint();
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(gram);
  const double cond =
      svd.singularValues()(0) /
      std::max(svd.singularValues()(k_users - 1), 1e-300);
  if (cond > 1e12)
    throw std::invalid_argument(
        "zf_precoding: rank-deficient channel stack, condition number " +
        std::to_string(cond));
  Eigen::MatrixXcd w0 = stack.adjoint() * gram.inverse();

  for (int k = 0; k < k_users; ++k)
    w0.col(k) *= std::sqrt(total_power / k_users) / w0.col(k).norm();
  return w0;
}

OmpEstimate omp_estimate(const Eigen::RowVectorXcd& rx,
                         const Eigen::MatrixXcd& pilots, int grid_size,
                         int num_paths, double angle_min, double angle_max) {
  const int l = static_cast<int>(pilots.cols());
  const int m = static_cast<int>(pilots.rows());
  if (rx.size() != l) throw std::invalid_argument("omp_estimate: rx length");
  if (num_paths > l)
    throw std::invalid_argument("omp_estimate: num_paths > pilot length");
  if (grid_size < 1) throw std::invalid_argument("omp_estimate: empty grid");

  // Dictionary atoms d_g = X^T a(phi_g) over a uniform angle grid.
  Eigen::MatrixXcd atoms(l, grid_size);
  std::vector<double> angles(grid_size);
  for (int g = 0; g < grid_size; ++g) {
    angles[g] = grid_size == 1 ? 0.5 * (angle_min + angle_max)
                               : angle_min + (angle_max - angle_min) * g /
                                                 (grid_size - 1);
    atoms.col(g) = pilots.transpose() * array_response(angles[g], m);
  }

  const Eigen::VectorXcd target = rx.transpose();
  // Residual-correlation selection, normalized by the atom component
  // orthogonal to the already-selected span. The residual lives in that
  // complement, so the plain-norm score systematically favors near-collinear
  // neighbors of a true atom; the projected norm does not.
  auto pick_best = [&](const Eigen::VectorXcd& residual,
                       const std::vector<int>& taken) {
    Eigen::MatrixXcd q;
    if (!taken.empty()) {
      Eigen::MatrixXcd basis(l, taken.size());
      for (std::size_t s = 0; s < taken.size(); ++s)
        basis.col(s) = atoms.col(taken[s]);
      Eigen::HouseholderQR<Eigen::MatrixXcd> qr(basis);
      q = qr.householderQ() *
          Eigen::MatrixXcd::Identity(l, static_cast<Eigen::Index>(taken.size()));
    }
    int best = -1;
    double best_score = -1.0;
    for (int g = 0; g < grid_size; ++g) {
      bool used = false;
      for (int s : taken) used = used || s == g;
      if (used) continue;
      Eigen::VectorXcd perp = atoms.col(g);
      if (q.size() > 0) perp -= q * (q.adjoint() * atoms.col(g));
      const double denom = perp.norm();
      if (denom <= 1e-8 * atoms.col(g).norm()) continue;
      const double score = std::abs(atoms.col(g).dot(residual)) / denom;
      if (score > best_score) {
        best_score = score;
        best = g;
      }
    }
    return best;
  };
  auto refit = [&](const std::vector<int>& support, Eigen::VectorXcd& gains) {
    Eigen::MatrixXcd basis(l, support.size());
    for (std::size_t s = 0; s < support.size(); ++s)
      basis.col(s) = atoms.col(support[s]);
    gains = basis.completeOrthogonalDecomposition().solve(target);
    return (target - basis * gains).eval();
  };

  // Top candidates for the first atom, by the same score pick_best uses.
  auto top_first = [&](int count) {
    std::vector<std::pair<double, int>> scored;
    for (int g = 0; g < grid_size; ++g) {
      const double denom = atoms.col(g).norm();
      if (denom <= 0) continue;
      scored.emplace_back(std::abs(atoms.col(g).dot(target)) / denom, g);
    }
    std::sort(scored.begin(), scored.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<int> out;
    for (int i = 0; i < count && i < static_cast<int>(scored.size()); ++i)
      out.push_back(scored[i].second);
    return out;
  };

  // Greedy rounds followed by cyclic replacement: re-select each atom with
  // the others explained away until the support stabilizes. Neighboring
  // grid atoms are nearly collinear after the pilot projection, so a single
  // greedy pass can land one bin off (or worse when a spurious atom aligns
  // with the path mixture); the replacement passes repair most of that.
  auto run_branch = [&](int first_atom, std::vector<int>& selected,
                        Eigen::VectorXcd& gains) {
    selected.assign(1, first_atom);
    Eigen::VectorXcd residual = refit(selected, gains);
    for (int round = 1; round < num_paths; ++round) {
      selected.push_back(pick_best(residual, selected));
      residual = refit(selected, gains);
    }
    for (int pass = 0; pass < 5 && num_paths > 1; ++pass) {
      bool changed = false;
      for (int slot = 0; slot < num_paths; ++slot) {
        std::vector<int> others;
        for (int s = 0; s < num_paths; ++s)
          if (s != slot) others.push_back(selected[s]);
        Eigen::VectorXcd partial_gains;
        Eigen::VectorXcd partial_residual = refit(others, partial_gains);
        const int replacement = pick_best(partial_residual, others);
        if (replacement != selected[slot]) {
          selected[slot] = replacement;
          changed = true;
        }
        residual = refit(selected, gains);
      }
      if (!changed) break;
    }
    return residual.norm();
  };

  // A wrong first pick is unrecoverable for the later rounds, so branch
  // over the strongest first-atom candidates and keep the best fit.
  std::vector<int> selected, branch_sel;
  Eigen::VectorXcd gains, branch_gains;
  double best_residual = -1.0;
  for (int start : top_first(num_paths <= 1 ? 1 : (num_paths == 2 ? 8 : grid_size))) {
    const double res = run_branch(start, branch_sel, branch_gains);
    if (best_residual < 0 || res < best_residual) {
      best_residual = res;
      selected = branch_sel;
      gains = branch_gains;
    }
  }

  OmpEstimate est;
  for (std::size_t s = 0; s < selected.size(); ++s)
    est.paths.push_back({gains(s), angles[selected[s]]});
  est.channel = synthesize_multipath(est.paths, m);
  return est;
}

double uniform_quantize(double x, double lo, double hi, int bits) {
  if (bits <= 0) return 0.5 * (lo + hi);
  const int levels = 1 << bits;
  const double width = (hi - lo) / levels;
  double cell = std::floor((x - lo) / width);
  cell = std::min(std::max(cell, 0.0), static_cast<double>(levels - 1));
  return lo + (cell + 0.5) * width;
}

Eigen::VectorXcd quantized_feedback_reconstruct(
    const std::vector<SparseMultipathChannel::Path>& paths, int num_antennas,
    int feedback_bits, double gain_max, double angle_min, double angle_max) {
  const int scalars = static_cast<int>(paths.size()) * 3;
  if (scalars == 0) return Eigen::VectorXcd::Zero(num_antennas);

  // Equal split with the remainder spread over the leading scalars.
  std::vector<int> bits(scalars, feedback_bits / scalars);
  for (int i = 0; i < feedback_bits % scalars; ++i) bits[i] += 1;

  std::vector<SparseMultipathChannel::Path> rebuilt;
  for (std::size_t p = 0; p < paths.size(); ++p) {
    const double mag = uniform_quantize(std::abs(paths[p].gain), 0.0, gain_max,
                                        bits[3 * p]);
    const double phase = uniform_quantize(std::arg(paths[p].gain), -kPi, kPi,
                                          bits[3 * p + 1]);
    const double angle = uniform_quantize(paths[p].angle, angle_min, angle_max,
                                          bits[3 * p + 2]);
    rebuilt.push_back({std::polar(mag, phase), angle});
  }
  return synthesize_multipath(rebuilt, num_antennas);
}

}  // namespace pilotbench
