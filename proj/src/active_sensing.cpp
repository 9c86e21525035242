// SPDX-License-Identifier: Apache-2.0
#include "pilotbench/active_sensing.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pilotbench {

namespace {
constexpr double kPi = std::numbers::pi;
}

std::complex<double> sense_step(const Eigen::VectorXcd& channel,
                                const Eigen::VectorXcd& sensing, double power,
                                double sigma1, RngStream& rng) {
  if (std::abs(sensing.norm() - 1.0) > 1e-9)
    throw std::invalid_argument("sense_step: sensing vector must be unit norm");
  std::complex<double> y =
      std::sqrt(power) * (sensing.transpose() * channel)(0, 0);
  if (sigma1 > 0.0) y += sigma1 * rng.cnormal();
  return y;
}

double normalized_gain(const Eigen::VectorXcd& channel,
                       const Eigen::VectorXcd& design) {
  const std::complex<double> g = (channel.transpose() * design)(0, 0);
  return std::norm(g) / channel.squaredNorm();
}

ActiveAgent::ActiveAgent(const SensingConfig& cfg, std::uint64_t init_seed)
    : cfg_(cfg) {
  RngStream rng(derive_seed(init_seed, "agent-init"));
  const int h = cfg_.lstm_width;
  w_x_ = params_.add("lstm.wx", glorot(2, 4 * h, rng));
  w_s_ = params_.add("lstm.ws", glorot(h, 4 * h, rng));
  b_gates_ = params_.add("lstm.b", ad::Mat::Zero(1, 4 * h));
  c0_ = params_.add("lstm.c0", 0.1 * glorot(1, h, rng));
  s0_ = params_.add("lstm.s0", 0.1 * glorot(1, h, rng));
  head_sensing_ = Mlp(params_, "head_sensing",
                      {h, cfg_.head_hidden, 2 * cfg_.num_antennas}, rng);
  const int out = cfg_.objective == SensingObjective::beamforming
                      ? 2 * cfg_.num_antennas
                      : cfg_.num_paths;
  head_design_ = Mlp(params_, "head_design", {h, cfg_.head_hidden, out}, rng);
}

namespace {

// Standard LSTM cell on batched rows. Gate layout along columns: input,
// forget, candidate, output.
struct CellVars {
  ad::Var cell, hidden;
};

CellVars lstm_cell(ad::Tape& t, ad::Var x, ad::Var cell, ad::Var hidden,
                   ad::Var w_x, ad::Var w_s, ad::Var bias, int width) {
  ad::Var pre = t.add_rowvec(
      t.add(t.matmul(x, w_x), t.matmul(hidden, w_s)), bias);
  ad::Var gi = t.sigmoid(t.slice_cols(pre, 0, width));
  ad::Var gf = t.sigmoid(t.slice_cols(pre, width, width));
  ad::Var gc = t.tanh_(t.slice_cols(pre, 2 * width, width));
  ad::Var go = t.sigmoid(t.slice_cols(pre, 3 * width, width));
  ad::Var c_next = t.add(t.mul(gf, cell), t.mul(gi, gc));
  ad::Var s_next = t.mul(go, t.tanh_(c_next));
  return {c_next, s_next};
}

// Replicates a 1 x H parameter row across a batch.
ad::Var rows_of(ad::Tape& t, ad::Var row, Eigen::Index batch) {
  return t.matmul(t.constant(ad::Mat::Ones(batch, 1)), row);
}

ad::CVar complex_halves(ad::Tape& t, ad::Var flat, int width) {
  return {t.slice_cols(flat, 0, width), t.slice_cols(flat, width, width)};
}

}  // namespace

ActiveAgent::Rollout ActiveAgent::unroll(
    ad::Tape& tape, const std::vector<ad::Var>& pvars,
    const std::vector<SparseMultipathChannel>& batch, double sigma1,
    RngStream& noise_rng) const {
  const auto b_size = static_cast<Eigen::Index>(batch.size());
  const int m = cfg_.num_antennas;
  const int h = cfg_.lstm_width;
  const double amp = std::sqrt(cfg_.power);
  const double in_scale = 1.0 / std::sqrt(cfg_.power * m);

  ad::Mat h_re(b_size, m), h_im(b_size, m);
  for (Eigen::Index i = 0; i < b_size; ++i) {
    h_re.row(i) = batch[i].coeffs.real().transpose();
    h_im.row(i) = batch[i].coeffs.imag().transpose();
  }
  ad::CVar chan = {tape.constant(h_re), tape.constant(h_im)};

  ad::Var cell = rows_of(tape, pvars[c0_], b_size);
  ad::Var hidden = rows_of(tape, pvars[s0_], b_size);

  Rollout roll;
  for (int t = 0; t < cfg_.stages; ++t) {
    ad::CVar w = ad::cnormalize_rows(
        tape,
        complex_halves(tape, head_sensing_.apply(tape, pvars, hidden), m));
    roll.sensing.push_back(w);

    // y_t = sqrt(P) w^T h + n, then real/imag input scaled by 1/sqrt(P M).
    ad::CVar dot = ad::crowdot(tape, w, chan);
    ad::Mat n_re(b_size, 1), n_im(b_size, 1);
    for (Eigen::Index i = 0; i < b_size; ++i) {
      const std::complex<double> n =
          sigma1 > 0 ? sigma1 * noise_rng.cnormal() : std::complex<double>{};
      n_re(i, 0) = n.real();
      n_im(i, 0) = n.imag();
    }
    ad::Var y_re = tape.add(tape.scale(dot.re, amp), tape.constant(n_re));
    ad::Var y_im = tape.add(tape.scale(dot.im, amp), tape.constant(n_im));
    roll.measurements.push_back({y_re, y_im});
    ad::Var x = tape.scale(tape.hcat({y_re, y_im}), in_scale);

    CellVars next = lstm_cell(tape, x, cell, hidden, pvars[w_x_], pvars[w_s_],
                              pvars[b_gates_], h);
    cell = next.cell;
    hidden = next.hidden;
  }
  roll.last_cell = cell;
  return roll;
}

ad::Var ActiveAgent::loss(ad::Tape& tape, const std::vector<ad::Var>& pvars,
                          const std::vector<SparseMultipathChannel>& batch,
                          RngStream& noise_rng) const {
  if (batch.empty())
    throw std::invalid_argument("ActiveAgent::loss: empty batch");
  const auto b_size = static_cast<Eigen::Index>(batch.size());
  const int m = cfg_.num_antennas;

  Rollout roll = unroll(tape, pvars, batch, cfg_.sigma1, noise_rng);

  if (cfg_.objective == SensingObjective::beamforming) {
    ad::Mat h_re(b_size, m), h_im(b_size, m);
    for (Eigen::Index i = 0; i < b_size; ++i) {
      h_re.row(i) = batch[i].coeffs.real().transpose();
      h_im.row(i) = batch[i].coeffs.imag().transpose();
    }
    ad::CVar chan = {tape.constant(h_re), tape.constant(h_im)};
    ad::CVar v = ad::cnormalize_rows(
        tape, complex_halves(
                  tape, head_design_.apply(tape, pvars, roll.last_cell), m));
    ad::Var gain = ad::cabs2(tape, ad::crowdot(tape, chan, v));
    return tape.neg(
        tape.mean_all(tape.scale(gain, 1.0 / (cfg_.num_paths * m))));
  }

  // AoA objective: squared error against the true angles, targets sorted
  // ascending so the head can learn an ordered output convention.
  ad::Var raw = head_design_.apply(tape, pvars, roll.last_cell);
  const double mid = 0.5 * (cfg_.aoa_min + cfg_.aoa_max);
  const double half = 0.5 * (cfg_.aoa_max - cfg_.aoa_min);
  ad::Var angles = tape.add_scalar(tape.scale(tape.tanh_(raw), half), mid);
  ad::Mat targets(b_size, cfg_.num_paths);
  for (Eigen::Index i = 0; i < b_size; ++i) {
    std::vector<double> a;
    for (const auto& p : batch[i].paths) a.push_back(p.angle);
    std::sort(a.begin(), a.end());
    for (int j = 0; j < cfg_.num_paths; ++j) targets(i, j) = a[j];
  }
  ad::Var err = tape.sub(angles, tape.constant(targets));
  return tape.mean_all(tape.rowsum(tape.square(err)));
}

SensingTrace ActiveAgent::rollout(const SparseMultipathChannel& channel,
                                  double sigma1, RngStream& noise_rng) const {
  ad::Tape tape;
  auto pvars = push_params(tape, params_);
  Rollout roll = unroll(tape, pvars, {channel}, sigma1, noise_rng);

  SensingTrace trace;
  const int m = cfg_.num_antennas;
  trace.sensing.resize(m, cfg_.stages);
  trace.measurements.resize(cfg_.stages);
  for (int t = 0; t < cfg_.stages; ++t) {
    for (int i = 0; i < m; ++i)
      trace.sensing(i, t) = {roll.sensing[t].re.val()(0, i),
                             roll.sensing[t].im.val()(0, i)};
    trace.measurements(t) = {roll.measurements[t].re.val()(0, 0),
                             roll.measurements[t].im.val()(0, 0)};
  }
  Eigen::RowVectorXd last_cell = roll.last_cell.val().row(0);
  if (cfg_.objective == SensingObjective::beamforming) {
    trace.design = final_design_beamforming(last_cell);
  } else {
    trace.aoa_estimates = final_design_aoa(last_cell);
    trace.design = Eigen::VectorXcd();
  }
  return trace;
}

Eigen::RowVectorXd ActiveAgent::initial_cell() const {
  return params_.value(c0_).row(0);
}
Eigen::RowVectorXd ActiveAgent::initial_hidden() const {
  return params_.value(s0_).row(0);
}

Eigen::VectorXcd ActiveAgent::initial_sensing() const {
  ad::Tape tape;
  auto pvars = push_params(tape, params_);
  ad::CVar w = ad::cnormalize_rows(
      tape, complex_halves(tape,
                           head_sensing_.apply(
                               tape, pvars, tape.constant(params_.value(s0_))),
                           cfg_.num_antennas));
  Eigen::VectorXcd out(cfg_.num_antennas);
  for (int i = 0; i < cfg_.num_antennas; ++i)
    out(i) = {w.re.val()(0, i), w.im.val()(0, i)};
  return out;
}

ActiveAgent::StepOut ActiveAgent::agent_step(
    const Eigen::RowVectorXd& cell, const Eigen::RowVectorXd& hidden,
    std::complex<double> measurement) const {
  ad::Tape tape;
  auto pvars = push_params(tape, params_);
  const int m = cfg_.num_antennas;
  const double in_scale = 1.0 / std::sqrt(cfg_.power * m);
  ad::Mat x(1, 2);
  x << measurement.real() * in_scale, measurement.imag() * in_scale;
  CellVars next =
      lstm_cell(tape, tape.constant(x), tape.constant(cell),
                tape.constant(hidden), pvars[w_x_], pvars[w_s_],
                pvars[b_gates_], cfg_.lstm_width);
  ad::CVar w = ad::cnormalize_rows(
      tape,
      complex_halves(tape, head_sensing_.apply(tape, pvars, next.hidden), m));

  StepOut out;
  out.cell = next.cell.val().row(0);
  out.hidden = next.hidden.val().row(0);
  out.next_sensing.resize(m);
  for (int i = 0; i < m; ++i)
    out.next_sensing(i) = {w.re.val()(0, i), w.im.val()(0, i)};
  return out;
}

Eigen::VectorXcd ActiveAgent::final_design_beamforming(
    const Eigen::RowVectorXd& cell) const {
  if (cfg_.objective != SensingObjective::beamforming)
    throw std::invalid_argument("final_design: agent is aoa-objective");
  ad::Tape tape;
  auto pvars = push_params(tape, params_);
  const int m = cfg_.num_antennas;
  ad::CVar v = ad::cnormalize_rows(
      tape, complex_halves(
                tape, head_design_.apply(tape, pvars, tape.constant(cell)), m));
  Eigen::VectorXcd out(m);
  for (int i = 0; i < m; ++i) out(i) = {v.re.val()(0, i), v.im.val()(0, i)};
  return out;
}

Eigen::VectorXd ActiveAgent::final_design_aoa(
    const Eigen::RowVectorXd& cell) const {
  if (cfg_.objective != SensingObjective::aoa)
    throw std::invalid_argument("final_design: agent is beamforming-objective");
  ad::Tape tape;
  auto pvars = push_params(tape, params_);
  ad::Var raw = head_design_.apply(tape, pvars, tape.constant(cell));
  const double mid = 0.5 * (cfg_.aoa_min + cfg_.aoa_max);
  const double half = 0.5 * (cfg_.aoa_max - cfg_.aoa_min);
  Eigen::VectorXd out(cfg_.num_paths);
  for (int j = 0; j < cfg_.num_paths; ++j)
    out(j) = mid + half * std::tanh(raw.val()(0, j));
  return out;
}

FixedSensing::FixedSensing(const SensingConfig& cfg, Mode mode,
                           std::uint64_t seed)
    : cfg_(cfg), mode_(mode) {
  RngStream rng(derive_seed(seed, "fixed-sensing"));
  const int m = cfg_.num_antennas;
  if (mode_ == Mode::random) {
    frozen_.resize(m, cfg_.stages);
    for (int t = 0; t < cfg_.stages; ++t) {
      Eigen::VectorXcd w(m);
      for (int i = 0; i < m; ++i) w(i) = rng.cnormal();
      frozen_.col(t) = w / w.norm();
    }
  } else {
    ad::Mat re(cfg_.stages, m), im(cfg_.stages, m);
    for (int t = 0; t < cfg_.stages; ++t)
      for (int i = 0; i < m; ++i) {
        const auto z = rng.cnormal();
        re(t, i) = z.real();
        im(t, i) = z.imag();
      }
    sensing_re_ = params_.add("sensing.re", re);
    sensing_im_ = params_.add("sensing.im", im);
  }
  head_design_ = Mlp(params_, "head_design",
                     {2 * cfg_.stages, cfg_.head_hidden, cfg_.head_hidden,
                      2 * m},
                     rng);
}

Eigen::MatrixXcd FixedSensing::sensing_matrix() const {
  if (mode_ == Mode::random) return frozen_;
  const ad::Mat& re = params_.value(sensing_re_);
  const ad::Mat& im = params_.value(sensing_im_);
  Eigen::MatrixXcd w(re.cols(), re.rows());
  for (int t = 0; t < re.rows(); ++t) {
    Eigen::VectorXcd col(re.cols());
    for (int i = 0; i < re.cols(); ++i) col(i) = {re(t, i), im(t, i)};
    w.col(t) = col / col.norm();
  }
  return w;
}

ad::Var FixedSensing::loss(ad::Tape& tape, const std::vector<ad::Var>& pvars,
                           const std::vector<SparseMultipathChannel>& batch,
                           RngStream& noise_rng) const {
  const auto b_size = static_cast<Eigen::Index>(batch.size());
  const int m = cfg_.num_antennas;
  const double amp = std::sqrt(cfg_.power);
  const double in_scale = 1.0 / std::sqrt(cfg_.power * m);

  ad::Mat h_re(b_size, m), h_im(b_size, m);
  for (Eigen::Index i = 0; i < b_size; ++i) {
    h_re.row(i) = batch[i].coeffs.real().transpose();
    h_im.row(i) = batch[i].coeffs.imag().transpose();
  }
  ad::CVar chan = {tape.constant(h_re), tape.constant(h_im)};

  std::vector<ad::Var> feats;
  for (int t = 0; t < cfg_.stages; ++t) {
    ad::CVar w;
    if (mode_ == Mode::random) {
      Eigen::MatrixXcd col(1, m);
      col.row(0) = frozen_.col(t).transpose();
      ad::CVar row = ad::cconstant(tape, col);
      w = {tape.matmul(ad::Mat::Ones(b_size, 1), row.re),
           tape.matmul(ad::Mat::Ones(b_size, 1), row.im)};
    } else {
      // Trainable row t (selector keeps it a tape op), normalized and
      // replicated across the batch.
      ad::Mat sel = ad::Mat::Zero(1, cfg_.stages);
      sel(0, t) = 1.0;
      ad::CVar unit = ad::cnormalize_rows(
          tape, {tape.matmul(sel, pvars[sensing_re_]),
                 tape.matmul(sel, pvars[sensing_im_])});
      w = {tape.matmul(ad::Mat::Ones(b_size, 1), unit.re),
           tape.matmul(ad::Mat::Ones(b_size, 1), unit.im)};
    }
    ad::CVar dot = ad::crowdot(tape, w, chan);
    ad::Mat n_re(b_size, 1), n_im(b_size, 1);
    for (Eigen::Index i = 0; i < b_size; ++i) {
      const std::complex<double> n =
          cfg_.sigma1 > 0 ? cfg_.sigma1 * noise_rng.cnormal()
                          : std::complex<double>{};
      n_re(i, 0) = n.real();
      n_im(i, 0) = n.imag();
    }
    feats.push_back(tape.scale(
        tape.add(tape.scale(dot.re, amp), tape.constant(n_re)), in_scale));
    feats.push_back(tape.scale(
        tape.add(tape.scale(dot.im, amp), tape.constant(n_im)), in_scale));
  }

  ad::CVar v = ad::cnormalize_rows(
      tape,
      complex_halves(tape, head_design_.apply(tape, pvars, tape.hcat(feats)),
                     m));
  ad::Var gain = ad::cabs2(tape, ad::crowdot(tape, chan, v));
  return tape.neg(
      tape.mean_all(tape.scale(gain, 1.0 / (cfg_.num_paths * m))));
}

SensingTrace FixedSensing::rollout(const SparseMultipathChannel& channel,
                                   double sigma1, RngStream& noise_rng) const {
  const int m = cfg_.num_antennas;
  SensingTrace trace;
  trace.sensing = sensing_matrix();
  trace.measurements.resize(cfg_.stages);
  for (int t = 0; t < cfg_.stages; ++t)
    trace.measurements(t) = sense_step(channel.coeffs, trace.sensing.col(t),
                                       cfg_.power, sigma1, noise_rng);

  ad::Tape tape;
  auto pvars = push_params(tape, params_);
  const double in_scale = 1.0 / std::sqrt(cfg_.power * m);
  ad::Mat feats(1, 2 * cfg_.stages);
  for (int t = 0; t < cfg_.stages; ++t) {
    feats(0, 2 * t) = trace.measurements(t).real() * in_scale;
    feats(0, 2 * t + 1) = trace.measurements(t).imag() * in_scale;
  }
  ad::CVar v = ad::cnormalize_rows(
      tape, complex_halves(tape,
                           head_design_.apply(tape, pvars,
                                              tape.constant(feats)),
                           m));
  trace.design.resize(m);
  for (int i = 0; i < m; ++i)
    trace.design(i) = {v.re.val()(0, i), v.im.val()(0, i)};
  return trace;
}

Eigen::VectorXcd omp_beamformer(const SensingTrace& trace, double power,
                                int grid_size, int num_paths,
                                double angle_min, double angle_max) {
  // Measurements obey y^T = h^T (sqrt(P) W) + n^T, which is exactly the
  // downlink-pilot form with X = sqrt(P) W.
  Eigen::MatrixXcd pilots = std::sqrt(power) * trace.sensing;
  Eigen::RowVectorXcd rx = trace.measurements.transpose();
  auto est = omp_estimate(rx, pilots, grid_size, num_paths, angle_min,
                          angle_max);
  const double norm = est.channel.norm();
  if (norm <= 0) return Eigen::VectorXcd::Unit(trace.sensing.rows(), 0);
  return est.channel.conjugate() / norm;
}

Eigen::VectorXcd sector_beam(double lo, double hi, int num_antennas) {
  const int points = 33;
  Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(num_antennas);
  for (int i = 0; i < points; ++i) {
    const double ang = lo + (hi - lo) * i / (points - 1);
    acc += array_response(ang, num_antennas);
  }
  Eigen::VectorXcd beam = acc.conjugate();
  return beam / beam.norm();
}

BisectionResult bisection_baseline(const SparseMultipathChannel& channel,
                                   int stages_budget, double power,
                                   double sigma1, double angle_min,
                                   double angle_max, RngStream& rng) {
  if (channel.paths.size() != 1)
    throw std::invalid_argument(
        "bisection_baseline: restricted to single-path channels");
  if (stages_budget < 1)
    throw std::invalid_argument("bisection_baseline: need at least 1 stage");

  double lo = angle_min, hi = angle_max;
  const int halvings = stages_budget / 2;  // two pilots per stage
  for (int s = 0; s < halvings; ++s) {
    const double mid = 0.5 * (lo + hi);
    const auto beam_left = sector_beam(lo, mid, channel.num_antennas);
    const auto beam_right = sector_beam(mid, hi, channel.num_antennas);
    const auto y_left =
        sense_step(channel.coeffs, beam_left, power, sigma1, rng);
    const auto y_right =
        sense_step(channel.coeffs, beam_right, power, sigma1, rng);
    if (std::abs(y_left) >= std::abs(y_right))
      hi = mid;
    else
      lo = mid;
  }

  BisectionResult out;
  out.center = 0.5 * (lo + hi);
  out.width = hi - lo;
  out.design = array_response(out.center, channel.num_antennas).conjugate() /
               std::sqrt(channel.num_antennas);
  return out;
}

Eigen::VectorXd uniform_grid(double lo, double hi, int points) {
  Eigen::VectorXd g(points);
  for (int i = 0; i < points; ++i)
    g(i) = points == 1 ? 0.5 * (lo + hi)
                       : lo + (hi - lo) * i / (points - 1);
  return g;
}

Eigen::VectorXd posterior_update(const Eigen::VectorXd& grid_angles,
                                 const Eigen::MatrixXcd& sensing_prefix,
                                 const Eigen::VectorXcd& measurement_prefix,
                                 double power, double sigma1,
                                 const Eigen::VectorXd& prior) {
  if (sigma1 <= 0.0)
    throw std::invalid_argument("posterior_update: sigma1 must be positive");
  const int points = static_cast<int>(grid_angles.size());
  if (prior.size() != points)
    throw std::invalid_argument("posterior_update: prior/grid mismatch");
  const auto t = static_cast<int>(measurement_prefix.size());
  if (sensing_prefix.cols() < t)
    throw std::invalid_argument("posterior_update: trace shorter than t");

  Eigen::VectorXd log_post(points);
  const double s2 = sigma1 * sigma1;
  const int m = static_cast<int>(sensing_prefix.rows());
  const double y2 = measurement_prefix.squaredNorm();
  for (int g = 0; g < points; ++g) {
    // Rank-one identities: with u = W^T a(phi),
    //   y^H Sigma^{-1} y = (||y||^2 - P |u^H y|^2 / (s2 + P ||u||^2)) / s2
    //   log det Sigma    = t log s2 + log(1 + P ||u||^2 / s2).
    const Eigen::VectorXcd a = array_response(grid_angles(g), m);
    Eigen::VectorXcd u(t);
    for (int i = 0; i < t; ++i)
      u(i) = (sensing_prefix.col(i).transpose() * a)(0, 0);
    const double u2 = u.squaredNorm();
    const std::complex<double> uy = u.dot(measurement_prefix);
    const double quad =
        (y2 - power * std::norm(uy) / (s2 + power * u2)) / s2;
    const double logdet = std::log1p(power * u2 / s2);  // t log s2 is common
    log_post(g) = std::log(std::max(prior(g), 0.0)) - quad - logdet;
  }

  const double peak = log_post.maxCoeff();
  Eigen::VectorXd post = (log_post.array() - peak).exp();
  return post / post.sum();
}

Eigen::VectorXd beam_pattern(const Eigen::VectorXcd& sensing,
                             const Eigen::VectorXd& grid_angles) {
  const int m = static_cast<int>(sensing.size());
  Eigen::VectorXd pattern(grid_angles.size());
  for (int g = 0; g < grid_angles.size(); ++g) {
    const Eigen::VectorXcd a = array_response(grid_angles(g), m);
    pattern(g) = std::norm((sensing.transpose() * a)(0, 0));
  }
  return pattern;
}

int half_power_width_bins(const Eigen::VectorXd& pattern) {
  int peak = 0;
  pattern.maxCoeff(&peak);
  const double half = 0.5 * pattern(peak);
  int lo = peak, hi = peak;
  while (lo > 0 && pattern(lo - 1) >= half) --lo;
  while (hi + 1 < pattern.size() && pattern(hi + 1) >= half) ++hi;
  return hi - lo + 1;
}

double entropy_nats(const Eigen::VectorXd& probabilities) {
  double h = 0.0;
  for (int i = 0; i < probabilities.size(); ++i) {
    const double p = probabilities(i);
    if (p > 0) h -= p * std::log(p);
  }
  return h;
}

}  // namespace pilotbench
