// SPDX-License-Identifier: Apache-2.0
#include "pilotbench/ris_gnn.hpp"

#include <cmath>
#include <stdexcept>

namespace pilotbench {

namespace {
constexpr double kLog2 = 0.6931471805599453;  // ln 2
}

RisGnn::RisGnn(int num_antennas, int num_elements, int num_users,
               int num_blocks, double total_power, double input_scale,
               GnnConfig cfg, std::uint64_t init_seed)
    : num_antennas_(num_antennas),
      num_elements_(num_elements),
      num_users_(num_users),
      num_blocks_(num_blocks),
      total_power_(total_power),
      input_scale_(input_scale),
      cfg_(cfg) {
  if (num_users < 1) throw std::invalid_argument("RisGnn: num_users < 1");
  RngStream rng(derive_seed(init_seed, "gnn-init"));
  const int h = cfg_.hidden;
  const int in_dim = 2 * num_antennas_ * num_blocks_;

  w_in_ = params_.add("input.w", glorot(in_dim, h, rng));
  b_in_ = params_.add("input.b", ad::Mat::Zero(1, h));
  for (int d = 0; d < cfg_.rounds; ++d) {
    w_user_.push_back(params_.add("user" + std::to_string(d) + ".w",
                                  glorot(4 * h, h, rng)));
    b_user_.push_back(
        params_.add("user" + std::to_string(d) + ".b", ad::Mat::Zero(1, h)));
    w_ris_.push_back(params_.add("ris" + std::to_string(d) + ".w",
                                 glorot(3 * h, h, rng)));
    b_ris_.push_back(
        params_.add("ris" + std::to_string(d) + ".b", ad::Mat::Zero(1, h)));
  }
  head_beam_ = Mlp(params_, "head_beam", {h, h, 2 * num_antennas_}, rng);
  head_reflect_ = Mlp(params_, "head_reflect", {h, h, 2 * num_elements_}, rng);
}

ad::Mat RisGnn::features_of(
    const std::vector<Eigen::MatrixXcd>& mf_per_batch) const {
  const int cols = 2 * num_antennas_ * num_blocks_;
  ad::Mat f(static_cast<Eigen::Index>(mf_per_batch.size()), cols);
  for (std::size_t b = 0; b < mf_per_batch.size(); ++b) {
    const auto& y = mf_per_batch[b];
    if (y.rows() != num_antennas_ || y.cols() != num_blocks_)
      throw std::invalid_argument("RisGnn: matched-filter shape mismatch");
    Eigen::Index at = 0;
    for (int c = 0; c < num_blocks_; ++c)
      for (int r = 0; r < num_antennas_; ++r) {
        f(b, at++) = y(r, c).real() / input_scale_;
        f(b, at++) = y(r, c).imag() / input_scale_;
      }
  }
  return f;
}

RisGnn::Out RisGnn::forward(ad::Tape& tape,
                            const std::vector<ad::Var>& pvars,
                            const std::vector<ad::Mat>& user_feats) const {
  if (static_cast<int>(user_feats.size()) != num_users_)
    throw std::invalid_argument("RisGnn: wrong number of user features");
  const int k_users = num_users_;
  const Eigen::Index batch = user_feats[0].rows();
  const int h = cfg_.hidden;

  // Initial node states: shared input transform per user, mean for the RIS
  // node (it has no observation of its own).
  std::vector<ad::Var> z(k_users);
  for (int k = 0; k < k_users; ++k)
    z[k] = tape.relu(tape.add_rowvec(
        tape.matmul(tape.constant(user_feats[k]), pvars[w_in_]),
        pvars[b_in_]));
  ad::Var z_ris = z[0];
  for (int k = 1; k < k_users; ++k) z_ris = tape.add(z_ris, z[k]);
  z_ris = tape.scale(z_ris, 1.0 / k_users);

  const ad::Var zeros = tape.constant(ad::Mat::Zero(batch, h));

  for (int d = 0; d < cfg_.rounds; ++d) {
    // Synchronous update: aggregates read the round-d states.
    ad::Var sum_all = z[0];
    ad::Var max_all = z[0];
    for (int k = 1; k < k_users; ++k) {
      sum_all = tape.add(sum_all, z[k]);
      max_all = tape.cwise_max(max_all, z[k]);
    }

    std::vector<ad::Var> z_next(k_users);
    for (int k = 0; k < k_users; ++k) {
      ad::Var mean_others = zeros;
      ad::Var max_others = zeros;
      if (k_users > 1) {
        mean_others =
            tape.scale(tape.sub(sum_all, z[k]), 1.0 / (k_users - 1));
        bool first = true;
        for (int j = 0; j < k_users; ++j) {
          if (j == k) continue;
          max_others = first ? z[j] : tape.cwise_max(max_others, z[j]);
          first = false;
        }
      }
      ad::Var cat = tape.hcat({z[k], mean_others, max_others, z_ris});
      z_next[k] = tape.relu(tape.add_rowvec(
          tape.matmul(cat, pvars[w_user_[d]]), pvars[b_user_[d]]));
    }
    ad::Var mean_all = tape.scale(sum_all, 1.0 / k_users);
    ad::Var cat_ris = tape.hcat({z_ris, mean_all, max_all});
    z_ris = tape.relu(tape.add_rowvec(tape.matmul(cat_ris, pvars[w_ris_[d]]),
                                      pvars[b_ris_[d]]));
    z = std::move(z_next);
  }

  // Beamformer head per user node, then exact total-power normalization.
  Out out;
  std::vector<ad::CVar> raw(k_users);
  ad::Var total;
  for (int k = 0; k < k_users; ++k) {
    ad::Var flat = head_beam_.apply(tape, pvars, z[k]);
    raw[k] = {tape.slice_cols(flat, 0, num_antennas_),
              tape.slice_cols(flat, num_antennas_, num_antennas_)};
    ad::Var p = tape.rowsum(ad::cabs2(tape, raw[k]));
    total = k == 0 ? p : tape.add(total, p);
  }
  ad::Var gain = tape.sqrt_(tape.div(
      tape.constant(ad::Mat::Constant(batch, 1, total_power_)),
      tape.clamp_min(total, 1e-300)));
  ad::Var gain_b = tape.broadcast_cols(gain, num_antennas_);
  out.beams.resize(k_users);
  for (int k = 0; k < k_users; ++k)
    out.beams[k] = {tape.mul(raw[k].re, gain_b), tape.mul(raw[k].im, gain_b)};

  // Reflection head on the RIS node, unit modulus per entry.
  if (num_elements_ > 0) {
    ad::Var flat = head_reflect_.apply(tape, pvars, z_ris);
    ad::CVar v = {tape.slice_cols(flat, 0, num_elements_),
                  tape.slice_cols(flat, num_elements_, num_elements_)};
    out.reflection = ad::cnormalize_entries(tape, v);
  } else {
    out.reflection = {tape.constant(ad::Mat::Zero(batch, 0)),
                      tape.constant(ad::Mat::Zero(batch, 0))};
  }
  return out;
}

ad::Var RisGnn::loss(ad::Tape& tape, const std::vector<ad::Var>& pvars,
                     const std::vector<RisChannelSet>& batch,
                     const RisPilotPlan& plan, double sigma0, double sigma1,
                     Utility kind, RngStream& noise_rng) const {
  if (batch.empty()) throw std::invalid_argument("RisGnn::loss: empty batch");
  const int k_users = num_users_;
  const auto b_size = static_cast<Eigen::Index>(batch.size());

  // Pilot reception and matched filtering are fixed linear maps of data the
  // network never differentiates through; compute them outside the tape.
  std::vector<std::vector<Eigen::MatrixXcd>> mf(k_users);
  for (auto& m : mf) m.reserve(batch.size());
  for (const auto& draw : batch) {
    auto received = uplink_pilots(draw, plan, sigma1, noise_rng);
    auto filtered = matched_filter(received, plan);
    for (int k = 0; k < k_users; ++k) mf[k].push_back(std::move(filtered[k]));
  }
  std::vector<ad::Mat> feats(k_users);
  for (int k = 0; k < k_users; ++k) feats[k] = features_of(mf[k]);

  Out net = forward(tape, pvars, feats);

  // Effective channels per user: constant direct part plus the cascaded
  // response to the reflection output (per-sample channel matrices).
  std::vector<ad::CVar> h_eff(k_users);
  for (int k = 0; k < k_users; ++k) {
    ad::Mat dre(b_size, num_antennas_), dim(b_size, num_antennas_);
    std::vector<Eigen::MatrixXcd> cascades(batch.size());
    for (Eigen::Index i = 0; i < b_size; ++i) {
      dre.row(i) = batch[i].direct[k].real().transpose();
      dim.row(i) = batch[i].direct[k].imag().transpose();
      cascades[i] = batch[i].cascaded[k];
    }
    ad::CVar direct = {tape.constant(dre), tape.constant(dim)};
    if (num_elements_ > 0) {
      ad::CVar reflected = ad::cbatch_matvec(tape, cascades, net.reflection);
      h_eff[k] = ad::cadd(tape, direct, reflected);
    } else {
      h_eff[k] = direct;
    }
  }

  // SINR -> rates -> utility, all batched along rows.
  ad::Var util;
  for (int k = 0; k < k_users; ++k) {
    ad::Var signal;
    ad::Var interference =
        tape.constant(ad::Mat::Constant(b_size, 1, sigma0 * sigma0));
    for (int j = 0; j < k_users; ++j) {
      ad::CVar dot = ad::crowdot(tape, h_eff[k], net.beams[j]);
      ad::Var p = ad::cabs2(tape, dot);
      if (j == k)
        signal = p;
      else
        interference = tape.add(interference, p);
    }
    ad::Var rate = tape.scale(
        tape.log_(tape.add_scalar(tape.div(signal, interference), 1.0)),
        1.0 / kLog2);
    if (k == 0)
      util = rate;
    else
      util = kind == Utility::sum ? tape.add(util, rate)
                                  : tape.cwise_min(util, rate);
  }
  return tape.neg(tape.mean_all(util));
}

RisDecision RisGnn::decide(
    const std::vector<Eigen::MatrixXcd>& filtered) const {
  ad::Tape tape;
  auto pvars = push_params(tape, params_);
  std::vector<ad::Mat> feats(num_users_);
  for (int k = 0; k < num_users_; ++k)
    feats[k] = features_of({filtered[k]});
  Out net = forward(tape, pvars, feats);

  RisDecision dec;
  dec.beamformers.resize(num_antennas_, num_users_);
  for (int k = 0; k < num_users_; ++k)
    for (int i = 0; i < num_antennas_; ++i)
      dec.beamformers(i, k) = {net.beams[k].re.val()(0, i),
                               net.beams[k].im.val()(0, i)};
  dec.reflection.resize(num_elements_);
  for (int i = 0; i < num_elements_; ++i)
    dec.reflection(i) = {net.reflection.re.val()(0, i),
                         net.reflection.im.val()(0, i)};
  return dec;
}

}  // namespace pilotbench
