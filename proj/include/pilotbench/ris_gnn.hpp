// SPDX-License-Identifier: Apache-2.0
//
// Permutation-equivariant graph network mapping matched-filtered uplink
// pilots to the joint downlink decision (W, v). One node per user plus one
// RIS node; user weights are tied, so permuting users permutes the
// beamformer columns and leaves the reflection output unchanged by
// construction. Trained end-to-end on the negated expected utility.
#pragma once

#include <cstdint>
#include <vector>

#include "pilotbench/ad_complex.hpp"
#include "pilotbench/nn.hpp"
#include "pilotbench/ris_baselines.hpp"
#include "pilotbench/ris_sim.hpp"

namespace pilotbench {

struct GnnConfig {
  int rounds = 3;
  int hidden = 64;   // 256 at paper scale
};

class RisGnn {
 public:
  RisGnn(int num_antennas, int num_elements, int num_users, int num_blocks,
         double total_power, double input_scale, GnnConfig cfg,
         std::uint64_t init_seed);

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  // Flattened real/imag features of one user's matched-filter output,
  // scaled by 1/input_scale. Rows of the result are batch entries.
  ad::Mat features_of(const std::vector<Eigen::MatrixXcd>& mf_per_batch) const;

  struct Out {
    std::vector<ad::CVar> beams;  // per user, B x M, power-normalized
    ad::CVar reflection;          // B x N, unit-modulus entries
  };

  // user_feats[k] is the B x (2*M*blocks) feature block of user k.
  Out forward(ad::Tape& tape, const std::vector<ad::Var>& pvars,
              const std::vector<ad::Mat>& user_feats) const;

  // Negated mean utility over a batch of channel draws; pilot noise is
  // drawn from noise_rng. Differentiable in every parameter.
  ad::Var loss(ad::Tape& tape, const std::vector<ad::Var>& pvars,
               const std::vector<RisChannelSet>& batch,
               const RisPilotPlan& plan, double sigma0, double sigma1,
               Utility kind, RngStream& noise_rng) const;

  // Single-instance decision from matched-filtered pilots.
  RisDecision decide(const std::vector<Eigen::MatrixXcd>& filtered) const;

  int num_antennas() const { return num_antennas_; }
  int num_elements() const { return num_elements_; }
  int num_users() const { return num_users_; }
  int num_blocks() const { return num_blocks_; }
  double total_power() const { return total_power_; }
  double input_scale() const { return input_scale_; }

 private:
  int num_antennas_, num_elements_, num_users_, num_blocks_;
  double total_power_, input_scale_;
  GnnConfig cfg_;
  ParamStore params_;
  int w_in_ = -1, b_in_ = -1;
  std::vector<int> w_user_, b_user_, w_ris_, b_ris_;
  Mlp head_beam_, head_reflect_;
};

}  // namespace pilotbench
