// SPDX-License-Identifier: Apache-2.0
//
// End-to-end FDD pipeline: trainable downlink pilots, per-user binary
// feedback encoders (sign output trained with the straight-through
// estimator), and a central precoder network, plus the classical baselines
// (MRT with full CSI, OMP channel estimation, scalar-quantized feedback,
// zero-forcing precoding).
#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "pilotbench/ad_complex.hpp"
#include "pilotbench/chanmodels.hpp"
#include "pilotbench/nn.hpp"

namespace pilotbench {

// How the sign layer behaves in a forward pass.
//   hard       - sign(x); evaluation mode.
//   straight   - sign(x) forward, tanh(beta x) gradient; training mode.
//   surrogate  - tanh(beta x) forward and backward; the smooth relaxation
//                finite-difference checks differentiate.
enum class BitMode { hard, straight, surrogate };

// y_k = h_k^T X + n_k. Verifies the per-column pilot power constraint.
Eigen::RowVectorXcd downlink_pilot_rx(const Eigen::VectorXcd& channel,
                                      const Eigen::MatrixXcd& pilots,
                                      double column_power, double sigma0,
                                      RngStream& rng);

struct FddConfig {
  int num_antennas = 16;   // M
  int num_users = 2;       // K
  int pilot_len = 8;       // L
  int feedback_bits = 10;  // B per user
  int num_paths = 2;       // L_p
  double total_power = 10.0;  // P_d (linear); SNR = P_d / sigma0^2
  double sigma0 = 1.0;
  double aod_min = -0.5235987755982988;  // -30 deg
  double aod_max = 0.5235987755982988;
  int hidden = 128;        // 512 at paper scale
  int hidden_layers = 3;
};

class FddModel {
 public:
  FddModel(const FddConfig& cfg, std::uint64_t init_seed);

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const FddConfig& config() const { return cfg_; }

  // Straight-through slope; annealed upward during training.
  double st_beta() const { return st_beta_; }
  void set_st_beta(double beta) { st_beta_ = beta; }

  // Current pilot matrix assembled from its real/imag parameters.
  Eigen::MatrixXcd pilot_matrix() const;
  // Projects every pilot column back onto the power ball; the engine calls
  // this after each optimizer step.
  void project_pilot_columns();

  // Per-user feedback bits from received pilots (shared encoder weights).
  // In hard mode entries are exactly +-1.
  Eigen::VectorXd encoder_forward(const Eigen::RowVectorXcd& rx,
                                  BitMode mode) const;

  // Precoder from the concatenated feedback of all K users; output is
  // rescaled so sum_k ||w_k||^2 == P_d exactly.
  Eigen::MatrixXcd precoder_forward(const Eigen::VectorXd& bits) const;

  // Full pipeline for one channel draw in hard-bit mode.
  Eigen::MatrixXcd decide(const std::vector<Eigen::VectorXcd>& channels,
                          double sigma0_pilot, RngStream& noise_rng) const;

  // Negated mean sum rate over the batch, differentiable in the pilots and
  // both networks; the sign layer runs in the given mode.
  ad::Var loss(ad::Tape& tape, const std::vector<ad::Var>& pvars,
               const std::vector<std::vector<Eigen::VectorXcd>>& batch,
               BitMode mode, RngStream& noise_rng) const;

 private:
  struct PipelineOut {
    std::vector<ad::CVar> beams;  // per user, B x M
  };
  PipelineOut pipeline(ad::Tape& tape, const std::vector<ad::Var>& pvars,
                       const std::vector<std::vector<Eigen::VectorXcd>>& batch,
                       BitMode mode, RngStream& noise_rng) const;

  FddConfig cfg_;
  ParamStore params_;
  double st_beta_ = 1.0;
  double input_scale_ = 1.0;
  int pilots_re_ = -1, pilots_im_ = -1;
  Mlp encoder_, precoder_;
};

// w_k proportional to conj(h_k), equal power split. Rejects zero channels.
Eigen::MatrixXcd mrt_full_csi(const std::vector<Eigen::VectorXcd>& channels,
                              double total_power);

// Right pseudo-inverse of the stacked channel rows h_k^T, columns rescaled
// to equal per-user power. Rejects rank-deficient stacks with a condition
// number diagnostic.
Eigen::MatrixXcd zf_precoding(const std::vector<Eigen::VectorXcd>& channels,
                              double total_power);

// Orthogonal matching pursuit over the angle-response dictionary
// {X^T a(phi_g)}: greedy atom selection by residual correlation with a
// least-squares gain refit each round.
struct OmpEstimate {
  Eigen::VectorXcd channel;                       // synthesized h_hat
  std::vector<SparseMultipathChannel::Path> paths;  // selected (gain, angle)
};

OmpEstimate omp_estimate(const Eigen::RowVectorXcd& rx,
                         const Eigen::MatrixXcd& pilots, int grid_size,
                         int num_paths, double angle_min, double angle_max);

// Uniform scalar quantization of the estimated path parameters
// (|gain|, phase, angle) with an equal split of the B feedback bits;
// zero-bit scalars reconstruct at their range midpoint. Returns the channel
// the BS reconstructs from the quantized parameters.
Eigen::VectorXcd quantized_feedback_reconstruct(
    const std::vector<SparseMultipathChannel::Path>& paths, int num_antennas,
    int feedback_bits, double gain_max, double angle_min, double angle_max);

// Scalar quantizer used above; exposed for tests. Midpoint reconstruction;
// zero bits give the range midpoint. Idempotent on its own outputs.
double uniform_quantize(double x, double lo, double hi, int bits);

}  // namespace pilotbench
