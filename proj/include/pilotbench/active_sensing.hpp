// SPDX-License-Identifier: Apache-2.0
//
// Sequential beam alignment: an LSTM agent that designs the next sensing
// vector from everything observed so far, fixed-sensing and model-based
// baselines (OMP, hierarchical bisection), and the single-path AoA
// posterior used as a diagnostic of what the sensing vectors reveal.
#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "pilotbench/ad_complex.hpp"
#include "pilotbench/chanmodels.hpp"
#include "pilotbench/fdd_feedback.hpp"
#include "pilotbench/nn.hpp"

namespace pilotbench {

// y = sqrt(P_u) w^T h + n, n ~ CN(0, sigma1^2). Rejects non-unit w.
std::complex<double> sense_step(const Eigen::VectorXcd& channel,
                                const Eigen::VectorXcd& sensing, double power,
                                double sigma1, RngStream& rng);

// |h^T v|^2 / ||h||^2, in [0, 1] for unit-norm v; equals 1 only at
// v = conj(h)/||h||.
double normalized_gain(const Eigen::VectorXcd& channel,
                       const Eigen::VectorXcd& design);

enum class SensingObjective { beamforming, aoa };

struct SensingConfig {
  int num_antennas = 32;   // M
  int stages = 8;          // T
  int num_paths = 1;       // L_p
  double power = 1.0;      // P_u; SNR = P_u L_p / sigma1^2 at unit-norm w
  double sigma1 = 1.0;
  double aoa_min = -1.0471975511965976;  // -60 deg
  double aoa_max = 1.0471975511965976;
  int lstm_width = 128;    // 512 at paper scale
  int head_hidden = 128;
  SensingObjective objective = SensingObjective::beamforming;
};

// One evaluated episode: the sensing vectors used, the measurements, and
// the final design.
struct SensingTrace {
  Eigen::MatrixXcd sensing;       // M x T, unit-norm columns
  Eigen::VectorXcd measurements;  // length T
  Eigen::VectorXcd design;        // v; unit norm for beamforming
  Eigen::VectorXd aoa_estimates;  // only for the aoa objective
};

// LSTM agent: one cell (weights tied across stages) summarizing the history,
// a head mapping the hidden state to the next unit-norm sensing vector, and
// a final head mapping the last cell state to the design v. The initial
// (c0, s0) are trainable; w_1 is emitted from s0 through the same head.
class ActiveAgent {
 public:
  ActiveAgent(const SensingConfig& cfg, std::uint64_t init_seed);

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const SensingConfig& config() const { return cfg_; }

  // Batched differentiable rollout; returns the negated mean objective
  // (beamforming gain normalized by L_p M, or mean squared AoA error).
  ad::Var loss(ad::Tape& tape, const std::vector<ad::Var>& pvars,
               const std::vector<SparseMultipathChannel>& batch,
               RngStream& noise_rng) const;

  // Plain rollout of one episode at the given noise level.
  SensingTrace rollout(const SparseMultipathChannel& channel,
                       double sigma1, RngStream& noise_rng) const;

  // Single step of the recurrence: (state, y) -> (state', next w). States
  // are row vectors of width lstm_width.
  struct StepOut {
    Eigen::RowVectorXd cell, hidden;
    Eigen::VectorXcd next_sensing;
  };
  StepOut agent_step(const Eigen::RowVectorXd& cell,
                     const Eigen::RowVectorXd& hidden,
                     std::complex<double> measurement) const;

  Eigen::RowVectorXd initial_cell() const;
  Eigen::RowVectorXd initial_hidden() const;
  Eigen::VectorXcd initial_sensing() const;

  // Final design from a cell state (spec: beamforming -> unit-norm complex
  // vector; aoa -> angles via scaled tanh).
  Eigen::VectorXcd final_design_beamforming(
      const Eigen::RowVectorXd& cell) const;
  Eigen::VectorXd final_design_aoa(const Eigen::RowVectorXd& cell) const;

 private:
  struct Rollout {
    std::vector<ad::CVar> sensing;       // per stage, B x M
    std::vector<ad::CVar> measurements;  // per stage, B x 1, noise included
    ad::Var last_cell;                   // B x H
  };
  Rollout unroll(ad::Tape& tape, const std::vector<ad::Var>& pvars,
                 const std::vector<SparseMultipathChannel>& batch,
                 double sigma1, RngStream& noise_rng) const;

  SensingConfig cfg_;
  ParamStore params_;
  int w_x_ = -1, w_s_ = -1, b_gates_ = -1, c0_ = -1, s0_ = -1;
  Mlp head_sensing_, head_design_;

  friend class FixedSensing;
};

// Fixed (non-adaptive) sensing baselines: the T sensing vectors do not
// depend on the observations. Random mode freezes unit-norm Gaussian
// vectors per seed; learned mode trains the sensing matrix jointly with a
// feedforward design head on the stacked measurements.
class FixedSensing {
 public:
  enum class Mode { random, learned };

  FixedSensing(const SensingConfig& cfg, Mode mode, std::uint64_t seed);

  ParamStore& params() { return params_; }
  Mode mode() const { return mode_; }
  const SensingConfig& config() const { return cfg_; }

  // Current sensing matrix (M x T, unit-norm columns).
  Eigen::MatrixXcd sensing_matrix() const;

  ad::Var loss(ad::Tape& tape, const std::vector<ad::Var>& pvars,
               const std::vector<SparseMultipathChannel>& batch,
               RngStream& noise_rng) const;

  SensingTrace rollout(const SparseMultipathChannel& channel,
                       double sigma1, RngStream& noise_rng) const;

 private:
  SensingConfig cfg_;
  Mode mode_;
  ParamStore params_;
  Eigen::MatrixXcd frozen_;  // random mode
  int sensing_re_ = -1, sensing_im_ = -1;
  Mlp head_design_;
};

// OMP channel estimation over the trace's sensing vectors followed by
// matched beamforming v = conj(h_hat)/||h_hat||.
Eigen::VectorXcd omp_beamformer(const SensingTrace& trace, double power,
                                int grid_size, int num_paths,
                                double angle_min, double angle_max);

// Hierarchical bisection over the AoA interval (single-path channels only):
// every stage spends two pilots on the half-interval sector beams and keeps
// the half with the larger response; v = conj(a(center))/sqrt(M).
struct BisectionResult {
  Eigen::VectorXcd design;
  double center = 0.0;
  double width = 0.0;  // final interval width
};

BisectionResult bisection_baseline(const SparseMultipathChannel& channel,
                                   int stages_budget, double power,
                                   double sigma1, double angle_min,
                                   double angle_max, RngStream& rng);

// Sector beam used by the bisection search: normalized conjugate sum of
// array responses over a 33-point grid of the sector.
Eigen::VectorXcd sector_beam(double lo, double hi, int num_antennas);

// Posterior over a grid of candidate AoAs for the single-path model
// h = alpha a(phi), alpha ~ CN(0,1) marginalized out:
//   posterior(phi) proportional to
//     prior(phi) exp(-y^H Sigma(phi)^{-1} y) / det(Sigma(phi)),
//   Sigma(phi) = sigma1^2 I + P_u u(phi) u(phi)^H,
//   u(phi) = [w_1^T a(phi), ..., w_t^T a(phi)]^T,
// evaluated through the rank-one inverse/determinant identities and
// normalized to sum 1. With t = 0 returns the normalized prior.
Eigen::VectorXd posterior_update(const Eigen::VectorXd& grid_angles,
                                 const Eigen::MatrixXcd& sensing_prefix,
                                 const Eigen::VectorXcd& measurement_prefix,
                                 double power, double sigma1,
                                 const Eigen::VectorXd& prior);

Eigen::VectorXd uniform_grid(double lo, double hi, int points);

// Beam pattern |w^T a(phi)|^2 over a grid and its half-power width in bins
// around the global peak.
Eigen::VectorXd beam_pattern(const Eigen::VectorXcd& sensing,
                             const Eigen::VectorXd& grid_angles);
int half_power_width_bins(const Eigen::VectorXd& pattern);

double entropy_nats(const Eigen::VectorXd& probabilities);

}  // namespace pilotbench
