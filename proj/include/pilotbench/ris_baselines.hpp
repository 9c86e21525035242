// SPDX-License-Identifier: Apache-2.0
//
// Model-then-optimize pipeline for the RIS task: LMMSE channel estimation
// from uplink pilots, block-coordinate utility maximization given channels
// (true or estimated), and the perfect-CSI bound.
#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "pilotbench/ris_sim.hpp"

namespace pilotbench {

// Direct + cascaded links; the part of a channel set the optimizer needs.
struct RisLinks {
  std::vector<Eigen::VectorXcd> direct;     // h_d[k], length M
  std::vector<Eigen::MatrixXcd> cascaded;   // A[k], M x N
  int num_users() const { return static_cast<int>(direct.size()); }
  int num_antennas() const {
    return direct.empty() ? 0 : static_cast<int>(direct[0].size());
  }
  int num_elements() const {
    return cascaded.empty() ? 0 : static_cast<int>(cascaded[0].cols());
  }
};

RisLinks links_of(const RisChannelSet& channels);

// Second-order statistics of the stacked per-user channel
// s_k = [h_d[k]; vec(A[k])] (dimension M(N+1)), estimated by Monte Carlo,
// plus everything derived from the pilot plan that the LMMSE estimator
// needs: the per-user linear mixing y = sum_k Phi_k s_k + n, the pilot
// covariance and its factorization.
struct StackedChannelStats {
  int num_antennas = 0;   // M
  int num_elements = 0;   // N
  int num_users = 0;      // K
  double sigma1 = 0.0;
  Eigen::VectorXcd mean;  // dim M(N+1)
  Eigen::MatrixXcd cov;   // C_ss, diagonally loaded, Hermitian PSD

  // Plan-derived quantities (rebuilt on cache load).
  std::vector<Eigen::MatrixXcd> mixing;  // Phi_k, ML x M(N+1)
  Eigen::VectorXcd mean_rx;              // E[vec(Y)]
  Eigen::MatrixXcd cov_rx;               // C_yy incl. noise + loading
  Eigen::LDLT<Eigen::MatrixXcd> cov_rx_solver;

  void attach_plan(const RisPilotPlan& plan);
};

// Per-user mixing operator of the plan: vec(Y) = sum_k Phi_k s_k + noise.
Eigen::MatrixXcd pilot_mixing_operator(const RisPilotPlan& plan, int user,
                                       int num_antennas);

// Estimates (mean, C_ss) from n_draws fresh realizations (pooled across the
// K statistically identical users), applies diagonal loading
// delta = 1e-6 trace/dim, and attaches the plan. Draws run in parallel on
// substreams derived from `rng`; results do not depend on the thread count.
StackedChannelStats estimate_stats(const GeometryConfig& cfg, int num_antennas,
                                   int num_elements, int num_users,
                                   const RisPilotPlan& plan, double sigma1,
                                   int n_draws, RngStream& rng);

// Disk cache for the Monte-Carlo part of the stats, keyed by a caller
// computed configuration hash. Layout ("PLSC1", little endian):
//   magic[5] version:u32 hash:u64 M:i32 N:i32 K:i32 sigma1:f64 n_draws:i32
//   mean: D complex f64 pairs, cov: D*D complex f64 pairs (column major)
// with D = M(N+1).
bool save_stats_cache(const std::string& path,
                      const StackedChannelStats& stats, std::uint64_t hash,
                      int n_draws);
std::optional<StackedChannelStats> load_stats_cache(const std::string& path,
                                                    std::uint64_t hash);

// LMMSE estimate of every user's stacked channel from the received pilots:
// s_hat_k = mean + C_ss Phi_k^H C_yy^{-1} (vec(Y) - mean_y).
RisLinks lmmse_estimate(const Eigen::MatrixXcd& received,
                        const RisPilotPlan& plan,
                        const StackedChannelStats& stats);

// Minimum-norm least-squares baseline over the same linear model (all K
// users stacked). Reference point for the LMMSE dominance property.
RisLinks least_squares_estimate(const Eigen::MatrixXcd& received,
                                const RisPilotPlan& plan, int num_antennas);

// Block-coordinate ascent: alternates a weighted-MMSE beamformer update
// with exact per-phase maximization (64-point grid + golden-section
// refinement) of the chosen utility. Every candidate step is accepted only
// if it improves the utility, so the trace is nondecreasing by
// construction. Terminates when one outer round improves the utility by
// less than 1e-4 or after max_outer rounds.
struct BcdResult {
  RisDecision decision;
  double utility_value = 0.0;
  std::vector<double> accepted_utilities;  // after every accepted step
};

BcdResult bcd_optimize(const RisLinks& links, double total_power,
                       double sigma0, Utility kind, int max_outer = 30);

// MRT at the current reflection (all-ones by default): the initialization
// bcd_optimize starts from.
RisDecision mrt_init(const RisLinks& links, double total_power);

// bcd_optimize on the true channels.
double perfect_csi_bound(const RisChannelSet& channels, double total_power,
                         double sigma0, Utility kind, int max_outer = 30);

}  // namespace pilotbench
