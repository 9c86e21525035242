// SPDX-License-Identifier: Apache-2.0
//
// Forward models and metrics for the RIS-assisted multiuser downlink:
// uplink pilot reception, matched filtering, achievable rates and network
// utility. The rate convention is transpose (no conjugation) throughout:
// the signal seen by user k from beamformer w is (h_d + A v)^T w.
#pragma once

#include <Eigen/Dense>
#include <vector>

#include "pilotbench/chanmodels.hpp"
#include "pilotbench/rng.hpp"

namespace pilotbench {

// Uplink training schedule. Pilots are organized in L/K blocks of K slots;
// within a block the K user sequences are mutually orthogonal columns of a
// scaled DFT matrix at full power, and the RIS holds one training pattern
// per block (rows of an N-point DFT structure, unit modulus). The plan is a
// deterministic function of (K, N, L, P_u).
struct RisPilotPlan {
  int pilot_len = 0;               // L, multiple of K
  double pilot_power = 1.0;        // P_u
  Eigen::MatrixXcd user_pilots;    // K x L, |x_k(l)|^2 <= P_u
  Eigen::MatrixXcd ris_patterns;   // N x (L/K), unit-modulus entries

  int num_users() const { return static_cast<int>(user_pilots.rows()); }
  int num_blocks() const { return num_users() == 0 ? 0 : pilot_len / num_users(); }
};

RisPilotPlan make_pilot_plan(int num_users, int num_elements, int pilot_len,
                             double pilot_power);

// Received uplink pilots Y (M x L): column l is
// sum_k (h_d[k] + A[k] v~(l)) x_k(l) + n(l), n ~ CN(0, sigma1^2 I).
Eigen::MatrixXcd uplink_pilots(const RisChannelSet& channels,
                               const RisPilotPlan& plan, double sigma1,
                               RngStream& rng);

// Correlates Y against each user's pilot sequence block by block,
// normalized by the block pilot energy. Output k is M x (L/K); in the
// noiseless case column b equals h_d[k] + A[k] v~(b) exactly. Rejects plans
// whose per-block user pilots are not orthogonal.
std::vector<Eigen::MatrixXcd> matched_filter(const Eigen::MatrixXcd& received,
                                             const RisPilotPlan& plan);

// Joint downlink decision: beamformer columns and RIS reflection vector.
// Feasible decisions satisfy sum_k ||w_k||^2 <= P_d and |v_i| = 1.
struct RisDecision {
  Eigen::MatrixXcd beamformers;   // W, M x K
  Eigen::VectorXcd reflection;    // v, length N
};

// Per-user achievable rates (bits/s/Hz) of Eq.-(2) form on the effective
// channels h_eff[k] = h_d[k] + A[k] v.
Eigen::VectorXd rates_from_effective(
    const std::vector<Eigen::VectorXcd>& effective,
    const Eigen::MatrixXcd& beamformers, double sigma0);

Eigen::VectorXd achievable_rates(const RisChannelSet& channels,
                                 const RisDecision& decision, double sigma0);

std::vector<Eigen::VectorXcd> effective_channels(
    const RisChannelSet& channels, const Eigen::VectorXcd& reflection);

enum class Utility { sum, min };

double utility(const Eigen::VectorXd& rates, Utility kind);

Utility utility_from_string(const std::string& s);
std::string to_string(Utility kind);

}  // namespace pilotbench
