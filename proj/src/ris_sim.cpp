// SPDX-License-Identifier: Apache-2.0
#include "pilotbench/ris_sim.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pilotbench {

namespace {
constexpr double kPi = std::numbers::pi;
}

RisPilotPlan make_pilot_plan(int num_users, int num_elements, int pilot_len,
                             double pilot_power) {
  if (num_users < 1 || pilot_len < 1 || pilot_power <= 0.0)
    throw std::invalid_argument("make_pilot_plan: bad arguments");
  if (pilot_len % num_users != 0)
    throw std::invalid_argument(
        "make_pilot_plan: pilot_len must be a multiple of num_users");

  RisPilotPlan plan;
  plan.pilot_len = pilot_len;
  plan.pilot_power = pilot_power;

  const int blocks = pilot_len / num_users;
  const double amp = std::sqrt(pilot_power);
  plan.user_pilots.resize(num_users, pilot_len);
  for (int b = 0; b < blocks; ++b) {
    for (int j = 0; j < num_users; ++j) {
      const int l = b * num_users + j;
      for (int k = 0; k < num_users; ++k) {
        const double phase = -2.0 * kPi * static_cast<double>(k) *
                             static_cast<double>(j) /
                             static_cast<double>(num_users);
        plan.user_pilots(k, l) = std::polar(amp, phase);
      }
    }
  }

  // Patterns are rows of the (N+1)-point DFT with the zero frequency left
  // for the direct path: the stacked vectors [1; v~(b)] for b = 0..N are
  // orthogonal, so N+1 blocks make the pilot mixing full column rank.
  plan.ris_patterns.resize(num_elements, blocks);
  const int period = num_elements + 1;
  for (int b = 0; b < blocks; ++b) {
    for (int i = 0; i < num_elements; ++i) {
      const double phase = -2.0 * kPi *
                           static_cast<double>((b % period) * (i + 1)) /
                           static_cast<double>(period);
      plan.ris_patterns(i, b) = std::polar(1.0, phase);
    }
  }
  return plan;
}

Eigen::MatrixXcd uplink_pilots(const RisChannelSet& channels,
                               const RisPilotPlan& plan, double sigma1,
                               RngStream& rng) {
  const int m = channels.num_antennas;
  const int k_users = channels.num_users;
  const int l_len = plan.pilot_len;
  if (plan.num_users() != k_users ||
      plan.ris_patterns.rows() != channels.num_elements)
    throw std::invalid_argument("uplink_pilots: plan/channel mismatch");
  if (sigma1 < 0.0) throw std::invalid_argument("uplink_pilots: sigma1 < 0");

  // Combined channel per (user, pattern): h_d[k] + A[k] v~(b).
  const int blocks = plan.num_blocks();
  std::vector<Eigen::MatrixXcd> combined(k_users);
  for (int k = 0; k < k_users; ++k) {
    combined[k].resize(m, blocks);
    for (int b = 0; b < blocks; ++b)
      combined[k].col(b) =
          channels.direct[k] + channels.cascaded[k] * plan.ris_patterns.col(b);
  }

  Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(m, l_len);
  for (int l = 0; l < l_len; ++l) {
    const int b = l / k_users;
    for (int k = 0; k < k_users; ++k)
      y.col(l) += combined[k].col(b) * plan.user_pilots(k, l);
  }
  if (sigma1 > 0.0) {
    for (int l = 0; l < l_len; ++l)
      for (int i = 0; i < m; ++i) y(i, l) += sigma1 * rng.cnormal();
  }
  return y;
}

std::vector<Eigen::MatrixXcd> matched_filter(const Eigen::MatrixXcd& received,
                                             const RisPilotPlan& plan) {
  const int k_users = plan.num_users();
  const int blocks = plan.num_blocks();
  if (received.cols() != plan.pilot_len)
    throw std::invalid_argument("matched_filter: received/plan mismatch");

  // The filter is exact only when user sequences are orthogonal within each
  // block; verify the per-block Gram matrix before trusting it.
  for (int b = 0; b < blocks; ++b) {
    const auto block = plan.user_pilots.middleCols(b * k_users, k_users);
    Eigen::MatrixXcd gram = block * block.adjoint();
    for (int i = 0; i < k_users; ++i)
      for (int j = 0; j < k_users; ++j) {
        if (i == j) continue;
        if (std::abs(gram(i, j)) > 1e-9 * std::abs(gram(i, i)))
          throw std::invalid_argument(
              "matched_filter: user pilots not orthogonal in block " +
              std::to_string(b));
      }
  }

  std::vector<Eigen::MatrixXcd> out(k_users);
  for (int k = 0; k < k_users; ++k) {
    out[k].resize(received.rows(), blocks);
    for (int b = 0; b < blocks; ++b) {
      Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(received.rows());
      double energy = 0.0;
      for (int j = 0; j < k_users; ++j) {
        const int l = b * k_users + j;
        acc += received.col(l) * std::conj(plan.user_pilots(k, l));
        energy += std::norm(plan.user_pilots(k, l));
      }
      out[k].col(b) = acc / energy;
    }
  }
  return out;
}

std::vector<Eigen::VectorXcd> effective_channels(
    const RisChannelSet& channels, const Eigen::VectorXcd& reflection) {
  std::vector<Eigen::VectorXcd> h_eff(channels.num_users);
  for (int k = 0; k < channels.num_users; ++k)
    h_eff[k] = channels.direct[k] + channels.cascaded[k] * reflection;
  return h_eff;
}

Eigen::VectorXd rates_from_effective(
    const std::vector<Eigen::VectorXcd>& effective,
    const Eigen::MatrixXcd& beamformers, double sigma0) {
  if (sigma0 <= 0.0)
    throw std::invalid_argument("rates: sigma0 must be positive");
  const int k_users = static_cast<int>(effective.size());
  if (beamformers.cols() != k_users)
    throw std::invalid_argument("rates: beamformer/user count mismatch");

  Eigen::VectorXd rates(k_users);
  for (int k = 0; k < k_users; ++k) {
    double signal = 0.0, interference = 0.0;
    for (int j = 0; j < k_users; ++j) {
      const std::complex<double> g =
          effective[k].transpose() * beamformers.col(j);
      if (j == k)
        signal = std::norm(g);
      else
        interference += std::norm(g);
    }
    rates(k) = std::log2(1.0 + signal / (interference + sigma0 * sigma0));
  }
  return rates;
}

Eigen::VectorXd achievable_rates(const RisChannelSet& channels,
                                 const RisDecision& decision, double sigma0) {
  return rates_from_effective(
      effective_channels(channels, decision.reflection),
      decision.beamformers, sigma0);
}

double utility(const Eigen::VectorXd& rates, Utility kind) {
  if (rates.size() == 0) throw std::invalid_argument("utility: empty rates");
  return kind == Utility::sum ? rates.sum() : rates.minCoeff();
}

Utility utility_from_string(const std::string& s) {
  if (s == "sum") return Utility::sum;
  if (s == "min") return Utility::min;
  throw std::invalid_argument("unknown utility kind: " + s);
}

std::string to_string(Utility kind) {
  return kind == Utility::sum ? "sum" : "min";
}

}  // namespace pilotbench
