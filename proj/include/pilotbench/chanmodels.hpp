// SPDX-License-Identifier: Apache-2.0
//
// Random channel realizations and array-geometry quantities shared by the
// RIS, FDD-feedback and active-sensing tasks. All samplers are pure
// functions of an explicit RngStream, so callers parallelize by giving each
// worker its own stream.
#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "pilotbench/rng.hpp"

namespace pilotbench {

// Uniform linear array with half-wavelength spacing.
struct ArrayGeometry {
  int num_antennas = 1;
};

// a(phi) = [1, e^{j pi sin phi}, ..., e^{j (M-1) pi sin phi}]^T.
Eigen::VectorXcd array_response(double phi, int num_antennas);

// Geographic layout and large-scale fading constants for the RIS scenario.
// Positions are meters in the plane; path loss in dB follows
// ref_loss_db + 10 * exponent * log10(distance / 1 m).
struct GeometryConfig {
  Eigen::Vector2d bs_pos{0.0, 0.0};
  Eigen::Vector2d ris_pos{45.0, 20.0};
  Eigen::Vector2d user_min{30.0, -20.0};  // user-region rectangle
  Eigen::Vector2d user_max{60.0, 0.0};
  double ref_loss_db = 30.0;
  double exponent_direct = 3.5;
  double exponent_ris = 2.2;        // both BS-RIS and RIS-user segments
  double rician_factor = 10.0;      // linear; 0 = pure scatter
};

// Linear power gain of each link at distance d.
double path_gain_direct(const GeometryConfig& cfg, double distance_m);
double path_gain_ris(const GeometryConfig& cfg, double distance_m);

// Direct-link gain at the center of the user region; used as the fixed
// input scale of the learned RIS models.
double direct_gain_at_region_center(const GeometryConfig& cfg);

// Direct, RIS-user and BS-RIS channels plus the derived cascades
// A[k] = G * diag(h_r[k]) for one realization of a K-user system.
struct RisChannelSet {
  int num_antennas = 0;      // M
  int num_elements = 0;      // N
  int num_users = 0;         // K
  std::vector<Eigen::VectorXcd> direct;      // h_d[k], length M
  std::vector<Eigen::VectorXcd> ris_user;    // h_r[k], length N
  Eigen::MatrixXcd bs_ris;                   // G, M x N
  std::vector<Eigen::MatrixXcd> cascaded;    // A[k], M x N
};

RisChannelSet sample_ris_channels(const GeometryConfig& cfg, int num_antennas,
                                  int num_elements, int num_users,
                                  RngStream& rng);

// Sparse multipath channel h = sum_i gain_i * a(angle_i).
struct SparseMultipathChannel {
  struct Path {
    std::complex<double> gain;
    double angle;  // radians
  };
  int num_antennas = 0;
  std::vector<Path> paths;
  Eigen::VectorXcd coeffs;  // h, length M
};

SparseMultipathChannel sample_multipath(int num_antennas, int num_paths,
                                        double angle_min, double angle_max,
                                        RngStream& rng);

// Rebuilds h from the stored paths; the type invariant is
// coeffs == synthesize(paths) to 1e-12 relative.
Eigen::VectorXcd synthesize_multipath(
    const std::vector<SparseMultipathChannel::Path>& paths, int num_antennas);

}  // namespace pilotbench
