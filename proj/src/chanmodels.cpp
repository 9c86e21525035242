// SPDX-License-Identifier: Apache-2.0
#include "pilotbench/chanmodels.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pilotbench {

namespace {
constexpr double kPi = std::numbers::pi;

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

// Angle of the b->a direction as seen by a half-wavelength ULA at b. Both
// arrays in the layout are oriented along the x axis, so the broadside
// angle is measured from the y axis.
double bearing(const Eigen::Vector2d& from, const Eigen::Vector2d& to) {
  const Eigen::Vector2d d = to - from;
  return std::atan2(d.x(), d.y());
}

Eigen::VectorXcd cn_vector(int n, RngStream& rng) {
  Eigen::VectorXcd v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.cnormal();
  return v;
}

Eigen::MatrixXcd cn_matrix(int rows, int cols, RngStream& rng) {
  // Row-major draw order so the realization is independent of how the
  // matrix is later used.
  Eigen::MatrixXcd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.cnormal();
  return m;
}
}  // namespace

Eigen::VectorXcd array_response(double phi, int num_antennas) {
  if (num_antennas < 1)
    throw std::invalid_argument("array_response: num_antennas < 1");
  if (!std::isfinite(phi))
    throw std::invalid_argument("array_response: non-finite angle");
  Eigen::VectorXcd a(num_antennas);
  const double step = kPi * std::sin(phi);
  for (int m = 0; m < num_antennas; ++m)
    a(m) = std::polar(1.0, step * static_cast<double>(m));
  return a;
}

double path_gain_direct(const GeometryConfig& cfg, double distance_m) {
  const double d = std::max(distance_m, 1.0);
  return db_to_linear(-(cfg.ref_loss_db +
                        10.0 * cfg.exponent_direct * std::log10(d)));
}

double path_gain_ris(const GeometryConfig& cfg, double distance_m) {
  const double d = std::max(distance_m, 1.0);
  return db_to_linear(-(cfg.ref_loss_db +
                        10.0 * cfg.exponent_ris * std::log10(d)));
}

double direct_gain_at_region_center(const GeometryConfig& cfg) {
  const Eigen::Vector2d center = 0.5 * (cfg.user_min + cfg.user_max);
  return path_gain_direct(cfg, (center - cfg.bs_pos).norm());
}

RisChannelSet sample_ris_channels(const GeometryConfig& cfg, int num_antennas,
                                  int num_elements, int num_users,
                                  RngStream& rng) {
  if (num_antennas < 1 || num_elements < 0 || num_users < 1)
    throw std::invalid_argument("sample_ris_channels: bad dimensions");
  if (!cfg.bs_pos.allFinite() || !cfg.ris_pos.allFinite())
    throw std::invalid_argument("sample_ris_channels: non-finite positions");
  if (cfg.rician_factor < 0.0)
    throw std::invalid_argument("sample_ris_channels: negative Rician factor");

  RisChannelSet out;
  out.num_antennas = num_antennas;
  out.num_elements = num_elements;
  out.num_users = num_users;

  const double eps = cfg.rician_factor;
  const double los_w = std::sqrt(eps / (1.0 + eps));
  const double nlos_w = std::sqrt(1.0 / (1.0 + eps));

  // BS-RIS link: Rician, LoS = outer product of the two array responses.
  const double d_br = (cfg.ris_pos - cfg.bs_pos).norm();
  const double g_br = path_gain_ris(cfg, d_br);
  Eigen::MatrixXcd g_los(num_antennas, num_elements);
  if (num_elements > 0) {
    const Eigen::VectorXcd a_bs =
        array_response(bearing(cfg.bs_pos, cfg.ris_pos), num_antennas);
    const Eigen::VectorXcd a_ris =
        array_response(bearing(cfg.ris_pos, cfg.bs_pos), num_elements);
    g_los = a_bs * a_ris.transpose();
  }
  out.bs_ris = num_elements > 0
                   ? (std::sqrt(g_br) *
                      (los_w * g_los +
                       nlos_w * cn_matrix(num_antennas, num_elements, rng)))
                         .eval()
                   : Eigen::MatrixXcd(num_antennas, 0);

  out.direct.reserve(num_users);
  out.ris_user.reserve(num_users);
  out.cascaded.reserve(num_users);
  for (int k = 0; k < num_users; ++k) {
    Eigen::Vector2d pos;
    pos.x() = rng.uniform(cfg.user_min.x(), cfg.user_max.x());
    pos.y() = rng.uniform(cfg.user_min.y(), cfg.user_max.y());

    const double g_d = path_gain_direct(cfg, (pos - cfg.bs_pos).norm());
    out.direct.push_back(std::sqrt(g_d) * cn_vector(num_antennas, rng));

    Eigen::VectorXcd h_r(num_elements);
    if (num_elements > 0) {
      const double g_ru = path_gain_ris(cfg, (pos - cfg.ris_pos).norm());
      const Eigen::VectorXcd a_ru =
          array_response(bearing(cfg.ris_pos, pos), num_elements);
      h_r = std::sqrt(g_ru) *
            (los_w * a_ru + nlos_w * cn_vector(num_elements, rng));
    }
    out.ris_user.push_back(h_r);
    out.cascaded.push_back(out.bs_ris * h_r.asDiagonal());
  }
  return out;
}

Eigen::VectorXcd synthesize_multipath(
    const std::vector<SparseMultipathChannel::Path>& paths, int num_antennas) {
  Eigen::VectorXcd h = Eigen::VectorXcd::Zero(num_antennas);
  for (const auto& p : paths) h += p.gain * array_response(p.angle, num_antennas);
  return h;
}

SparseMultipathChannel sample_multipath(int num_antennas, int num_paths,
                                        double angle_min, double angle_max,
                                        RngStream& rng) {
  if (num_antennas < 1 || num_paths < 1 || num_paths > num_antennas)
    throw std::invalid_argument("sample_multipath: bad dimensions");
  if (!(angle_min < angle_max) || angle_min <= -kPi / 2 ||
      angle_max >= kPi / 2)
    throw std::invalid_argument("sample_multipath: bad angle range");

  SparseMultipathChannel ch;
  ch.num_antennas = num_antennas;
  ch.paths.reserve(num_paths);
  for (int i = 0; i < num_paths; ++i) {
    SparseMultipathChannel::Path p;
    p.gain = rng.cnormal();
    p.angle = rng.uniform(angle_min, angle_max);
    ch.paths.push_back(p);
  }
  ch.coeffs = synthesize_multipath(ch.paths, num_antennas);
  return ch;
}

}  // namespace pilotbench
