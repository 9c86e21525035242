// SPDX-License-Identifier: Apache-2.0
#include "pilotbench/ris_baselines.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "pilotbench/parallel.hpp"

namespace pilotbench {

namespace {
constexpr double kPi = std::numbers::pi;

Eigen::VectorXcd stack_user_channel(const Eigen::VectorXcd& direct,
                                    const Eigen::MatrixXcd& cascaded) {
  const auto m = direct.size();
  const auto n = cascaded.cols();
  Eigen::VectorXcd s(m * (n + 1));
  s.head(m) = direct;
  for (Eigen::Index j = 0; j < n; ++j)
    s.segment(m * (j + 1), m) = cascaded.col(j);
  return s;
}

RisLinks unstack_links(const std::vector<Eigen::VectorXcd>& stacked, int m,
                       int n) {
  RisLinks links;
  for (const auto& s : stacked) {
    links.direct.push_back(s.head(m));
    Eigen::MatrixXcd a(m, n);
    for (int j = 0; j < n; ++j) a.col(j) = s.segment(m * (j + 1), m);
    links.cascaded.push_back(std::move(a));
  }
  return links;
}

std::vector<Eigen::VectorXcd> effective_of(const RisLinks& links,
                                           const Eigen::VectorXcd& v) {
  std::vector<Eigen::VectorXcd> h(links.num_users());
  for (int k = 0; k < links.num_users(); ++k)
    h[k] = links.direct[k] + links.cascaded[k] * v;
  return h;
}

double utility_of(const std::vector<Eigen::VectorXcd>& h_eff,
                  const Eigen::MatrixXcd& w, double sigma0, Utility kind) {
  return utility(rates_from_effective(h_eff, w, sigma0), kind);
}

// Weighted-MMSE beamformer update for maximizing sum_k alpha_k R_k at fixed
// effective channels. Returns a feasible W with sum ||w_k||^2 == total_power.
Eigen::MatrixXcd wmmse_update(const std::vector<Eigen::VectorXcd>& h_eff,
                              const Eigen::MatrixXcd& w_init,
                              const Eigen::VectorXd& alpha, double total_power,
                              double sigma0, int inner_iters) {
  const int k_users = static_cast<int>(h_eff.size());
  const int m = static_cast<int>(h_eff[0].size());
  std::vector<Eigen::VectorXcd> g(k_users);
  for (int k = 0; k < k_users; ++k) g[k] = h_eff[k].conjugate();

  Eigen::MatrixXcd w = w_init;
  for (int it = 0; it < inner_iters; ++it) {
    // Receive scalars and MSE weights at the current W.
    Eigen::VectorXcd u(k_users);
    Eigen::VectorXd rho(k_users);
    for (int k = 0; k < k_users; ++k) {
      std::complex<double> c = g[k].dot(w.col(k));  // g^H w = h^T w
      double denom = sigma0 * sigma0;
      for (int j = 0; j < k_users; ++j) denom += std::norm(g[k].dot(w.col(j)));
      u(k) = c / denom;
      const double mse = 1.0 - std::norm(c) / denom;
      rho(k) = alpha(k) / std::max(mse, 1e-12);
    }

    Eigen::MatrixXcd quad = Eigen::MatrixXcd::Zero(m, m);
    for (int k = 0; k < k_users; ++k)
      quad += rho(k) * std::norm(u(k)) * (g[k] * g[k].adjoint());
    const double mu_floor = 1e-12 * std::abs(quad.trace()) / m + 1e-300;

    auto solve_w = [&](double mu) {
      Eigen::MatrixXcd a = quad + mu * Eigen::MatrixXcd::Identity(m, m);
      Eigen::LDLT<Eigen::MatrixXcd> ldlt(a);
      Eigen::MatrixXcd cand(m, k_users);
      for (int k = 0; k < k_users; ++k)
        cand.col(k) = ldlt.solve(g[k]) * (rho(k) * u(k));
      return cand;
    };

    Eigen::MatrixXcd cand = solve_w(mu_floor);
    double power = cand.squaredNorm();
    if (power > total_power) {
      // Power decreases monotonically in mu; bracket then bisect.
      double lo = mu_floor, hi = std::max(mu_floor * 2, 1e-12);
      while (solve_w(hi).squaredNorm() > total_power && hi < 1e30) hi *= 4.0;
      for (int b = 0; b < 70; ++b) {
        const double mid = 0.5 * (lo + hi);
        if (solve_w(mid).squaredNorm() > total_power)
          lo = mid;
        else
          hi = mid;
      }
      cand = solve_w(hi);
      power = cand.squaredNorm();
    }
    if (power > 0) cand *= std::sqrt(total_power / power);
    w = cand;
  }
  return w;
}

// One coordinate pass over the RIS phases: exact 1-D maximization of the
// utility over each phase on a 64-point grid followed by golden-section
// refinement between the neighbors of the best grid point. Updates v and
// h_eff in place and returns the utility after every accepted step.
std::vector<double> phase_sweep(const RisLinks& links, Eigen::VectorXcd& v,
                                std::vector<Eigen::VectorXcd>& h_eff,
                                const Eigen::MatrixXcd& w, double sigma0,
                                Utility kind, double current) {
  const int k_users = links.num_users();
  const int n = links.num_elements();
  const int grid = 64;
  std::vector<double> accepted;

  // cross(k, j) = h_eff[k]^T w_j, maintained incrementally.
  Eigen::MatrixXcd cross(k_users, k_users);
  for (int k = 0; k < k_users; ++k)
    for (int j = 0; j < k_users; ++j)
      cross(k, j) = h_eff[k].transpose() * w.col(j);

  auto utility_at = [&](const Eigen::MatrixXcd& c) {
    Eigen::VectorXd rates(k_users);
    for (int k = 0; k < k_users; ++k) {
      double interference = sigma0 * sigma0;
      for (int j = 0; j < k_users; ++j)
        if (j != k) interference += std::norm(c(k, j));
      rates(k) = std::log2(1.0 + std::norm(c(k, k)) / interference);
    }
    return utility(rates, kind);
  };

  double best_total = current;
  for (int i = 0; i < n; ++i) {
    // dir(k, j) = (A_k column i)^T w_j.
    Eigen::MatrixXcd dir(k_users, k_users);
    for (int k = 0; k < k_users; ++k)
      for (int j = 0; j < k_users; ++j)
        dir(k, j) = links.cascaded[k].col(i).transpose() * w.col(j);

    auto value_at = [&](double omega) {
      const std::complex<double> delta = std::polar(1.0, omega) - v(i);
      return utility_at(cross + delta * dir);
    };

    double best_omega = std::arg(v(i));
    double best_val = best_total;
    bool improved = false;
    for (int g = 0; g < grid; ++g) {
      const double omega = -kPi + 2.0 * kPi * g / grid;
      const double val = value_at(omega);
      if (val > best_val) {
        best_val = val;
        best_omega = omega;
        improved = true;
      }
    }
    if (improved) {
      double lo = best_omega - 2.0 * kPi / grid;
      double hi = best_omega + 2.0 * kPi / grid;
      const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
      double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
      double f1 = value_at(x1), f2 = value_at(x2);
      for (int it = 0; it < 30; ++it) {
        if (f1 < f2) {
          lo = x1;
          x1 = x2;
          f1 = f2;
          x2 = lo + gr * (hi - lo);
          f2 = value_at(x2);
        } else {
          hi = x2;
          x2 = x1;
          f2 = f1;
          x1 = hi - gr * (hi - lo);
          f1 = value_at(x1);
        }
      }
      const double refined = 0.5 * (lo + hi);
      if (value_at(refined) > best_val) {
        best_val = value_at(refined);
        best_omega = refined;
      }

      const std::complex<double> new_vi = std::polar(1.0, best_omega);
      const std::complex<double> delta = new_vi - v(i);
      cross += delta * dir;
      for (int k = 0; k < k_users; ++k)
        h_eff[k] += delta * links.cascaded[k].col(i);
      v(i) = new_vi;
      best_total = best_val;
      accepted.push_back(best_val);
    }
  }
  return accepted;
}

}  // namespace

RisLinks links_of(const RisChannelSet& channels) {
  RisLinks links;
  links.direct = channels.direct;
  links.cascaded = channels.cascaded;
  return links;
}

Eigen::MatrixXcd pilot_mixing_operator(const RisPilotPlan& plan, int user,
                                       int num_antennas) {
  const int m = num_antennas;
  const int n = static_cast<int>(plan.ris_patterns.rows());
  const int l = plan.pilot_len;
  const int k_users = plan.num_users();
  Eigen::MatrixXcd phi = Eigen::MatrixXcd::Zero(m * l, m * (n + 1));
  for (int ell = 0; ell < l; ++ell) {
    const int b = ell / k_users;
    const std::complex<double> x = plan.user_pilots(user, ell);
    for (int i = 0; i < m; ++i) phi(ell * m + i, i) = x;
    for (int j = 0; j < n; ++j) {
      const std::complex<double> c = x * plan.ris_patterns(j, b);
      for (int i = 0; i < m; ++i) phi(ell * m + i, m * (j + 1) + i) = c;
    }
  }
  return phi;
}

void StackedChannelStats::attach_plan(const RisPilotPlan& plan) {
  const int m = num_antennas;
  const int l = plan.pilot_len;
  mixing.clear();
  for (int k = 0; k < num_users; ++k)
    mixing.push_back(pilot_mixing_operator(plan, k, m));

  mean_rx = Eigen::VectorXcd::Zero(m * l);
  cov_rx = Eigen::MatrixXcd::Zero(m * l, m * l);
  for (int k = 0; k < num_users; ++k) {
    mean_rx += mixing[k] * mean;
    cov_rx += mixing[k] * cov * mixing[k].adjoint();
  }
  cov_rx += sigma1 * sigma1 * Eigen::MatrixXcd::Identity(m * l, m * l);
  const double load = 1e-12 * std::abs(cov_rx.trace()) / (m * l);
  cov_rx += load * Eigen::MatrixXcd::Identity(m * l, m * l);
  cov_rx_solver.compute(cov_rx);
}

StackedChannelStats estimate_stats(const GeometryConfig& cfg, int num_antennas,
                                   int num_elements, int num_users,
                                   const RisPilotPlan& plan, double sigma1,
                                   int n_draws, RngStream& rng) {
  if (n_draws < 1000)
    throw std::invalid_argument("estimate_stats: need at least 1000 draws");

  const int dim = num_antennas * (num_elements + 1);
  const std::uint64_t base = rng.next_u64();

  // Fixed chunking keeps the reduction order (and therefore the result)
  // independent of the thread count.
  const int chunks = 32;
  std::vector<Eigen::VectorXcd> sum1(chunks, Eigen::VectorXcd::Zero(dim));
  std::vector<Eigen::MatrixXcd> sum2(chunks, Eigen::MatrixXcd::Zero(dim, dim));
  par::for_each(chunks, [&](std::int64_t c) {
    const int lo = static_cast<int>(c * n_draws / chunks);
    const int hi = static_cast<int>((c + 1) * n_draws / chunks);
    for (int d = lo; d < hi; ++d) {
      RngStream stream(derive_seed(base, "stats-draw", d));
      auto ch = sample_ris_channels(cfg, num_antennas, num_elements,
                                    num_users, stream);
      for (int k = 0; k < num_users; ++k) {
        Eigen::VectorXcd s = stack_user_channel(ch.direct[k], ch.cascaded[k]);
        sum1[c] += s;
        sum2[c].selfadjointView<Eigen::Lower>().rankUpdate(s, 1.0);
      }
    }
  });

  Eigen::VectorXcd total1 = Eigen::VectorXcd::Zero(dim);
  Eigen::MatrixXcd total2 = Eigen::MatrixXcd::Zero(dim, dim);
  for (int c = 0; c < chunks; ++c) {
    total1 += sum1[c];
    total2 += sum2[c];
  }
  total2 = total2.selfadjointView<Eigen::Lower>();

  const double count = static_cast<double>(n_draws) * num_users;
  StackedChannelStats stats;
  stats.num_antennas = num_antennas;
  stats.num_elements = num_elements;
  stats.num_users = num_users;
  stats.sigma1 = sigma1;
  stats.mean = total1 / count;
  stats.cov = total2 / count - stats.mean * stats.mean.adjoint();
  stats.cov = 0.5 * (stats.cov + stats.cov.adjoint()).eval();
  const double load = 1e-6 * std::abs(stats.cov.trace()) / dim;
  stats.cov += load * Eigen::MatrixXcd::Identity(dim, dim);
  stats.attach_plan(plan);
  return stats;
}

namespace {
template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
bool read_pod(std::ifstream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return bool(in);
}
constexpr char kStatsMagic[5] = {'P', 'L', 'S', 'C', '1'};
}  // namespace

bool save_stats_cache(const std::string& path,
                      const StackedChannelStats& stats, std::uint64_t hash,
                      int n_draws) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return false;
  out.write(kStatsMagic, 5);
  write_pod(out, std::uint32_t{1});
  write_pod(out, hash);
  write_pod(out, stats.num_antennas);
  write_pod(out, stats.num_elements);
  write_pod(out, stats.num_users);
  write_pod(out, stats.sigma1);
  write_pod(out, n_draws);
  out.write(reinterpret_cast<const char*>(stats.mean.data()),
            sizeof(std::complex<double>) * stats.mean.size());
  out.write(reinterpret_cast<const char*>(stats.cov.data()),
            sizeof(std::complex<double>) * stats.cov.size());
  return bool(out);
}

std::optional<StackedChannelStats> load_stats_cache(const std::string& path,
                                                    std::uint64_t hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[5];
  in.read(magic, 5);
  if (!in || std::memcmp(magic, kStatsMagic, 5) != 0) return std::nullopt;
  std::uint32_t version = 0;
  std::uint64_t stored_hash = 0;
  if (!read_pod(in, version) || version != 1) return std::nullopt;
  if (!read_pod(in, stored_hash) || stored_hash != hash) return std::nullopt;
  StackedChannelStats stats;
  int n_draws = 0;
  if (!read_pod(in, stats.num_antennas) || !read_pod(in, stats.num_elements) ||
      !read_pod(in, stats.num_users) || !read_pod(in, stats.sigma1) ||
      !read_pod(in, n_draws))
    return std::nullopt;
  const int dim = stats.num_antennas * (stats.num_elements + 1);
  stats.mean.resize(dim);
  stats.cov.resize(dim, dim);
  in.read(reinterpret_cast<char*>(stats.mean.data()),
          sizeof(std::complex<double>) * dim);
  in.read(reinterpret_cast<char*>(stats.cov.data()),
          sizeof(std::complex<double>) * dim * dim);
  if (!in) return std::nullopt;
  return stats;
}

RisLinks lmmse_estimate(const Eigen::MatrixXcd& received,
                        const RisPilotPlan& plan,
                        const StackedChannelStats& stats) {
  const int m = stats.num_antennas;
  const int n = stats.num_elements;
  if (received.rows() != m || received.cols() != plan.pilot_len)
    throw std::invalid_argument("lmmse_estimate: dimension mismatch");
  if (stats.mixing.empty())
    throw std::invalid_argument("lmmse_estimate: stats lack a plan");

  Eigen::VectorXcd y(received.size());
  for (int l = 0; l < received.cols(); ++l)
    y.segment(l * m, m) = received.col(l);

  const Eigen::VectorXcd innovation =
      stats.cov_rx_solver.solve(y - stats.mean_rx);
  std::vector<Eigen::VectorXcd> stacked;
  for (int k = 0; k < stats.num_users; ++k)
    stacked.push_back(stats.mean +
                      stats.cov * (stats.mixing[k].adjoint() * innovation));
  return unstack_links(stacked, m, n);
}

RisLinks least_squares_estimate(const Eigen::MatrixXcd& received,
                                const RisPilotPlan& plan, int num_antennas) {
  const int m = num_antennas;
  const int k_users = plan.num_users();
  const int n = static_cast<int>(plan.ris_patterns.rows());
  const int dim = m * (n + 1);

  Eigen::MatrixXcd phi(m * plan.pilot_len, dim * k_users);
  for (int k = 0; k < k_users; ++k)
    phi.middleCols(k * dim, dim) = pilot_mixing_operator(plan, k, m);

  Eigen::VectorXcd y(received.size());
  for (int l = 0; l < received.cols(); ++l)
    y.segment(l * m, m) = received.col(l);

  Eigen::VectorXcd s_all = phi.completeOrthogonalDecomposition().solve(y);

  std::vector<Eigen::VectorXcd> stacked;
  for (int k = 0; k < k_users; ++k)
    stacked.push_back(s_all.segment(k * dim, dim));
  return unstack_links(stacked, m, n);
}

RisDecision mrt_init(const RisLinks& links, double total_power) {
  const int k_users = links.num_users();
  const int m = links.num_antennas();
  Eigen::VectorXcd v = Eigen::VectorXcd::Ones(links.num_elements());
  auto h_eff = effective_of(links, v);
  Eigen::MatrixXcd w(m, k_users);
  for (int k = 0; k < k_users; ++k) {
    const double norm = h_eff[k].norm();
    w.col(k) = norm > 0 ? (h_eff[k].conjugate() / norm).eval()
                        : Eigen::VectorXcd::Unit(m, 0).eval();
    w.col(k) *= std::sqrt(total_power / k_users);
  }
  return {w, v};
}

BcdResult bcd_optimize(const RisLinks& links, double total_power,
                       double sigma0, Utility kind, int max_outer) {
  if (links.num_users() < 1)
    throw std::invalid_argument("bcd_optimize: no users");
  const int k_users = links.num_users();

  RisDecision dec = mrt_init(links, total_power);
  auto h_eff = effective_of(links, dec.reflection);
  double current = utility_of(h_eff, dec.beamformers, sigma0, kind);

  BcdResult result;
  result.accepted_utilities.push_back(current);

  for (int outer = 0; outer < max_outer; ++outer) {
    const double entry = current;

    // Beamformer block. Plain WMMSE for the sum utility; for the min
    // utility a short multiplicative-weights loop shifting weight onto the
    // weakest users. Every candidate passes the acceptance guard.
    std::vector<Eigen::MatrixXcd> candidates;
    if (kind == Utility::sum) {
      candidates.push_back(wmmse_update(h_eff, dec.beamformers,
                                        Eigen::VectorXd::Ones(k_users),
                                        total_power, sigma0, 8));
    } else {
      Eigen::VectorXd alpha = Eigen::VectorXd::Ones(k_users);
      Eigen::MatrixXcd w = dec.beamformers;
      for (int round = 0; round < 6; ++round) {
        w = wmmse_update(h_eff, w, alpha, total_power, sigma0, 4);
        candidates.push_back(w);
        Eigen::VectorXd rates = rates_from_effective(h_eff, w, sigma0);
        const double mean_rate = rates.mean();
        for (int k = 0; k < k_users; ++k)
          alpha(k) *= std::exp(0.8 * (mean_rate - rates(k)) /
                               std::max(mean_rate, 1e-9));
        alpha *= k_users / alpha.sum();
      }
    }
    for (const auto& cand : candidates) {
      const double val = utility_of(h_eff, cand, sigma0, kind);
      if (val > current) {
        dec.beamformers = cand;
        current = val;
        result.accepted_utilities.push_back(current);
      }
    }

    if (links.num_elements() > 0) {
      auto accepted = phase_sweep(links, dec.reflection, h_eff,
                                  dec.beamformers, sigma0, kind, current);
      for (double val : accepted) {
        current = val;
        result.accepted_utilities.push_back(val);
      }
    }

    if (current - entry < 1e-4) break;
  }

  result.decision = dec;
  result.utility_value = current;
  return result;
}

double perfect_csi_bound(const RisChannelSet& channels, double total_power,
                         double sigma0, Utility kind, int max_outer) {
  return bcd_optimize(links_of(channels), total_power, sigma0, kind, max_outer)
      .utility_value;
}

}  // namespace pilotbench
