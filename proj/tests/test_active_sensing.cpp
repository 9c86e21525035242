#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "pilotbench/active_sensing.hpp"

using namespace pilotbench;
constexpr double kPi = std::numbers::pi;

namespace {

SensingConfig small_cfg() {
  SensingConfig cfg;
  cfg.num_antennas = 8;
  cfg.stages = 3;
  cfg.num_paths = 1;
  cfg.lstm_width = 16;
  cfg.head_hidden = 16;
  return cfg;
}

SparseMultipathChannel channel_at(double angle, std::complex<double> gain,
                                  int m) {
  SparseMultipathChannel ch;
  ch.num_antennas = m;
  ch.paths = {{gain, angle}};
  ch.coeffs = synthesize_multipath(ch.paths, m);
  return ch;
}

}  // namespace

TEST_CASE("sense_step: matched beam, orthogonal beam and noise energy") {
  const int m = 16;
  auto h = array_response(0.0, m);
  Eigen::VectorXcd w = h.conjugate() / std::sqrt(double(m));
  RngStream rng(1);
  // Matched beam: |y| = sqrt(P) sqrt(M) at sigma = 0.
  auto y = sense_step(h, w, 4.0, 0.0, rng);
  CHECK(std::abs(y) == doctest::Approx(2.0 * std::sqrt(double(m))).epsilon(1e-12));

  // Orthogonal beam gives zero.
  Eigen::VectorXcd w2 = array_response(kPi / 6, m).conjugate() / std::sqrt(double(m));
  // a(pi/6) with M=16 is orthogonal to a(0): phase steps of pi/2 sum to 0.
  auto y2 = sense_step(h, w2, 4.0, 0.0, rng);
  CHECK(std::abs(y2) < 1e-10);

  // Noise second moment.
  Eigen::VectorXcd zero_h = Eigen::VectorXcd::Zero(m);
  double acc = 0.0;
  const int draws = 100000;
  for (int d = 0; d < draws; ++d)
    acc += std::norm(sense_step(zero_h, w, 1.0, 0.8, rng));
  CHECK(acc / draws == doctest::Approx(0.64).epsilon(0.03));

  CHECK_THROWS_AS(sense_step(h, 2.0 * w, 1.0, 0.0, rng),
                  std::invalid_argument);
}

TEST_CASE("normalized gain is bounded by 1 and achieved by conjugate MRT") {
  RngStream rng(2);
  auto ch = sample_multipath(16, 2, -1.0, 1.0, rng);
  Eigen::VectorXcd best = ch.coeffs.conjugate() / ch.coeffs.norm();
  CHECK(normalized_gain(ch.coeffs, best) == doctest::Approx(1.0).epsilon(1e-12));
  for (int t = 0; t < 200; ++t) {
    Eigen::VectorXcd v(16);
    for (int i = 0; i < 16; ++i) v(i) = rng.cnormal();
    v /= v.norm();
    CHECK(normalized_gain(ch.coeffs, v) <= 1.0 + 1e-12);
  }
}

TEST_CASE("agent rollout: unit-norm sensing vectors and design") {
  auto cfg = small_cfg();
  ActiveAgent agent(cfg, 7);
  RngStream rng(3);
  auto ch = sample_multipath(cfg.num_antennas, 1, cfg.aoa_min, cfg.aoa_max, rng);
  auto trace = agent.rollout(ch, cfg.sigma1, rng);
  REQUIRE(trace.sensing.cols() == cfg.stages);
  for (int t = 0; t < cfg.stages; ++t)
    CHECK(trace.sensing.col(t).norm() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(trace.design.norm() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("agent_step is deterministic and emits unit-norm vectors") {
  auto cfg = small_cfg();
  ActiveAgent agent(cfg, 11);
  auto c = agent.initial_cell();
  auto s = agent.initial_hidden();
  auto o1 = agent.agent_step(c, s, {0.3, -0.7});
  auto o2 = agent.agent_step(c, s, {0.3, -0.7});
  CHECK(o1.cell == o2.cell);
  CHECK(o1.hidden == o2.hidden);
  CHECK(o1.next_sensing == o2.next_sensing);
  CHECK(o1.next_sensing.norm() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(agent.initial_sensing().norm() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("measurements recorded in the trace match the sensing vectors") {
  auto cfg = small_cfg();
  ActiveAgent agent(cfg, 13);
  RngStream rng(5);
  auto ch = sample_multipath(cfg.num_antennas, 1, cfg.aoa_min, cfg.aoa_max, rng);
  auto trace = agent.rollout(ch, 0.0, rng);  // noiseless: y = sqrt(P) w^T h
  for (int t = 0; t < cfg.stages; ++t) {
    const std::complex<double> want =
        std::sqrt(cfg.power) *
        (trace.sensing.col(t).transpose() * ch.coeffs)(0, 0);
    CHECK(std::abs(trace.measurements(t) - want) < 1e-12);
  }
}

TEST_CASE("aoa objective: estimates stay within the configured range") {
  auto cfg = small_cfg();
  cfg.objective = SensingObjective::aoa;
  ActiveAgent agent(cfg, 17);
  RngStream rng(6);
  auto ch = sample_multipath(cfg.num_antennas, 1, cfg.aoa_min, cfg.aoa_max, rng);
  auto trace = agent.rollout(ch, cfg.sigma1, rng);
  REQUIRE(trace.aoa_estimates.size() == 1);
  CHECK(trace.aoa_estimates(0) >= cfg.aoa_min);
  CHECK(trace.aoa_estimates(0) <= cfg.aoa_max);
}

TEST_CASE("loss is invariant to batch duplication and finite at T=0") {
  auto cfg = small_cfg();
  ActiveAgent agent(cfg, 19);
  std::vector<SparseMultipathChannel> batch;
  for (int i = 0; i < 3; ++i) {
    RngStream rng(derive_seed(20, "b", i));
    batch.push_back(
        sample_multipath(cfg.num_antennas, 1, cfg.aoa_min, cfg.aoa_max, rng));
  }
  auto doubled = batch;
  doubled.insert(doubled.end(), batch.begin(), batch.end());

  // Noiseless forward so duplicated rows are exact copies.
  SensingConfig quiet = cfg;
  quiet.sigma1 = 0.0;
  ActiveAgent agent_q(quiet, 19);
  ad::Tape t1, t2;
  auto p1 = push_params(t1, agent_q.params());
  auto p2 = push_params(t2, agent_q.params());
  RngStream n1(1), n2(1);
  const double a = agent_q.loss(t1, p1, batch, n1).val()(0, 0);
  const double b = agent_q.loss(t2, p2, doubled, n2).val()(0, 0);
  CHECK(a == doctest::Approx(b).epsilon(1e-12));

  // Degenerate T=0: design comes straight from the initial cell state.
  SensingConfig zero = cfg;
  zero.stages = 0;
  ActiveAgent agent0(zero, 19);
  ad::Tape t3;
  auto p3 = push_params(t3, agent0.params());
  RngStream n3(1);
  const double c = agent0.loss(t3, p3, batch, n3).val()(0, 0);
  CHECK(std::isfinite(c));
}

TEST_CASE("agent gradient matches central finite differences") {
  auto cfg = small_cfg();
  cfg.stages = 3;
  ActiveAgent agent(cfg, 23);
  std::vector<SparseMultipathChannel> batch;
  for (int i = 0; i < 2; ++i) {
    RngStream rng(derive_seed(30, "b", i));
    batch.push_back(
        sample_multipath(cfg.num_antennas, 1, cfg.aoa_min, cfg.aoa_max, rng));
  }

  Eigen::VectorXd grad(agent.params().flat_size());
  {
    ad::Tape tape;
    auto pvars = push_params(tape, agent.params());
    RngStream noise(9);
    ad::Var loss = agent.loss(tape, pvars, batch, noise);
    tape.backward(loss);
    auto grads = collect_grads(tape, pvars);
    Eigen::Index at = 0;
    for (const auto& g : grads) {
      grad.segment(at, g.size()) =
          Eigen::Map<const Eigen::VectorXd>(g.data(), g.size());
      at += g.size();
    }
  }

  const Eigen::VectorXd theta0 = agent.params().flatten();
  auto eval = [&](const Eigen::VectorXd& theta) {
    agent.params().unflatten(theta);
    ad::Tape tape;
    auto pvars = push_params(tape, agent.params());
    RngStream noise(9);
    return agent.loss(tape, pvars, batch, noise).val()(0, 0);
  };
  RngStream dir_rng(77);
  const double h = 1e-4;
  for (int d = 0; d < 10; ++d) {
    Eigen::VectorXd dir(theta0.size());
    for (Eigen::Index i = 0; i < dir.size(); ++i) dir(i) = dir_rng.normal();
    dir /= dir.norm();
    const double fd = (eval(theta0 + h * dir) - eval(theta0 - h * dir)) / (2 * h);
    const double an = grad.dot(dir);
    CHECK(std::abs(an - fd) <= 1e-3 * std::max(1e-9, std::abs(fd)));
  }
  agent.params().unflatten(theta0);
}

TEST_CASE("fixed sensing: reproducible random mode, unit norms") {
  auto cfg = small_cfg();
  FixedSensing a(cfg, FixedSensing::Mode::random, 31);
  FixedSensing b(cfg, FixedSensing::Mode::random, 31);
  CHECK(a.sensing_matrix() == b.sensing_matrix());
  FixedSensing c(cfg, FixedSensing::Mode::random, 32);
  CHECK(a.sensing_matrix() != c.sensing_matrix());
  for (int t = 0; t < cfg.stages; ++t)
    CHECK(a.sensing_matrix().col(t).norm() ==
          doctest::Approx(1.0).epsilon(1e-12));

  FixedSensing learned(cfg, FixedSensing::Mode::learned, 33);
  for (int t = 0; t < cfg.stages; ++t)
    CHECK(learned.sensing_matrix().col(t).norm() ==
          doctest::Approx(1.0).epsilon(1e-12));
  RngStream rng(8);
  auto ch = sample_multipath(cfg.num_antennas, 1, cfg.aoa_min, cfg.aoa_max, rng);
  auto trace = learned.rollout(ch, cfg.sigma1, rng);
  CHECK(trace.design.norm() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("omp beamformer recovers a noiseless on-grid single path") {
  const int m = 32, t_stages = 4, grid = 4 * m;
  SensingConfig cfg;
  cfg.num_antennas = m;
  cfg.stages = t_stages;
  FixedSensing fixed(cfg, FixedSensing::Mode::random, 41);
  const double angle = uniform_grid(cfg.aoa_min, cfg.aoa_max, grid)(37);
  auto ch = channel_at(angle, {0.9, -0.4}, m);
  RngStream rng(9);
  auto trace = fixed.rollout(ch, 0.0, rng);
  auto v = omp_beamformer(trace, cfg.power, grid, 1, cfg.aoa_min, cfg.aoa_max);
  CHECK(v.norm() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(normalized_gain(ch.coeffs, v) >= 0.999);
}

TEST_CASE("omp beamformer degrades monotonically with noise") {
  const int m = 16, grid = 64;
  SensingConfig cfg;
  cfg.num_antennas = m;
  cfg.stages = 6;
  FixedSensing fixed(cfg, FixedSensing::Mode::random, 43);
  const int draws = 200;
  std::vector<double> sigmas{0.0, 1.0, 4.0};
  std::vector<double> means;
  for (double s : sigmas) {
    double acc = 0.0;
    for (int d = 0; d < draws; ++d) {
      RngStream rng(derive_seed(44, "omp-noise", d));
      auto ch = sample_multipath(m, 1, cfg.aoa_min, cfg.aoa_max, rng);
      auto trace = fixed.rollout(ch, s, rng);
      acc += normalized_gain(
          ch.coeffs,
          omp_beamformer(trace, cfg.power, grid, 1, cfg.aoa_min, cfg.aoa_max));
    }
    means.push_back(acc / draws);
  }
  CHECK(means[0] > means[1]);
  CHECK(means[1] > means[2]);
}

TEST_CASE("bisection: interval halves per stage and finds the path noiselessly") {
  const int m = 32;
  RngStream rng(10);
  const double angle = 0.37;
  auto ch = channel_at(angle, {1.2, 0.3}, m);

  auto res = bisection_baseline(ch, 12, 1.0, 0.0, -kPi / 3, kPi / 3, rng);
  const double initial = 2 * kPi / 3;
  CHECK(res.width == doctest::Approx(initial / 64).epsilon(1e-12));  // 6 halvings
  CHECK(std::abs(res.center - angle) <= initial / 64);
  CHECK(res.design.norm() == doctest::Approx(1.0).epsilon(1e-9));

  auto multi = sample_multipath(m, 2, -1.0, 1.0, rng);
  CHECK_THROWS_AS(bisection_baseline(multi, 4, 1.0, 0.0, -1.0, 1.0, rng),
                  std::invalid_argument);
}

TEST_CASE("bisection accuracy collapses to chance under huge noise") {
  const int m = 16;
  int hits_clean = 0, hits_noisy = 0;
  const int draws = 120;
  for (int d = 0; d < draws; ++d) {
    RngStream rng(derive_seed(45, "bis", d));
    auto ch = sample_multipath(m, 1, -kPi / 3, kPi / 3, rng);
    const double truth = ch.paths[0].angle;
    auto clean = bisection_baseline(ch, 8, 1.0, 0.0, -kPi / 3, kPi / 3, rng);
    auto noisy = bisection_baseline(ch, 8, 1.0, 300.0, -kPi / 3, kPi / 3, rng);
    const double tol = (2 * kPi / 3) / 16;  // final interval width
    if (std::abs(clean.center - truth) <= tol) ++hits_clean;
    if (std::abs(noisy.center - truth) <= tol) ++hits_noisy;
  }
  CHECK(hits_clean >= draws * 3 / 4);
  CHECK(hits_noisy <= draws / 2);
}

TEST_CASE("posterior: zero stages return the prior, sums to one") {
  auto grid = uniform_grid(-1.0, 1.0, 257);
  Eigen::VectorXd prior = Eigen::VectorXd::Ones(257);
  prior /= prior.sum();
  Eigen::MatrixXcd w(8, 0);
  Eigen::VectorXcd y(0);
  auto post = posterior_update(grid, w, y, 1.0, 1.0, prior);
  CHECK((post - prior).cwiseAbs().maxCoeff() < 1e-15);

  RngStream rng(11);
  auto ch = sample_multipath(8, 1, -1.0, 1.0, rng);
  SensingConfig cfg;
  cfg.num_antennas = 8;
  cfg.stages = 5;
  FixedSensing fixed(cfg, FixedSensing::Mode::random, 46);
  auto trace = fixed.rollout(ch, 1.0, rng);
  auto post2 = posterior_update(grid, trace.sensing, trace.measurements, 1.0,
                                1.0, prior);
  CHECK(std::abs(post2.sum() - 1.0) <= 1e-12);
  CHECK_THROWS_AS(
      posterior_update(grid, trace.sensing, trace.measurements, 1.0, 0.0,
                       prior),
      std::invalid_argument);
}

TEST_CASE("posterior rank-one fast path matches dense inversion oracle") {
  // Dense oracle: build Sigma(phi) = s^2 I + P u u^H explicitly, invert,
  // exponentiate, normalize. Entirely independent of the rank-one path.
  const int m = 8, t_stages = 4;
  RngStream rng(12);
  auto ch = sample_multipath(m, 1, -1.0, 1.0, rng);
  SensingConfig cfg;
  cfg.num_antennas = m;
  cfg.stages = t_stages;
  FixedSensing fixed(cfg, FixedSensing::Mode::random, 47);
  const double pu = 1.7, s1 = 0.9;
  auto trace = fixed.rollout(ch, s1, rng);

  auto grid = uniform_grid(-1.0, 1.0, 101);
  Eigen::VectorXd prior = Eigen::VectorXd::Ones(101);
  prior /= prior.sum();
  auto fast = posterior_update(grid, trace.sensing, trace.measurements, pu, s1,
                               prior);

  Eigen::VectorXd log_dense(101);
  for (int g = 0; g < 101; ++g) {
    Eigen::VectorXcd a = array_response(grid(g), m);
    Eigen::VectorXcd u(t_stages);
    for (int t = 0; t < t_stages; ++t)
      u(t) = (trace.sensing.col(t).transpose() * a)(0, 0);
    Eigen::MatrixXcd sigma =
        s1 * s1 * Eigen::MatrixXcd::Identity(t_stages, t_stages) +
        pu * u * u.adjoint();
    Eigen::MatrixXcd inv = sigma.inverse();
    const double quad =
        (trace.measurements.adjoint() * inv * trace.measurements)(0, 0).real();
    const double logdet = std::log(sigma.determinant().real());
    log_dense(g) = std::log(prior(g)) - quad - logdet;
  }
  Eigen::VectorXd dense = (log_dense.array() - log_dense.maxCoeff()).exp();
  dense /= dense.sum();
  CHECK((fast - dense).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("beam pattern width helper") {
  const int m = 16;
  auto grid = uniform_grid(-kPi / 3, kPi / 3, 501);
  // A matched beam at broadside is much narrower than a single-element
  // (isotropic) pattern.
  Eigen::VectorXcd narrow = array_response(0.0, m).conjugate() / std::sqrt(double(m));
  Eigen::VectorXcd wide = Eigen::VectorXcd::Zero(m);
  wide(0) = 1.0;
  const int w_narrow = half_power_width_bins(beam_pattern(narrow, grid));
  const int w_wide = half_power_width_bins(beam_pattern(wide, grid));
  CHECK(w_narrow < w_wide);
  CHECK(w_wide == 501);  // flat pattern

  Eigen::VectorXd p(5);
  p << 0.1, 0.6, 1.0, 0.7, 0.2;
  CHECK(half_power_width_bins(p) == 3);
}

TEST_CASE("entropy helper") {
  Eigen::VectorXd uniform = Eigen::VectorXd::Constant(8, 1.0 / 8);
  CHECK(entropy_nats(uniform) == doctest::Approx(std::log(8.0)));
  Eigen::VectorXd point = Eigen::VectorXd::Zero(8);
  point(3) = 1.0;
  CHECK(entropy_nats(point) == doctest::Approx(0.0));
}
