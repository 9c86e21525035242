#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "pilotbench/fdd_feedback.hpp"
#include "pilotbench/ris_sim.hpp"

using namespace pilotbench;
constexpr double kPi = std::numbers::pi;

namespace {

std::vector<Eigen::VectorXcd> draw_channels(const FddConfig& cfg,
                                            std::uint64_t seed) {
  std::vector<Eigen::VectorXcd> h;
  RngStream rng(seed);
  for (int k = 0; k < cfg.num_users; ++k)
    h.push_back(sample_multipath(cfg.num_antennas, cfg.num_paths, cfg.aod_min,
                                 cfg.aod_max, rng)
                    .coeffs);
  return h;
}

}  // namespace

TEST_CASE("pilot reception: identity pilots reproduce the channel") {
  const int m = 4;
  Eigen::MatrixXcd x = Eigen::MatrixXcd::Identity(m, m);
  Eigen::VectorXcd h(m);
  RngStream rng(3);
  for (int i = 0; i < m; ++i) h(i) = rng.cnormal();
  auto y = downlink_pilot_rx(h, x, 1.0, 0.0, rng);
  CHECK((y.transpose() - h).norm() < 1e-14);
}

TEST_CASE("pilot reception: noise energy matches L sigma^2") {
  const int m = 8, l = 8;
  const double sigma = 0.7;
  Eigen::MatrixXcd x = Eigen::MatrixXcd::Zero(m, l);
  Eigen::VectorXcd h = Eigen::VectorXcd::Zero(m);
  RngStream rng(5);
  double acc = 0.0;
  const int draws = 100000;
  for (int d = 0; d < draws; ++d)
    acc += downlink_pilot_rx(h, x, 1.0, sigma, rng).squaredNorm();
  CHECK(acc / draws ==
        doctest::Approx(l * sigma * sigma).epsilon(0.03));
}

TEST_CASE("pilot reception rejects over-power columns") {
  Eigen::MatrixXcd x = 2.0 * Eigen::MatrixXcd::Ones(2, 1);
  Eigen::VectorXcd h = Eigen::VectorXcd::Ones(2);
  RngStream rng(1);
  CHECK_THROWS_AS(downlink_pilot_rx(h, x, 1.0, 0.0, rng),
                  std::invalid_argument);
}

TEST_CASE("model shapes, bit hardness and precoder power") {
  FddConfig cfg;
  cfg.num_antennas = 8;
  cfg.pilot_len = 4;
  cfg.feedback_bits = 15;
  FddModel model(cfg, 11);

  auto x = model.pilot_matrix();
  CHECK(x.rows() == 8);
  CHECK(x.cols() == 4);
  for (int c = 0; c < 4; ++c)
    CHECK(x.col(c).squaredNorm() <= cfg.total_power * (1 + 1e-9));

  auto h = draw_channels(cfg, 21);
  RngStream rng(22);
  auto rx = downlink_pilot_rx(h[0], x, cfg.total_power, cfg.sigma0, rng);
  auto bits = model.encoder_forward(rx, BitMode::hard);
  REQUIRE(bits.size() == 15);
  for (int i = 0; i < bits.size(); ++i)
    CHECK((bits(i) == 1.0 || bits(i) == -1.0));

  // Determinism of the encoder.
  auto bits2 = model.encoder_forward(rx, BitMode::hard);
  CHECK(bits == bits2);

  Eigen::VectorXd all(2 * 15);
  all << bits, -bits;
  auto w = model.precoder_forward(all);
  CHECK(w.rows() == 8);
  CHECK(w.cols() == 2);
  CHECK(w.squaredNorm() == doctest::Approx(cfg.total_power).epsilon(1e-9));
  CHECK_THROWS_AS(model.precoder_forward(bits), std::invalid_argument);
}

TEST_CASE("flipping one feedback bit changes the precoder output") {
  FddConfig cfg;
  cfg.num_antennas = 8;
  FddModel model(cfg, 13);
  RngStream rng(14);
  int changed = 0;
  const int trials = 100;
  for (int t = 0; t < trials; ++t) {
    Eigen::VectorXd bits(cfg.num_users * cfg.feedback_bits);
    for (int i = 0; i < bits.size(); ++i)
      bits(i) = rng.uniform() < 0.5 ? -1.0 : 1.0;
    auto w = model.precoder_forward(bits);
    Eigen::VectorXd flipped = bits;
    flipped(t % bits.size()) *= -1.0;
    auto w2 = model.precoder_forward(flipped);
    if ((w - w2).norm() > 1e-9) ++changed;
  }
  CHECK(changed >= 99);
}

TEST_CASE("pilot column projection restores feasibility") {
  FddConfig cfg;
  FddModel model(cfg, 15);
  model.params().value(model.params().find("pilots.re")) *= 10.0;
  model.project_pilot_columns();
  auto x = model.pilot_matrix();
  for (int c = 0; c < x.cols(); ++c)
    CHECK(x.col(c).squaredNorm() <= cfg.total_power * (1 + 1e-9));
}

TEST_CASE("loss is invariant to duplicating the batch") {
  FddConfig cfg;
  cfg.num_antennas = 8;
  cfg.pilot_len = 4;
  cfg.hidden = 32;
  FddModel model(cfg, 17);
  std::vector<std::vector<Eigen::VectorXcd>> batch{draw_channels(cfg, 31),
                                                   draw_channels(cfg, 32)};
  auto doubled = batch;
  doubled.insert(doubled.end(), batch.begin(), batch.end());

  // Zero pilot noise keeps the two passes comparable.
  FddConfig quiet = cfg;
  FddModel m2(quiet, 17);
  ad::Tape t1, t2;
  auto p1 = push_params(t1, model.params());
  auto p2 = push_params(t2, m2.params());
  RngStream n1(1), n2(2);
  FddConfig c0 = cfg;
  c0.sigma0 = 0.0;  // only affects noise draw inside loss
  FddModel quiet_model(c0, 17);
  ad::Tape t3, t4;
  auto p3 = push_params(t3, quiet_model.params());
  auto p4 = push_params(t4, quiet_model.params());
  RngStream n3(1), n4(1);
  const double a =
      quiet_model.loss(t3, p3, batch, BitMode::straight, n3).val()(0, 0);
  const double b =
      quiet_model.loss(t4, p4, doubled, BitMode::straight, n4).val()(0, 0);
  CHECK(a == doctest::Approx(b).epsilon(1e-12));
}

TEST_CASE("surrogate gradient matches central finite differences") {
  FddConfig cfg;
  cfg.num_antennas = 4;
  cfg.pilot_len = 3;
  cfg.feedback_bits = 6;
  cfg.hidden = 16;
  cfg.hidden_layers = 2;
  FddModel model(cfg, 19);
  model.set_st_beta(2.0);
  std::vector<std::vector<Eigen::VectorXcd>> batch{draw_channels(cfg, 41),
                                                   draw_channels(cfg, 42)};

  Eigen::VectorXd grad(model.params().flat_size());
  {
    ad::Tape tape;
    auto pvars = push_params(tape, model.params());
    RngStream noise(7);
    ad::Var loss = model.loss(tape, pvars, batch, BitMode::surrogate, noise);
    tape.backward(loss);
    auto grads = collect_grads(tape, pvars);
    Eigen::Index at = 0;
    for (const auto& g : grads) {
      grad.segment(at, g.size()) =
          Eigen::Map<const Eigen::VectorXd>(g.data(), g.size());
      at += g.size();
    }
    CHECK(grad.norm() > 0.0);
  }

  const Eigen::VectorXd theta0 = model.params().flatten();
  auto eval = [&](const Eigen::VectorXd& theta) {
    model.params().unflatten(theta);
    ad::Tape tape;
    auto pvars = push_params(tape, model.params());
    RngStream noise(7);
    return model.loss(tape, pvars, batch, BitMode::surrogate, noise)
        .val()(0, 0);
  };
  RngStream dir_rng(55);
  const double h = 1e-4;
  for (int d = 0; d < 10; ++d) {
    Eigen::VectorXd dir(theta0.size());
    for (Eigen::Index i = 0; i < dir.size(); ++i) dir(i) = dir_rng.normal();
    dir /= dir.norm();
    const double fd = (eval(theta0 + h * dir) - eval(theta0 - h * dir)) / (2 * h);
    const double an = grad.dot(dir);
    CHECK(std::abs(an - fd) <= 1e-3 * std::max(1e-9, std::abs(fd)));
  }
  model.params().unflatten(theta0);
}

TEST_CASE("straight-through training gradient is nonzero") {
  FddConfig cfg;
  cfg.num_antennas = 4;
  cfg.pilot_len = 3;
  cfg.hidden = 16;
  FddModel model(cfg, 23);
  std::vector<std::vector<Eigen::VectorXcd>> batch{draw_channels(cfg, 51)};
  ad::Tape tape;
  auto pvars = push_params(tape, model.params());
  RngStream noise(3);
  ad::Var loss = model.loss(tape, pvars, batch, BitMode::straight, noise);
  tape.backward(loss);
  double norm = 0.0;
  for (const auto& g : collect_grads(tape, pvars)) norm += g.squaredNorm();
  CHECK(std::sqrt(norm) > 0.0);
}

TEST_CASE("mrt attains the single-user matched gain") {
  FddConfig cfg;
  auto h = draw_channels(cfg, 61);
  auto w = mrt_full_csi({h[0]}, cfg.total_power);
  const double gain = std::norm((h[0].transpose() * w.col(0))(0, 0));
  CHECK(gain == doctest::Approx(cfg.total_power * h[0].squaredNorm())
                    .epsilon(1e-10));

  // |h^T w|^2 <= ||h||^2 for any unit w; MRT attains the bound.
  RngStream rng(62);
  for (int t = 0; t < 1000; ++t) {
    Eigen::VectorXcd u(h[0].size());
    for (int i = 0; i < u.size(); ++i) u(i) = rng.cnormal();
    u /= u.norm();
    CHECK(std::norm((h[0].transpose() * u)(0, 0)) <=
          h[0].squaredNorm() * (1 + 1e-12));
  }
  CHECK_THROWS_AS(
      mrt_full_csi({Eigen::VectorXcd::Zero(4)}, 1.0), std::invalid_argument);
}

TEST_CASE("zero forcing nulls inter-user interference under perfect CSI") {
  for (int m : {4, 64}) {
    FddConfig cfg;
    cfg.num_antennas = m;
    auto h = draw_channels(cfg, 70 + m);
    auto w = zf_precoding(h, cfg.total_power);
    for (int k = 0; k < 2; ++k)
      for (int j = 0; j < 2; ++j) {
        const double cross = std::abs((h[k].transpose() * w.col(j))(0, 0));
        if (j != k) CHECK(cross <= 1e-10);
      }
  }
}

TEST_CASE("zero forcing of an invertible 2x2 stack is the inverse transpose") {
  std::vector<Eigen::VectorXcd> h(2, Eigen::VectorXcd(2));
  h[0] << std::complex<double>(1, 0), std::complex<double>(0, 1);
  h[1] << std::complex<double>(0.5, 0.5), std::complex<double>(2, -1);
  auto w = zf_precoding(h, 2.0);
  Eigen::MatrixXcd stack(2, 2);
  stack.row(0) = h[0].transpose();
  stack.row(1) = h[1].transpose();
  Eigen::MatrixXcd prod = stack * w;
  CHECK(std::abs(prod(0, 1)) < 1e-10);
  CHECK(std::abs(prod(1, 0)) < 1e-10);
}

TEST_CASE("zero forcing rejects rank-deficient stacks") {
  std::vector<Eigen::VectorXcd> h(2, Eigen::VectorXcd(4));
  RngStream rng(81);
  for (int i = 0; i < 4; ++i) h[0](i) = rng.cnormal();
  h[1] = 2.0 * h[0];
  CHECK_THROWS_AS(zf_precoding(h, 1.0), std::invalid_argument);
}

TEST_CASE("omp recovers on-grid noiseless channels exactly") {
  const int m = 64, l = 8, grid = 4 * m;
  RngStream rng(91);
  Eigen::MatrixXcd x(m, l);
  for (int i = 0; i < x.size(); ++i) x(i) = rng.cnormal();

  for (int lp : {1, 2, 3}) {
    // True angles on distinct, well-separated grid points.
    std::vector<SparseMultipathChannel::Path> paths;
    for (int p = 0; p < lp; ++p) {
      const int g = 40 + p * 70;
      const double angle =
          -kPi / 3 + (2 * kPi / 3) * g / (grid - 1);
      paths.push_back({rng.cnormal(), angle});
    }
    Eigen::VectorXcd h = synthesize_multipath(paths, m);
    Eigen::RowVectorXcd rx = h.transpose() * x;
    auto est = omp_estimate(rx, x, grid, lp, -kPi / 3, kPi / 3);
    CHECK((est.channel - h).norm() <= 1e-6 * h.norm());
  }
}

TEST_CASE("omp residual is orthogonal to the selected atoms") {
  const int m = 16, l = 8, grid = 64;
  RngStream rng(95);
  Eigen::MatrixXcd x(m, l);
  for (int i = 0; i < x.size(); ++i) x(i) = rng.cnormal();
  auto ch = sample_multipath(m, 3, -kPi / 3, kPi / 3, rng);
  Eigen::RowVectorXcd rx = ch.coeffs.transpose() * x;
  for (int i = 0; i < rx.size(); ++i) rx(i) += 0.1 * rng.cnormal();

  auto est = omp_estimate(rx, x, grid, 3, -kPi / 3, kPi / 3);
  Eigen::VectorXcd residual = rx.transpose();
  for (const auto& p : est.paths)
    residual -= p.gain * (x.transpose() * array_response(p.angle, m));
  for (const auto& p : est.paths) {
    Eigen::VectorXcd atom = x.transpose() * array_response(p.angle, m);
    CHECK(std::abs(atom.dot(residual)) <= 1e-8 * atom.norm() * rx.norm());
  }
}

TEST_CASE("omp with a single-point grid returns the best rank-1 fit") {
  const int m = 8, l = 4;
  RngStream rng(97);
  Eigen::MatrixXcd x(m, l);
  for (int i = 0; i < x.size(); ++i) x(i) = rng.cnormal();
  auto ch = sample_multipath(m, 1, -0.1, 0.1, rng);
  Eigen::RowVectorXcd rx = ch.coeffs.transpose() * x;
  auto est = omp_estimate(rx, x, 1, 1, -0.5, 0.5);
  REQUIRE(est.paths.size() == 1);
  CHECK(est.paths[0].angle == doctest::Approx(0.0));
  // The refit gain is the least-squares projection onto that single atom.
  Eigen::VectorXcd atom = x.transpose() * array_response(0.0, m);
  const std::complex<double> want =
      atom.dot(rx.transpose()) / atom.squaredNorm();
  CHECK(std::abs(est.paths[0].gain - want) < 1e-10);
}

TEST_CASE("scalar quantizer: midpoints, idempotence, zero bits") {
  CHECK(uniform_quantize(0.3, 0.0, 1.0, 0) == doctest::Approx(0.5));
  const double q = uniform_quantize(0.3, 0.0, 1.0, 3);
  CHECK(uniform_quantize(q, 0.0, 1.0, 3) == doctest::Approx(q));
  CHECK(std::abs(q - 0.3) <= 0.5 / 8 + 1e-12);
  // Out-of-range values clamp to the edge cells.
  CHECK(uniform_quantize(9.0, 0.0, 1.0, 2) == doctest::Approx(0.875));
  CHECK(uniform_quantize(-9.0, 0.0, 1.0, 2) == doctest::Approx(0.125));
}

TEST_CASE("quantized feedback approaches the unquantized estimate as B grows") {
  const int m = 16, l = 8, grid = 64;
  RngStream rng(99);
  Eigen::MatrixXcd x(m, l);
  for (int i = 0; i < x.size(); ++i) x(i) = rng.cnormal();

  double err_big = 0, err_est = 0;
  const int draws = 50;
  for (int d = 0; d < draws; ++d) {
    RngStream s(derive_seed(99, "qf", d));
    auto ch = sample_multipath(m, 2, -kPi / 6, kPi / 6, s);
    Eigen::RowVectorXcd rx = ch.coeffs.transpose() * x;
    auto est = omp_estimate(rx, x, grid, 2, -kPi / 6, kPi / 6);
    auto rec = quantized_feedback_reconstruct(est.paths, m, 72, 4.0,
                                              -kPi / 6, kPi / 6);
    err_big += (rec - ch.coeffs).norm();
    err_est += (est.channel - ch.coeffs).norm();
  }
  // 72 bits over 6 scalars: quantization adds at most ~1% excess error.
  CHECK(err_big <= err_est * 1.01 + 1e-9);
}

TEST_CASE("zero-bit feedback reconstructs deterministically at midpoints") {
  std::vector<SparseMultipathChannel::Path> paths{{{1.0, 0.5}, 0.2},
                                                  {{-0.3, 0.1}, -0.4}};
  auto a = quantized_feedback_reconstruct(paths, 8, 0, 4.0, -1.0, 1.0);
  auto b = quantized_feedback_reconstruct(paths, 8, 0, 4.0, -1.0, 1.0);
  CHECK(a == b);
  // Midpoint magnitude 2.0, phase 0, angle 0 for every path.
  Eigen::VectorXcd want =
      2.0 * synthesize_multipath({{{1.0, 0.0}, 0.0}, {{1.0, 0.0}, 0.0}}, 8);
  CHECK((a - want).norm() < 1e-12);
}
