#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "pilotbench/ris_sim.hpp"

using namespace pilotbench;
constexpr double kPi = std::numbers::pi;

namespace {

RisChannelSet sample_default(int m, int n, int k, std::uint64_t seed) {
  GeometryConfig cfg;
  RngStream rng(seed);
  return sample_ris_channels(cfg, m, n, k, rng);
}

}  // namespace

TEST_CASE("pilot plan satisfies its invariants") {
  auto plan = make_pilot_plan(3, 16, 12, 2.5);
  CHECK(plan.num_blocks() == 4);
  for (int k = 0; k < 3; ++k)
    for (int l = 0; l < 12; ++l)
      CHECK(std::norm(plan.user_pilots(k, l)) <= 2.5 * (1 + 1e-12));
  for (int i = 0; i < 16; ++i)
    for (int b = 0; b < 4; ++b)
      CHECK(std::abs(std::abs(plan.ris_patterns(i, b)) - 1.0) < 1e-12);
  // Orthogonality within each block.
  for (int b = 0; b < 4; ++b) {
    auto block = plan.user_pilots.middleCols(b * 3, 3);
    Eigen::MatrixXcd gram = block * block.adjoint();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        if (i != j) CHECK(std::abs(gram(i, j)) < 1e-9);
  }
  CHECK_THROWS_AS(make_pilot_plan(3, 16, 10, 1.0), std::invalid_argument);
}

TEST_CASE("noiseless single-user pilots reproduce the combined channel") {
  auto ch = sample_default(4, 8, 1, 3);
  auto plan = make_pilot_plan(1, 8, 5, 1.0);
  RngStream rng(4);
  auto y = uplink_pilots(ch, plan, 0.0, rng);
  REQUIRE(y.rows() == 4);
  REQUIRE(y.cols() == 5);
  for (int l = 0; l < 5; ++l) {
    Eigen::VectorXcd want =
        (ch.direct[0] + ch.cascaded[0] * plan.ris_patterns.col(l)) *
        plan.user_pilots(0, l);
    CHECK((y.col(l) - want).norm() < 1e-12 * want.norm());
  }
}

TEST_CASE("matched filter inverts noiseless pilot mixing exactly") {
  // Oracle: solve the per-block linear system directly and compare.
  auto ch = sample_default(4, 12, 3, 9);
  auto plan = make_pilot_plan(3, 12, 9, 2.0);
  RngStream rng(5);
  auto y = uplink_pilots(ch, plan, 0.0, rng);
  auto filtered = matched_filter(y, plan);
  REQUIRE(filtered.size() == 3);
  REQUIRE(filtered[0].cols() == 3);

  for (int b = 0; b < 3; ++b) {
    // Direct linear-system oracle on the block: Y_b = C_b X_b with X_b the
    // K x K pilot block and C_b the stacked combined channels.
    Eigen::MatrixXcd xb = plan.user_pilots.middleCols(b * 3, 3);
    Eigen::MatrixXcd yb = y.middleCols(b * 3, 3);
    Eigen::MatrixXcd cb = yb * xb.adjoint() * (xb * xb.adjoint()).inverse();
    for (int k = 0; k < 3; ++k) {
      CHECK((filtered[k].col(b) - cb.col(k)).norm() <=
            1e-10 * (cb.col(k).norm() + 1e-30));
      Eigen::VectorXcd truth =
          ch.direct[k] + ch.cascaded[k] * plan.ris_patterns.col(b);
      CHECK((filtered[k].col(b) - truth).norm() <=
            1e-10 * (truth.norm() + 1e-30));
    }
  }
}

TEST_CASE("matched filter cross-user leakage is negligible") {
  auto ch = sample_default(2, 0, 2, 31);
  auto plan = make_pilot_plan(2, 0, 4, 1.0);
  // Zero out user 1's channel: any energy in filtered[1] is leakage.
  RisChannelSet only0 = ch;
  only0.direct[1].setZero();
  RngStream rng(6);
  auto y = uplink_pilots(only0, plan, 0.0, rng);
  auto filtered = matched_filter(y, plan);
  CHECK(filtered[1].norm() <= 1e-10 * filtered[0].norm());
}

TEST_CASE("matched filter rejects non-orthogonal plans") {
  auto plan = make_pilot_plan(2, 4, 4, 1.0);
  plan.user_pilots(0, 1) = plan.user_pilots(1, 1);  // break orthogonality
  Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(2, 4);
  CHECK_THROWS_AS(matched_filter(y, plan), std::invalid_argument);
}

TEST_CASE("K=1 constant-pilot matched filter is a per-column rescale") {
  auto ch = sample_default(3, 4, 1, 8);
  auto plan = make_pilot_plan(1, 4, 6, 4.0);
  RngStream rng(7);
  auto y = uplink_pilots(ch, plan, 1e-7, rng);
  auto filtered = matched_filter(y, plan);
  for (int l = 0; l < 6; ++l) {
    Eigen::VectorXcd want = y.col(l) / plan.user_pilots(0, l);
    CHECK((filtered[0].col(l) - want).norm() < 1e-12 * want.norm());
  }
}

TEST_CASE("single-user rate has no interference term") {
  auto ch = sample_default(4, 8, 1, 12);
  RisDecision d;
  d.reflection = Eigen::VectorXcd::Ones(8);
  Eigen::VectorXcd heff = ch.direct[0] + ch.cascaded[0] * d.reflection;
  d.beamformers = heff.conjugate() / heff.norm();
  const double sigma0 = 1e-5;
  auto rates = achievable_rates(ch, d, sigma0);
  REQUIRE(rates.size() == 1);
  const double want =
      std::log2(1.0 + heff.squaredNorm() / (sigma0 * sigma0));
  CHECK(rates(0) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("orthogonal beamformer yields zero rate") {
  auto ch = sample_default(2, 0, 1, 14);
  RisDecision d;
  d.reflection = Eigen::VectorXcd(0);
  Eigen::VectorXcd h = ch.direct[0];
  Eigen::VectorXcd w(2);
  // w orthogonal to h under the transpose convention: h^T w = 0.
  w << h(1), -h(0);
  d.beamformers = w;
  auto rates = achievable_rates(ch, d, 1e-6);
  CHECK(rates(0) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("rates match an independent SINR oracle") {
  auto ch = sample_default(4, 6, 3, 15);
  RngStream rng(16);
  RisDecision d;
  d.reflection = Eigen::VectorXcd(6);
  for (int i = 0; i < 6; ++i)
    d.reflection(i) = std::polar(1.0, rng.uniform(-kPi, kPi));
  d.beamformers = Eigen::MatrixXcd(4, 3);
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 4; ++i) d.beamformers(i, j) = rng.cnormal();
  const double sigma0 = 0.3;

  auto rates = achievable_rates(ch, d, sigma0);

  // Term-by-term oracle, recomputed without the library helpers.
  for (int k = 0; k < 3; ++k) {
    Eigen::VectorXcd heff = ch.direct[k];
    for (int i = 0; i < 6; ++i)
      heff += d.reflection(i) * ch.cascaded[k].col(i);
    std::complex<double> sig{0, 0};
    double interf = 0.0;
    for (int j = 0; j < 3; ++j) {
      std::complex<double> g{0, 0};
      for (int m = 0; m < 4; ++m) g += heff(m) * d.beamformers(m, j);
      if (j == k)
        sig = g;
      else
        interf += std::norm(g);
    }
    const double want =
        std::log2(1.0 + std::norm(sig) / (interf + sigma0 * sigma0));
    CHECK(std::abs(rates(k) - want) < 1e-10 * std::max(1.0, want));
  }
}

TEST_CASE("zeroing interferers never lowers a user's rate") {
  for (int trial = 0; trial < 20; ++trial) {
    auto ch = sample_default(4, 4, 3, 100 + trial);
    RngStream rng(200 + trial);
    RisDecision d;
    d.reflection = Eigen::VectorXcd(4);
    for (int i = 0; i < 4; ++i)
      d.reflection(i) = std::polar(1.0, rng.uniform(-kPi, kPi));
    d.beamformers = Eigen::MatrixXcd(4, 3);
    for (int i = 0; i < d.beamformers.size(); ++i)
      d.beamformers(i) = rng.cnormal();
    auto base = achievable_rates(ch, d, 1e-4);
    RisDecision solo = d;
    solo.beamformers.col(1).setZero();
    solo.beamformers.col(2).setZero();
    auto lone = achievable_rates(ch, solo, 1e-4);
    CHECK(lone(0) >= base(0) - 1e-12);
  }
}

TEST_CASE("utility reductions") {
  Eigen::VectorXd r(3);
  r << 1.0, 2.0, 3.0;
  CHECK(utility(r, Utility::sum) == doctest::Approx(6.0));
  CHECK(utility(r, Utility::min) == doctest::Approx(1.0));
  Eigen::VectorXd p(3);
  p << 3.0, 1.0, 2.0;  // permutation invariance
  CHECK(utility(p, Utility::sum) == utility(r, Utility::sum));
  CHECK(utility(p, Utility::min) == utility(r, Utility::min));
  Eigen::VectorXd empty(0);
  CHECK_THROWS_AS(utility(empty, Utility::sum), std::invalid_argument);
}

TEST_CASE("utility is invariant under simultaneous user permutation") {
  auto ch = sample_default(4, 6, 3, 55);
  RngStream rng(56);
  RisDecision d;
  d.reflection = Eigen::VectorXcd::Ones(6);
  d.beamformers = Eigen::MatrixXcd(4, 3);
  for (int i = 0; i < d.beamformers.size(); ++i)
    d.beamformers(i) = rng.cnormal();
  auto rates = achievable_rates(ch, d, 1e-4);

  RisChannelSet perm = ch;
  std::swap(perm.direct[0], perm.direct[2]);
  std::swap(perm.ris_user[0], perm.ris_user[2]);
  std::swap(perm.cascaded[0], perm.cascaded[2]);
  RisDecision dp = d;
  dp.beamformers.col(0) = d.beamformers.col(2);
  dp.beamformers.col(2) = d.beamformers.col(0);
  auto rates_p = achievable_rates(perm, dp, 1e-4);
  CHECK(utility(rates, Utility::sum) ==
        doctest::Approx(utility(rates_p, Utility::sum)).epsilon(1e-12));
  CHECK(utility(rates, Utility::min) ==
        doctest::Approx(utility(rates_p, Utility::min)).epsilon(1e-12));
}

TEST_CASE("rates reject nonpositive noise") {
  auto ch = sample_default(2, 0, 1, 1);
  RisDecision d;
  d.reflection = Eigen::VectorXcd(0);
  d.beamformers = Eigen::MatrixXcd::Ones(2, 1);
  CHECK_THROWS_AS(achievable_rates(ch, d, 0.0), std::invalid_argument);
}
