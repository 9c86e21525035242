#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pilotbench/ris_gnn.hpp"

using namespace pilotbench;

namespace {

struct Setup {
  GeometryConfig geo;
  RisPilotPlan plan;
  RisGnn gnn;
  double sigma0, sigma1;

  Setup(int m, int n, int k, int l, std::uint64_t seed = 1,
        GnnConfig cfg = {2, 32})
      : plan(make_pilot_plan(k, n, l, 31.6)),
        gnn(m, n, k, l / k, 100.0,
            std::sqrt(direct_gain_at_region_center(GeometryConfig{})), cfg,
            seed),
        sigma0(5.6e-5),
        sigma1(1e-6) {}

  std::vector<RisChannelSet> draw_batch(int count, std::uint64_t seed) {
    std::vector<RisChannelSet> batch;
    for (int i = 0; i < count; ++i) {
      RngStream rng(derive_seed(seed, "draw", i));
      batch.push_back(sample_ris_channels(geo, gnn.num_antennas(),
                                          gnn.num_elements(),
                                          gnn.num_users(), rng));
    }
    return batch;
  }

  std::vector<Eigen::MatrixXcd> filtered_of(const RisChannelSet& ch,
                                            double noise,
                                            std::uint64_t seed) {
    RngStream rng(seed);
    return matched_filter(uplink_pilots(ch, plan, noise, rng), plan);
  }
};

}  // namespace

TEST_CASE("forward output satisfies the power and modulus constraints") {
  Setup s(4, 16, 3, 6);
  for (int trial = 0; trial < 10; ++trial) {
    auto ch = s.draw_batch(1, 100 + trial)[0];
    auto dec = s.gnn.decide(s.filtered_of(ch, s.sigma1, 7 + trial));
    CHECK(dec.beamformers.squaredNorm() ==
          doctest::Approx(100.0).epsilon(1e-9));
    for (int i = 0; i < dec.reflection.size(); ++i)
      CHECK(std::abs(std::abs(dec.reflection(i)) - 1.0) < 1e-9);
  }
}

TEST_CASE("user permutation permutes beams and leaves reflection unchanged") {
  Setup s(4, 16, 3, 6);
  for (int trial = 0; trial < 25; ++trial) {
    auto ch = s.draw_batch(1, 300 + trial)[0];
    auto mf = s.filtered_of(ch, s.sigma1, 900 + trial);
    auto dec = s.gnn.decide(mf);

    // Cyclic permutation pi: user k takes slot (k+1) mod K.
    std::vector<Eigen::MatrixXcd> mf_perm{mf[2], mf[0], mf[1]};
    auto dec_perm = s.gnn.decide(mf_perm);

    double dev = 0.0;
    dev = std::max(dev, (dec_perm.beamformers.col(0) - dec.beamformers.col(2))
                            .cwiseAbs()
                            .maxCoeff());
    dev = std::max(dev, (dec_perm.beamformers.col(1) - dec.beamformers.col(0))
                            .cwiseAbs()
                            .maxCoeff());
    dev = std::max(dev, (dec_perm.beamformers.col(2) - dec.beamformers.col(1))
                            .cwiseAbs()
                            .maxCoeff());
    dev = std::max(dev,
                   (dec_perm.reflection - dec.reflection).cwiseAbs().maxCoeff());
    CHECK(dev <= 1e-5);
  }
}

TEST_CASE("K=1 zero-noise loss equals the negated single-user rate") {
  Setup s(2, 4, 1, 2);
  auto batch = s.draw_batch(1, 55);
  RngStream noise(1);

  ad::Tape tape;
  auto pvars = push_params(tape, s.gnn.params());
  ad::Var loss = s.gnn.loss(tape, pvars, batch, s.plan, s.sigma0, 0.0,
                            Utility::sum, noise);

  auto dec = s.gnn.decide(s.filtered_of(batch[0], 0.0, 2));
  auto rates = achievable_rates(batch[0], dec, s.sigma0);
  CHECK(loss.val()(0, 0) == doctest::Approx(-rates(0)).epsilon(1e-10));
}

TEST_CASE("duplicating the batch leaves the loss unchanged") {
  Setup s(2, 4, 2, 4);
  auto batch = s.draw_batch(3, 66);
  auto doubled = batch;
  doubled.insert(doubled.end(), batch.begin(), batch.end());

  // Zero pilot noise so both passes see identical inputs.
  RngStream n1(1), n2(1);
  ad::Tape t1, t2;
  auto p1 = push_params(t1, s.gnn.params());
  auto p2 = push_params(t2, s.gnn.params());
  double a =
      s.gnn.loss(t1, p1, batch, s.plan, s.sigma0, 0.0, Utility::sum, n1)
          .val()(0, 0);
  double b =
      s.gnn.loss(t2, p2, doubled, s.plan, s.sigma0, 0.0, Utility::sum, n2)
          .val()(0, 0);
  CHECK(a == doctest::Approx(b).epsilon(1e-12));
}

TEST_CASE("min-rate loss is invariant to permuting users within the batch") {
  Setup s(2, 4, 2, 4);
  auto batch = s.draw_batch(2, 77);
  auto swapped = batch;
  for (auto& draw : swapped) {
    std::swap(draw.direct[0], draw.direct[1]);
    std::swap(draw.ris_user[0], draw.ris_user[1]);
    std::swap(draw.cascaded[0], draw.cascaded[1]);
  }
  RngStream n1(4), n2(4);
  ad::Tape t1, t2;
  auto p1 = push_params(t1, s.gnn.params());
  auto p2 = push_params(t2, s.gnn.params());
  double a =
      s.gnn.loss(t1, p1, batch, s.plan, s.sigma0, 0.0, Utility::min, n1)
          .val()(0, 0);
  double b =
      s.gnn.loss(t2, p2, swapped, s.plan, s.sigma0, 0.0, Utility::min, n2)
          .val()(0, 0);
  CHECK(a == doctest::Approx(b).epsilon(1e-6));
}

TEST_CASE("analytic gradient matches central finite differences") {
  Setup s(2, 4, 2, 4, /*seed=*/3, GnnConfig{2, 16});
  auto batch = s.draw_batch(2, 88);

  // Base loss + gradient.
  Eigen::VectorXd grad;
  {
    ad::Tape tape;
    auto pvars = push_params(tape, s.gnn.params());
    RngStream noise(9);
    ad::Var loss = s.gnn.loss(tape, pvars, batch, s.plan, s.sigma0, 0.0,
                              Utility::sum, noise);
    tape.backward(loss);
    auto grads = collect_grads(tape, pvars);
    grad.resize(s.gnn.params().flat_size());
    Eigen::Index at = 0;
    for (const auto& g : grads) {
      grad.segment(at, g.size()) =
          Eigen::Map<const Eigen::VectorXd>(g.data(), g.size());
      at += g.size();
    }
  }

  const Eigen::VectorXd theta0 = s.gnn.params().flatten();
  auto eval = [&](const Eigen::VectorXd& theta) {
    s.gnn.params().unflatten(theta);
    ad::Tape tape;
    auto pvars = push_params(tape, s.gnn.params());
    RngStream noise(9);
    double v = s.gnn.loss(tape, pvars, batch, s.plan, s.sigma0, 0.0,
                          Utility::sum, noise)
                   .val()(0, 0);
    return v;
  };

  RngStream dir_rng(123);
  const double h = 1e-4;
  for (int d = 0; d < 10; ++d) {
    Eigen::VectorXd dir(theta0.size());
    for (Eigen::Index i = 0; i < dir.size(); ++i) dir(i) = dir_rng.normal();
    dir /= dir.norm();
    const double fd = (eval(theta0 + h * dir) - eval(theta0 - h * dir)) / (2 * h);
    const double an = grad.dot(dir);
    CHECK(std::abs(an - fd) <= 1e-3 * std::max(1e-9, std::abs(fd)));
  }
  s.gnn.params().unflatten(theta0);
}
