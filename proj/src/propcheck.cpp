// SPDX-License-Identifier: Apache-2.0
#include "pilotbench/propcheck.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "pilotbench/active_sensing.hpp"
#include "pilotbench/fdd_feedback.hpp"
#include "pilotbench/ris_baselines.hpp"
#include "pilotbench/ris_gnn.hpp"
#include "pilotbench/tasks.hpp"

namespace pilotbench {

namespace {

constexpr double kPi = std::numbers::pi;

CheckResult ok() { return {true, ""}; }
CheckResult ok(const std::string& detail) { return {true, detail}; }
CheckResult fail(const std::string& detail) { return {false, detail}; }

CheckResult check_array_response() {
  for (int m : {1, 2, 4, 64}) {
    auto a = array_response(0.0, m);
    for (int i = 0; i < m; ++i)
      if (std::abs(a(i) - std::complex<double>(1, 0)) > 1e-12)
        return fail("a(0) is not all-ones at M=" + std::to_string(m));
    RngStream rng(m);
    for (int t = 0; t < 20; ++t) {
      auto b = array_response(rng.uniform(-1.5, 1.5), m);
      for (int i = 0; i < m; ++i)
        if (std::abs(std::abs(b(i)) - 1.0) > 1e-12)
          return fail("non-unit-modulus entry at M=" + std::to_string(m));
    }
  }
  return ok("M in {1,2,4,64}");
}

CheckResult check_gnn_equivariance() {
  const int m = 4, n = 16, k = 3, l = 6;
  GeometryConfig geo;
  auto plan = make_pilot_plan(k, n, l, 31.6);
  RisGnn gnn(m, n, k, plan.num_blocks(), 100.0,
             std::sqrt(direct_gain_at_region_center(geo)), GnnConfig{3, 64},
             17);
  double worst = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    RngStream rng(derive_seed(400, "equivariance", inst));
    auto ch = sample_ris_channels(geo, m, n, k, rng);
    auto mf = matched_filter(uplink_pilots(ch, plan, 1e-6, rng), plan);

    // Random permutation of the three users.
    std::vector<int> perm{0, 1, 2};
    for (int i = 2; i > 0; --i)
      std::swap(perm[i], perm[static_cast<int>(rng.uniform() * (i + 1))]);
    std::vector<Eigen::MatrixXcd> mf_perm(k);
    for (int u = 0; u < k; ++u) mf_perm[u] = mf[perm[u]];

    auto base = gnn.decide(mf);
    auto permuted = gnn.decide(mf_perm);
    for (int u = 0; u < k; ++u)
      worst = std::max(worst,
                       (permuted.beamformers.col(u) -
                        base.beamformers.col(perm[u]))
                           .cwiseAbs()
                           .maxCoeff());
    worst = std::max(
        worst, (permuted.reflection - base.reflection).cwiseAbs().maxCoeff());
  }
  if (worst > 1e-5)
    return fail("max deviation " + std::to_string(worst) + " > 1e-5");
  std::ostringstream ss;
  ss << "100 instances, max deviation " << worst;
  return ok(ss.str());
}

CheckResult check_constraints() {
  // GNN decision feasibility.
  {
    const int m = 4, n = 8, k = 2, l = 4;
    GeometryConfig geo;
    auto plan = make_pilot_plan(k, n, l, 31.6);
    RisGnn gnn(m, n, k, plan.num_blocks(), 100.0,
               std::sqrt(direct_gain_at_region_center(geo)), GnnConfig{2, 32},
               3);
    for (int inst = 0; inst < 20; ++inst) {
      RngStream rng(derive_seed(500, "cons", inst));
      auto ch = sample_ris_channels(geo, m, n, k, rng);
      auto dec = gnn.decide(matched_filter(uplink_pilots(ch, plan, 1e-6, rng),
                                           plan));
      if (std::abs(dec.beamformers.squaredNorm() - 100.0) > 1e-9 * 100.0)
        return fail("GNN beamformer power violated");
      for (int i = 0; i < n; ++i)
        if (std::abs(std::abs(dec.reflection(i)) - 1.0) > 1e-9)
          return fail("GNN reflection modulus violated");
    }
  }
  // FDD bits and precoder power.
  {
    FddConfig fc;
    fc.num_antennas = 8;
    fc.pilot_len = 4;
    fc.feedback_bits = 12;
    fc.hidden = 32;
    FddModel fdd(fc, 5);
    for (int inst = 0; inst < 20; ++inst) {
      RngStream rng(derive_seed(501, "cons", inst));
      std::vector<Eigen::VectorXcd> h;
      for (int u = 0; u < fc.num_users; ++u)
        h.push_back(sample_multipath(fc.num_antennas, fc.num_paths, fc.aod_min,
                                     fc.aod_max, rng)
                        .coeffs);
      auto rx = downlink_pilot_rx(h[0], fdd.pilot_matrix(), fc.total_power,
                                  fc.sigma0, rng);
      auto bits = fdd.encoder_forward(rx, BitMode::hard);
      for (int i = 0; i < bits.size(); ++i)
        if (bits(i) != 1.0 && bits(i) != -1.0)
          return fail("eval-mode feedback bit not exactly +-1");
      auto w = fdd.decide(h, fc.sigma0, rng);
      if (std::abs(w.squaredNorm() - fc.total_power) > 1e-9 * fc.total_power)
        return fail("FDD precoder power violated");
    }
  }
  // Agent unit norms.
  {
    SensingConfig sc;
    sc.num_antennas = 8;
    sc.stages = 4;
    sc.lstm_width = 16;
    sc.head_hidden = 16;
    ActiveAgent agent(sc, 7);
    for (int inst = 0; inst < 10; ++inst) {
      RngStream rng(derive_seed(502, "cons", inst));
      auto ch = sample_multipath(8, 1, sc.aoa_min, sc.aoa_max, rng);
      auto trace = agent.rollout(ch, sc.sigma1, rng);
      for (int t = 0; t < sc.stages; ++t)
        if (std::abs(trace.sensing.col(t).norm() - 1.0) > 1e-9)
          return fail("sensing vector norm violated");
      if (std::abs(trace.design.norm() - 1.0) > 1e-9)
        return fail("design norm violated");
    }
  }
  return ok("power, modulus, hard bits, unit norms");
}

CheckResult check_mrt_optimality() {
  RngStream rng(600);
  auto ch = sample_multipath(16, 2, -1.0, 1.0, rng);
  const Eigen::VectorXcd best = ch.coeffs.conjugate() / ch.coeffs.norm();
  const double bound = ch.coeffs.squaredNorm();
  const double attained =
      std::norm((ch.coeffs.transpose() * best)(0, 0));
  if (std::abs(attained - bound) > 1e-10 * bound)
    return fail("MRT does not attain ||h||^2");
  for (int t = 0; t < 1000; ++t) {
    Eigen::VectorXcd v(16);
    for (int i = 0; i < 16; ++i) v(i) = rng.cnormal();
    v /= v.norm();
    if (std::norm((ch.coeffs.transpose() * v)(0, 0)) > bound * (1 + 1e-12))
      return fail("random unit vector beat the Cauchy-Schwarz bound");
  }
  return ok("1000 random unit vectors dominated");
}

CheckResult check_zf_nulling() {
  for (int m : {4, 64}) {
    RngStream rng(700 + m);
    std::vector<Eigen::VectorXcd> h;
    for (int u = 0; u < 2; ++u)
      h.push_back(sample_multipath(m, 2, -0.6, 0.6, rng).coeffs);
    auto w = zf_precoding(h, 10.0);
    for (int u = 0; u < 2; ++u)
      for (int j = 0; j < 2; ++j)
        if (u != j &&
            std::abs((h[u].transpose() * w.col(j))(0, 0)) > 1e-10)
          return fail("ZF cross term above 1e-10 at M=" + std::to_string(m));
  }
  return ok("K=2, M in {4,64}");
}

CheckResult check_omp_recovery() {
  const int m = 64, l = 8, grid = 4 * m;
  for (int lp : {1, 2, 3}) {
    for (int inst = 0; inst < 8; ++inst) {
      RngStream rng(derive_seed(800, "omp", lp * 100 + inst));
      Eigen::MatrixXcd pilots(m, l);
      for (int i = 0; i < pilots.size(); ++i) pilots(i) = rng.cnormal();

      // On-grid angles with at least 10 bins of separation; gains away
      // from zero so the instance is identifiable.
      std::vector<int> bins;
      while (static_cast<int>(bins.size()) < lp) {
        const int g = static_cast<int>(rng.uniform() * grid);
        bool distinct = g < grid;
        for (int o : bins) distinct = distinct && std::abs(o - g) >= 10;
        if (distinct) bins.push_back(g);
      }
      std::vector<SparseMultipathChannel::Path> paths;
      const auto angles = uniform_grid(-kPi / 3, kPi / 3, grid);
      for (int p = 0; p < lp; ++p) {
        auto gain = rng.cnormal();
        while (std::abs(gain) < 0.3) gain = rng.cnormal();
        paths.push_back({gain, angles(bins[p])});
      }
      const Eigen::VectorXcd h = synthesize_multipath(paths, m);
      const Eigen::RowVectorXcd rx = h.transpose() * pilots;
      auto est = omp_estimate(rx, pilots, grid, lp, -kPi / 3, kPi / 3);
      const double rel = (est.channel - h).norm() / h.norm();
      if (rel > 1e-6)
        return fail("relative error " + std::to_string(rel) + " at L_p=" +
                    std::to_string(lp) + ", instance " + std::to_string(inst));
    }
  }
  return ok("L_p in {1,2,3}, 8 instances each");
}

CheckResult check_lmmse_dominance() {
  GeometryConfig geo;
  const int m = 2, n = 3, k = 1, l = 8;
  const double sigma1 = 2e-5;
  auto plan = make_pilot_plan(k, n, l, 1.0);
  RngStream srng(900);
  auto stats = estimate_stats(geo, m, n, k, plan, sigma1, 20000, srng);

  const int draws = 1000;
  std::vector<double> diff(draws);  // mse_ls - mse_lmmse
  for (int d = 0; d < draws; ++d) {
    RngStream stream(derive_seed(901, "lmmse-draw", d));
    auto ch = sample_ris_channels(geo, m, n, k, stream);
    auto y = uplink_pilots(ch, plan, sigma1, stream);
    auto truth = links_of(ch);
    auto mse_of = [&](const RisLinks& est) {
      double acc = 0;
      for (int u = 0; u < k; ++u) {
        acc += (est.direct[u] - truth.direct[u]).squaredNorm();
        acc += (est.cascaded[u] - truth.cascaded[u]).squaredNorm();
      }
      return acc;
    };
    diff[d] = mse_of(least_squares_estimate(y, plan, m)) -
              mse_of(lmmse_estimate(y, plan, stats));
  }

  // Paired-mean bootstrap: the mean difference must stay positive in at
  // least 99% of resamples.
  RngStream boot(902);
  int positive = 0;
  const int resamples = 1000;
  for (int r = 0; r < resamples; ++r) {
    double mean = 0;
    for (int d = 0; d < draws; ++d)
      mean += diff[static_cast<int>(boot.uniform() * draws)];
    if (mean > 0) ++positive;
  }
  if (positive < 990)
    return fail("bootstrap positives " + std::to_string(positive) + "/1000");
  return ok(std::to_string(positive) + "/1000 bootstrap resamples positive");
}

CheckResult check_bcd_monotone() {
  GeometryConfig geo;
  for (int inst = 0; inst < 100; ++inst) {
    RngStream rng(derive_seed(1000, "bcd", inst));
    auto ch = sample_ris_channels(geo, 4, 16, 2, rng);
    const Utility kind = inst % 2 == 0 ? Utility::sum : Utility::min;
    auto res = bcd_optimize(links_of(ch), 100.0, 5.6e-5, kind, 8);
    for (std::size_t i = 1; i < res.accepted_utilities.size(); ++i)
      if (res.accepted_utilities[i] < res.accepted_utilities[i - 1])
        return fail("utility decreased at accepted step " + std::to_string(i));
  }
  return ok("100 instances");
}

CheckResult check_posterior_and_bisection() {
  const int m = 8, stages = 4;
  SensingConfig sc;
  sc.num_antennas = m;
  sc.stages = stages;
  FixedSensing fixed(sc, FixedSensing::Mode::random, 1100);
  auto grid = uniform_grid(-1.0, 1.0, 200);
  Eigen::VectorXd prior = Eigen::VectorXd::Constant(200, 1.0 / 200);

  for (int inst = 0; inst < 10; ++inst) {
    RngStream rng(derive_seed(1101, "post", inst));
    auto ch = sample_multipath(m, 1, -1.0, 1.0, rng);
    auto trace = fixed.rollout(ch, 1.0, rng);
    auto fast =
        posterior_update(grid, trace.sensing, trace.measurements, 1.3, 0.9,
                         prior);
    if (std::abs(fast.sum() - 1.0) > 1e-12)
      return fail("posterior does not sum to 1");

    Eigen::VectorXd log_dense(200);
    for (int g = 0; g < 200; ++g) {
      Eigen::VectorXcd a = array_response(grid(g), m);
      Eigen::VectorXcd u(stages);
      for (int t = 0; t < stages; ++t)
        u(t) = (trace.sensing.col(t).transpose() * a)(0, 0);
      Eigen::MatrixXcd sigma =
          0.81 * Eigen::MatrixXcd::Identity(stages, stages) +
          1.3 * u * u.adjoint();
      const double quad =
          (trace.measurements.adjoint() * sigma.inverse() *
           trace.measurements)(0, 0)
              .real();
      log_dense(g) = std::log(prior(g)) - quad -
                     std::log(sigma.determinant().real());
    }
    Eigen::VectorXd dense = (log_dense.array() - log_dense.maxCoeff()).exp();
    dense /= dense.sum();
    if ((fast - dense).cwiseAbs().maxCoeff() > 1e-9)
      return fail("rank-one path deviates from dense oracle");
  }

  // Exact interval halving.
  RngStream rng(1102);
  auto ch = sample_multipath(16, 1, -1.0, 1.0, rng);
  for (int budget : {2, 4, 8, 12}) {
    auto res =
        bisection_baseline(ch, budget, 1.0, 0.0, -1.0, 1.0, rng);
    const double want = 2.0 / std::pow(2.0, budget / 2);
    if (std::abs(res.width - want) > 1e-12)
      return fail("interval width mismatch at budget " +
                  std::to_string(budget));
  }
  return ok("posterior normalization, dense oracle, exact halving");
}

template <typename LossFn>
CheckResult gradient_check(ParamStore& params, const LossFn& loss_at,
                           const std::string& label) {
  Eigen::VectorXd grad;
  {
    ad::Tape tape;
    auto pvars = push_params(tape, params);
    ad::Var loss = loss_at(tape, pvars);
    tape.backward(loss);
    auto grads = collect_grads(tape, pvars);
    grad.resize(params.flat_size());
    Eigen::Index at = 0;
    for (const auto& g : grads) {
      grad.segment(at, g.size()) =
          Eigen::Map<const Eigen::VectorXd>(g.data(), g.size());
      at += g.size();
    }
  }
  const Eigen::VectorXd theta0 = params.flatten();
  auto value_at = [&](const Eigen::VectorXd& theta) {
    params.unflatten(theta);
    ad::Tape tape;
    auto pvars = push_params(tape, params);
    const double v = loss_at(tape, pvars).val()(0, 0);
    return v;
  };
  RngStream rng(1234);
  const double h = 1e-4;
  for (int d = 0; d < 10; ++d) {
    Eigen::VectorXd dir(theta0.size());
    for (Eigen::Index i = 0; i < dir.size(); ++i) dir(i) = rng.normal();
    dir /= dir.norm();
    const double fd =
        (value_at(theta0 + h * dir) - value_at(theta0 - h * dir)) / (2 * h);
    const double an = grad.dot(dir);
    if (std::abs(an - fd) > 1e-3 * std::max(1e-9, std::abs(fd))) {
      params.unflatten(theta0);
      return fail(label + ": direction " + std::to_string(d) +
                  " analytic " + std::to_string(an) + " vs fd " +
                  std::to_string(fd));
    }
  }
  params.unflatten(theta0);
  return ok();
}

CheckResult check_gradients() {
  // RIS GNN at toy dims.
  {
    GeometryConfig geo;
    auto plan = make_pilot_plan(2, 4, 4, 31.6);
    RisGnn gnn(2, 4, 2, 2, 100.0,
               std::sqrt(direct_gain_at_region_center(geo)), GnnConfig{2, 16},
               31);
    std::vector<RisChannelSet> batch;
    for (int i = 0; i < 2; ++i) {
      RngStream rng(derive_seed(1200, "g", i));
      batch.push_back(sample_ris_channels(geo, 2, 4, 2, rng));
    }
    auto result = gradient_check(
        gnn.params(),
        [&](ad::Tape& tape, const std::vector<ad::Var>& pvars) {
          RngStream noise(77);
          return gnn.loss(tape, pvars, batch, plan, 5.6e-5, 0.0, Utility::sum,
                          noise);
        },
        "ris_gnn");
    if (!result.pass) return result;
  }
  // FDD surrogate at toy dims.
  {
    FddConfig fc;
    fc.num_antennas = 4;
    fc.pilot_len = 3;
    fc.feedback_bits = 6;
    fc.hidden = 16;
    fc.hidden_layers = 2;
    FddModel fdd(fc, 32);
    fdd.set_st_beta(2.0);
    std::vector<std::vector<Eigen::VectorXcd>> batch;
    for (int i = 0; i < 2; ++i) {
      RngStream rng(derive_seed(1201, "g", i));
      std::vector<Eigen::VectorXcd> users;
      for (int u = 0; u < fc.num_users; ++u)
        users.push_back(sample_multipath(fc.num_antennas, fc.num_paths,
                                         fc.aod_min, fc.aod_max, rng)
                            .coeffs);
      batch.push_back(users);
    }
    auto result = gradient_check(
        fdd.params(),
        [&](ad::Tape& tape, const std::vector<ad::Var>& pvars) {
          RngStream noise(78);
          return fdd.loss(tape, pvars, batch, BitMode::surrogate, noise);
        },
        "fdd");
    if (!result.pass) return result;
  }
  // Active agent at toy dims, T = 3.
  {
    SensingConfig sc;
    sc.num_antennas = 8;
    sc.stages = 3;
    sc.lstm_width = 16;
    sc.head_hidden = 16;
    ActiveAgent agent(sc, 33);
    std::vector<SparseMultipathChannel> batch;
    for (int i = 0; i < 2; ++i) {
      RngStream rng(derive_seed(1202, "g", i));
      batch.push_back(sample_multipath(8, 1, sc.aoa_min, sc.aoa_max, rng));
    }
    auto result = gradient_check(
        agent.params(),
        [&](ad::Tape& tape, const std::vector<ad::Var>& pvars) {
          RngStream noise(79);
          return agent.loss(tape, pvars, batch, noise);
        },
        "active");
    if (!result.pass) return result;
  }
  return ok("ris_gnn, fdd surrogate, active; 10 directions each");
}

}  // namespace

std::vector<PropCheck> property_suite() {
  return {
      {"array response: broadside ones and unit modulus", check_array_response},
      {"gnn equivariance under user permutation", check_gnn_equivariance},
      {"constraint satisfaction of learned forwards", check_constraints},
      {"mrt optimality and beamforming-gain bound", check_mrt_optimality},
      {"zf interference nulling under perfect csi", check_zf_nulling},
      {"omp noiseless on-grid exact recovery", check_omp_recovery},
      {"lmmse dominates least squares (bootstrap)", check_lmmse_dominance},
      {"bcd accepted-step monotonicity", check_bcd_monotone},
      {"posterior identities and bisection halving",
       check_posterior_and_bisection},
      {"analytic gradients match finite differences", check_gradients},
  };
}

}  // namespace pilotbench
