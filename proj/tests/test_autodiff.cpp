#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "pilotbench/ad_complex.hpp"
#include "pilotbench/autodiff.hpp"
#include "pilotbench/rng.hpp"

using namespace pilotbench;
using ad::Mat;

namespace {

// Central-difference directional derivative oracle: builds the loss twice
// per direction and compares against the tape gradient.
void check_against_fd(
    const std::function<ad::Var(ad::Tape&, ad::Var)>& build, const Mat& x0,
    double tol = 1e-6) {
  ad::Tape tape;
  ad::Var x = tape.leaf(x0);
  ad::Var loss = build(tape, x);
  tape.backward(loss);
  Mat g = tape.grad(x);

  RngStream rng(31);
  const double h = 1e-5;
  for (int trial = 0; trial < 5; ++trial) {
    Mat dir(x0.rows(), x0.cols());
    for (Eigen::Index i = 0; i < dir.size(); ++i) dir(i) = rng.normal();
    dir /= dir.norm();

    auto eval = [&](const Mat& pt) {
      ad::Tape t2;
      ad::Var v = t2.leaf(pt);
      return build(t2, v).val()(0, 0);
    };
    const double fd = (eval(x0 + h * dir) - eval(x0 - h * dir)) / (2 * h);
    const double an = (g.array() * dir.array()).sum();
    CHECK(an == doctest::Approx(fd).epsilon(tol));
  }
}

Mat random_mat(int r, int c, RngStream& rng) {
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = rng.normal();
  return m;
}

}  // namespace

TEST_CASE("gradients of elementwise ops match finite differences") {
  RngStream rng(1);
  Mat x0 = random_mat(3, 4, rng);
  check_against_fd(
      [](ad::Tape& t, ad::Var x) {
        ad::Var y = t.mul(t.tanh_(x), t.sigmoid(t.scale(x, 0.5)));
        y = t.add(y, t.square(t.add_scalar(x, 0.3)));
        return t.mean_all(y);
      },
      x0);
}

TEST_CASE("gradients of log, sqrt, exp, div match finite differences") {
  RngStream rng(2);
  Mat x0 = random_mat(2, 5, rng);
  x0 = x0.array().abs() + 0.5;  // keep log/sqrt in-domain
  check_against_fd(
      [](ad::Tape& t, ad::Var x) {
        ad::Var a = t.log_(x);
        ad::Var b = t.sqrt_(x);
        ad::Var c = t.exp_(t.scale(x, -0.2));
        return t.mean_all(t.div(t.add(a, b), t.add_scalar(c, 1.0)));
      },
      x0);
}

TEST_CASE("gradients of matmul chains match finite differences") {
  RngStream rng(3);
  Mat x0 = random_mat(4, 3, rng);
  Mat c = random_mat(3, 6, rng);
  Mat d = random_mat(6, 2, rng);
  Mat e = random_mat(5, 4, rng);
  check_against_fd(
      [c, d, e](ad::Tape& t, ad::Var x) {
        ad::Var y = t.matmul(t.matmul(x, c), d);  // const rhs
        ad::Var z = t.matmul(e, y);               // const lhs
        ad::Var w = t.matmul(t.constant(e), y);   // var-var
        return t.mean_all(t.square(t.add(z, w)));
      },
      x0);
}

TEST_CASE("gradients of structure ops match finite differences") {
  RngStream rng(4);
  Mat x0 = random_mat(5, 6, rng);
  check_against_fd(
      [](ad::Tape& t, ad::Var x) {
        ad::Var a = t.slice_cols(x, 0, 3);
        ad::Var b = t.slice_cols(x, 3, 3);
        ad::Var cat = t.hcat({t.mul(a, b), t.sub(a, b)});
        ad::Var s = t.rowsum(cat);
        ad::Var br = t.broadcast_cols(s, 4);
        return t.mean_all(t.square(br));
      },
      x0);
}

TEST_CASE("gradient of batch_matvec matches finite differences") {
  RngStream rng(5);
  std::vector<Mat> mats;
  for (int i = 0; i < 4; ++i) mats.push_back(random_mat(3, 5, rng));
  Mat x0 = random_mat(4, 5, rng);
  check_against_fd(
      [mats](ad::Tape& t, ad::Var x) {
        return t.mean_all(t.square(t.batch_matvec(mats, x)));
      },
      x0);
}

TEST_CASE("gradient of add_rowvec bias matches finite differences") {
  RngStream rng(6);
  Mat x0 = random_mat(1, 4, rng);
  Mat a = random_mat(7, 4, rng);
  check_against_fd(
      [a](ad::Tape& t, ad::Var bias) {
        return t.mean_all(t.square(t.add_rowvec(t.constant(a), bias)));
      },
      x0);
}

TEST_CASE("cwise max/min route gradients to the active side") {
  ad::Tape t;
  Mat av(1, 3), bv(1, 3);
  av << 1.0, -2.0, 5.0;
  bv << 0.0, 3.0, 5.0;  // tie in the last slot goes to the first argument
  ad::Var a = t.leaf(av), b = t.leaf(bv);
  ad::Var m = t.sum_all(t.cwise_max(a, b));
  t.backward(m);
  CHECK(t.grad(a)(0, 0) == 1.0);
  CHECK(t.grad(a)(0, 1) == 0.0);
  CHECK(t.grad(a)(0, 2) == 1.0);
  CHECK(t.grad(b)(0, 1) == 1.0);
  CHECK(t.grad(b)(0, 2) == 0.0);
}

TEST_CASE("sign_st forward is hard sign, backward is the tanh surrogate") {
  ad::Tape t;
  Mat xv(1, 3);
  xv << -0.4, 0.0, 2.0;
  ad::Var x = t.leaf(xv);
  ad::Var s = t.sign_st(x, 5.0);
  CHECK(s.val()(0, 0) == -1.0);
  CHECK(s.val()(0, 1) == 1.0);  // sign(0) := +1
  CHECK(s.val()(0, 2) == 1.0);
  ad::Var loss = t.sum_all(s);
  t.backward(loss);
  const double th = std::tanh(5.0 * -0.4);
  CHECK(t.grad(x)(0, 0) == doctest::Approx(5.0 * (1 - th * th)));
  CHECK(t.grad(x)(0, 1) == doctest::Approx(5.0));
}

TEST_CASE("complex composites reproduce Eigen complex arithmetic") {
  RngStream rng(9);
  Eigen::MatrixXcd a(2, 3), b(2, 3);
  for (int i = 0; i < a.size(); ++i) {
    a(i) = rng.cnormal();
    b(i) = rng.cnormal();
  }
  ad::Tape t;
  ad::CVar av = ad::cconstant(t, a);
  ad::CVar bv = ad::cconstant(t, b);
  ad::CVar prod = ad::cmul(t, av, bv);
  Eigen::MatrixXcd want = a.cwiseProduct(b);
  CHECK((prod.re.val() - want.real()).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((prod.im.val() - want.imag()).cwiseAbs().maxCoeff() < 1e-14);

  ad::CVar dot = ad::crowdot(t, av, bv);
  Eigen::VectorXcd wd = (a.array() * b.array()).rowwise().sum();
  CHECK(std::abs(dot.re.val()(0, 0) - wd(0).real()) < 1e-14);
  CHECK(std::abs(dot.im.val()(1, 0) - wd(1).imag()) < 1e-14);

  ad::Var a2 = ad::cabs2(t, av);
  CHECK(a2.val()(1, 2) == doctest::Approx(std::norm(a(1, 2))));
}

TEST_CASE("cnormalize_entries yields unit modulus and cnormalize_rows unit norm") {
  RngStream rng(10);
  Eigen::MatrixXcd a(3, 4);
  for (int i = 0; i < a.size(); ++i) a(i) = 3.0 * rng.cnormal();
  ad::Tape t;
  ad::CVar av = ad::cconstant(t, a);
  ad::CVar u = ad::cnormalize_entries(t, av);
  for (int i = 0; i < a.size(); ++i) {
    const double mod = std::hypot(u.re.val()(i), u.im.val()(i));
    CHECK(mod == doctest::Approx(1.0).epsilon(1e-12));
  }
  ad::CVar r = ad::cnormalize_rows(t, av);
  for (int i = 0; i < 3; ++i) {
    double n2 = 0;
    for (int j = 0; j < 4; ++j)
      n2 += r.re.val()(i, j) * r.re.val()(i, j) +
            r.im.val()(i, j) * r.im.val()(i, j);
    CHECK(n2 == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("backward accumulates through shared subexpressions") {
  ad::Tape t;
  Mat xv(1, 1);
  xv << 2.0;
  ad::Var x = t.leaf(xv);
  ad::Var y = t.mul(x, x);          // x^2
  ad::Var z = t.add(y, t.scale(x, 3.0));  // x^2 + 3x
  t.backward(t.sum_all(z));
  CHECK(t.grad(x)(0, 0) == doctest::Approx(2.0 * 2.0 + 3.0));
}
