#include <cmath>
#include <vector>

#include "doctest.h"
#include "lagdyn/autodiff.hpp"
#include "lagdyn/random.hpp"
#include "test_util.hpp"

using namespace lagdyn;

namespace {

// Smooth scalar test functions evaluable on every differentiable scalar type.
struct SuiteFn {
  std::string name;
  int arity;
  std::function<double(const std::vector<double>&)> plain;
  std::function<Dual1(const std::vector<Dual1>&)> d1;
  std::function<Dual2(const std::vector<Dual2>&)> d2;
};

template <class S>
S poly3(const std::vector<S>& x) {
  return x[0] * x[0] * x[0] - 2.0 * x[0] * x[1] + x[1] * x[1] * x[2] + 0.5 * x[2];
}
template <class S>
S trig_product(const std::vector<S>& x) {
  return sin(x[0]) * cos(x[1]) + x[2] * sin(x[1] * x[0]);
}
template <class S>
S squareplus_mix(const std::vector<S>& x) {
  return squareplus(x[0] * x[1] - x[2], 4.0) * squareplus(x[2] + 0.3 * x[0], 1.5);
}
template <class S>
S rational(const std::vector<S>& x) {
  return (x[0] * x[0] + 1.0) / (x[1] * x[1] + 2.0) + exp(0.1 * x[2]);
}

std::vector<SuiteFn> suite() {
  return {
      {"poly3", 3, poly3<double>, poly3<Dual1>, poly3<Dual2>},
      {"trig_product", 3, trig_product<double>, trig_product<Dual1>, trig_product<Dual2>},
      {"squareplus_mix", 3, squareplus_mix<double>, squareplus_mix<Dual1>, squareplus_mix<Dual2>},
      {"rational", 3, rational<double>, rational<Dual1>, rational<Dual2>},
  };
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace

TEST_CASE("dual arithmetic with zero payload reproduces plain arithmetic exactly") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const double a = rng.uniform(-3.0, 3.0), b = rng.uniform(-3.0, 3.0);
    const Dual1 da(a), db(b);
    CHECK((da * db + da / (db + 4.0) - da).v == a * b + a / (b + 4.0) - a);
    CHECK((da * db).d == 0.0);
    const Dual2 ea(a), eb(b);
    CHECK(sqrt(ea * ea + eb * eb + 1.0).v.v == std::sqrt(a * a + b * b + 1.0));
  }
}

TEST_CASE("dual nesting is associative on polynomials") {
  // d2/dx2 via dual-of-dual equals the closed form for x^4 + 3x^2.
  for (double x : {-1.7, -0.3, 0.9, 2.4}) {
    Dual2 v(Dual1(x, 1.0), Dual1(1.0, 0.0));
    const Dual2 y = v * v * v * v + 3.0 * v * v;
    CHECK(testutil::rel_err(y.d.d, 12.0 * x * x + 6.0) < 1e-12);
    CHECK(testutil::rel_err(y.v.d, 4.0 * x * x * x + 6.0 * x) < 1e-12);
  }
}

TEST_CASE("third-order nesting") {
  // f(x) = x^5: f'''(x) = 60 x^2, extracted from Dual3.
  const double x = 1.3;
  Dual3 v;
  v.v.v.v = x;
  v.v.v.d = 1.0;
  v.v.d.v = 1.0;
  v.d.v.v = 1.0;
  const Dual3 y = v * v * v * v * v;
  CHECK(testutil::rel_err(y.d.d.d, 60.0 * x * x) < 1e-11);
}

TEST_CASE("gradient: trivial examples") {
  auto sq = [](const auto& x) { return x[0] * x[0]; };
  Eigen::VectorXd x(1);
  x << 3.0;
  CHECK(gradient(sq, x)[0] == doctest::Approx(6.0).epsilon(1e-14));

  auto constant = [](const auto& x) {
    using S = std::decay_t<decltype(x[0])>;
    (void)x;
    return S(2.5);
  };
  Eigen::VectorXd y(4);
  y << 1.0, -2.0, 0.5, 4.0;
  CHECK(gradient(constant, y).norm() == 0.0);
}

TEST_CASE("gradient of 4-link analytic Lagrangian matches finite differences") {
  const auto spec = catalog("chain-4");
  const AnalyticRodModel model(spec.topology);
  const auto fn = model.lagrangian_function(spec.topology);
  const State state = testutil::random_chain_state(spec.topology, 42);
  const FreeDofMap map = free_dof_index(spec.topology);
  const Eigen::VectorXd x = pack_free_state(spec.topology, map, state);

  auto call = [&](const auto& xs) { return (*fn)(xs); };
  const Eigen::VectorXd got = gradient(call, x);
  const Eigen::VectorXd want = testutil::fd_gradient(
      [&](const Eigen::VectorXd& v) { return (*fn)(to_std(v)); }, x, 1e-5);
  CHECK(testutil::max_rel_err(got, want) < 1e-6);
}

TEST_CASE("hessian_block: quadratic form recovers the diagonal exactly") {
  auto f = [](const auto& x) {
    return 0.5 * (2.0 * x[0] * x[0] + 5.0 * x[1] * x[1] + 0.25 * x[2] * x[2]);
  };
  Eigen::VectorXd x(3);
  x << 0.3, -1.0, 2.0;
  const Eigen::MatrixXd h = hessian_block(f, x, {0, 3}, {0, 3});
  Eigen::MatrixXd want = Eigen::VectorXd(Eigen::Vector3d(2.0, 5.0, 0.25)).asDiagonal();
  CHECK((h - want).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("hessian_block: function independent of the second block gives zeros") {
  auto f = [](const auto& x) { return x[0] * x[0] + sin(x[1]); };
  Eigen::VectorXd x(4);
  x << 0.3, -1.0, 2.0, 0.7;
  const Eigen::MatrixXd h = hessian_block(f, x, {0, 2}, {2, 2});
  CHECK(h.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mass matrix of the 2-link analytic Lagrangian matches nested finite differences") {
  const auto spec = catalog("chain-2");
  const AnalyticRodModel model(spec.topology);
  const auto fn = model.lagrangian_function(spec.topology);
  const State state = testutil::random_chain_state(spec.topology, 5);
  const FreeDofMap map = free_dof_index(spec.topology);
  const Eigen::VectorXd x = pack_free_state(spec.topology, map, state);
  const int d = map.count;

  auto call = [&](const auto& xs) { return (*fn)(xs); };
  const Eigen::MatrixXd got = hessian_block(call, x, {d, d}, {d, d});
  const Eigen::MatrixXd want = testutil::fd_hessian_block(
      [&](const Eigen::VectorXd& v) { return (*fn)(to_std(v)); }, x, d, d, d, d);
  CHECK(testutil::max_rel_err(got, want) < 1e-5);
}

TEST_CASE("gradient and hessian agree with finite differences over the function suite") {
  Rng rng(123);
  for (const SuiteFn& fn : suite()) {
    CAPTURE(fn.name);
    double worst_g = 0.0, worst_h = 0.0, worst_sym = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      Eigen::VectorXd x(fn.arity);
      for (int i = 0; i < fn.arity; ++i) x[i] = rng.uniform(-2.0, 2.0);
      const Eigen::VectorXd g = gradient(fn.d1, x);
      const Eigen::VectorXd g_fd = testutil::fd_gradient(
          [&](const Eigen::VectorXd& v) { return fn.plain(to_std(v)); }, x, 1e-5);
      worst_g = std::max(worst_g, testutil::max_rel_err(g, g_fd));

      const Eigen::MatrixXd h = hessian_block(fn.d2, x, {0, fn.arity}, {0, fn.arity});
      const Eigen::MatrixXd h_fd = testutil::fd_hessian_block(
          [&](const Eigen::VectorXd& v) { return fn.plain(to_std(v)); }, x, 0, fn.arity, 0,
          fn.arity);
      worst_h = std::max(worst_h, testutil::max_rel_err(h, h_fd));
      worst_sym = std::max(worst_sym, (h - h.transpose()).cwiseAbs().maxCoeff());
    }
    CHECK(worst_g < 1e-6);
    CHECK(worst_h < 1e-5);
    CHECK(worst_sym <= 1e-10);
  }
}

TEST_CASE("gradient reports the offending coordinate on non-finite values") {
  auto f = [](const auto& x) { return sqrt(x[0]) + x[1]; };
  Eigen::VectorXd x(2);
  x << 0.0, 1.0;  // derivative of sqrt blows up at zero
  CHECK_THROWS_AS((void)gradient(f, x), NumericalEvalError);
  try {
    (void)gradient(f, x);
  } catch (const NumericalEvalError& err) {
    CHECK(err.coordinate == 0);
  }
}

TEST_CASE("parameter_gradient: trivial examples") {
  auto half_norm = [](const auto& p) {
    using S = std::decay_t<decltype(p[0])>;
    S acc(0.0);
    for (const auto& v : p) acc += v * v;
    return acc * 0.5;
  };
  Eigen::VectorXd params(3);
  params << 1.0, -2.0, 0.25;
  const Eigen::VectorXd g = parameter_gradient(half_norm, params);
  CHECK((g - params).norm() == 0.0);

  auto ignores_middle = [](const auto& p) { return p[0] * p[0] + p[2]; };
  const Eigen::VectorXd g2 = parameter_gradient(ignores_middle, params);
  CHECK(g2[1] == 0.0);
  CHECK(g2[0] == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("parameter_gradient composes with nested duals through a hessian") {
  // loss(p) = d2/dx2 [ p0 * x^2 + p1 * sin(x) ] at x = 0.4, differentiated
  // w.r.t. p. Inner second derivative via Dual<Dual<Rvar>>.
  auto loss = [](const std::vector<Rvar>& p) {
    using DD = Dual<Dual<Rvar>>;
    DD x;
    x.v.v = Rvar(0.4);
    x.v.d = Rvar(1.0);
    x.d.v = Rvar(1.0);
    const DD y = DD(Dual<Rvar>(p[0])) * x * x + DD(Dual<Rvar>(p[1])) * sin(x);
    return y.d.d;
  };
  Eigen::VectorXd p(2);
  p << 1.5, -0.7;
  const Eigen::VectorXd g = parameter_gradient(loss, p);
  CHECK(testutil::rel_err(g[0], 2.0) < 1e-12);
  CHECK(testutil::rel_err(g[1], -std::sin(0.4)) < 1e-12);
}

TEST_CASE("squareplus values and derivatives") {
  CHECK(squareplus(0.0, 4.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(squareplus_d1(0.0, 4.0) == doctest::Approx(0.5).epsilon(1e-15));
  // asymptotes: x + b/(4x) above, b/(4|x|) below
  CHECK(std::abs(squareplus(40.0, 4.0) - 40.0) < 0.03);
  CHECK(std::abs(squareplus(-40.0, 4.0)) < 0.03);
  CHECK(std::abs(squareplus(-4000.0, 4.0)) < 3e-4);
  // closed-form derivatives vs duals
  for (double x : {-2.0, -0.5, 0.0, 0.8, 3.0}) {
    Dual2 v(Dual1(x, 1.0), Dual1(1.0, 0.0));
    const Dual2 y = squareplus(v, 4.0);
    CHECK(testutil::rel_err(y.v.d, squareplus_d1(x, 4.0)) < 1e-13);
    CHECK(testutil::rel_err(y.d.d, squareplus_d2(x, 4.0)) < 1e-12);
  }
}
