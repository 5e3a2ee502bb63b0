#pragma once

#include <Eigen/Core>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "lagdyn/dual.hpp"
#include "lagdyn/reverse.hpp"

namespace lagdyn {

/// Raised when an evaluation produces a non-finite value. `coordinate` is
/// the seeded input slot (-1 when the primal itself is non-finite).
struct NumericalEvalError : std::runtime_error {
  explicit NumericalEvalError(int coord, const std::string& what_arg)
      : std::runtime_error(what_arg), coordinate(coord) {}
  int coordinate;
};

/// A scalar function evaluable on every scalar type the toolkit
/// differentiates with. Wrap a template callable with `FunctionAdapter`.
class DifferentiableFunction {
 public:
  virtual ~DifferentiableFunction();
  virtual double operator()(const std::vector<double>& x) const = 0;
  virtual Dual1 operator()(const std::vector<Dual1>& x) const = 0;
  virtual Dual2 operator()(const std::vector<Dual2>& x) const = 0;
  virtual Dual3 operator()(const std::vector<Dual3>& x) const = 0;
  virtual Rvar operator()(const std::vector<Rvar>& x) const = 0;
  virtual Dual<Rvar> operator()(const std::vector<Dual<Rvar>>& x) const = 0;
  virtual Dual<Dual<Rvar>> operator()(const std::vector<Dual<Dual<Rvar>>>& x) const = 0;
};

template <class F>
class FunctionAdapter final : public DifferentiableFunction {
 public:
  explicit FunctionAdapter(F f) : f_(std::move(f)) {}
  double operator()(const std::vector<double>& x) const override { return f_(x); }
  Dual1 operator()(const std::vector<Dual1>& x) const override { return f_(x); }
  Dual2 operator()(const std::vector<Dual2>& x) const override { return f_(x); }
  Dual3 operator()(const std::vector<Dual3>& x) const override { return f_(x); }
  Rvar operator()(const std::vector<Rvar>& x) const override { return f_(x); }
  Dual<Rvar> operator()(const std::vector<Dual<Rvar>>& x) const override { return f_(x); }
  Dual<Dual<Rvar>> operator()(const std::vector<Dual<Dual<Rvar>>>& x) const override {
    return f_(x);
  }

 private:
  F f_;
};

template <class F>
FunctionAdapter<F> adapt(F f) {
  return FunctionAdapter<F>(std::move(f));
}

/// Contiguous sub-block of a function's input vector.
struct Block {
  int start = 0;
  int len = 0;
};

namespace detail {
template <class S, class F>
std::vector<S> lift(const F&, const Eigen::VectorXd& x) {
  std::vector<S> xs(static_cast<std::size_t>(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) xs[static_cast<std::size_t>(i)] = S(x[i]);
  return xs;
}
}  // namespace detail

/// d f / d x_i for every i, by one forward-mode pass per coordinate.
template <class F>
Eigen::VectorXd gradient(const F& f, const Eigen::VectorXd& x) {
  Eigen::VectorXd g(x.size());
  auto xs = detail::lift<Dual1>(f, x);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xs[static_cast<std::size_t>(i)].d = 1.0;
    const Dual1 y = f(xs);
    xs[static_cast<std::size_t>(i)].d = 0.0;
    if (!std::isfinite(y.v))
      throw NumericalEvalError(-1, "non-finite value during gradient evaluation");
    if (!std::isfinite(y.d))
      throw NumericalEvalError(static_cast<int>(i),
                               "non-finite derivative at coordinate " + std::to_string(i));
    g[i] = y.d;
  }
  return g;
}

/// The mixed second-derivative block d^2 f / d x_a d x_b, shape a.len x b.len,
/// via nested forward mode. Rows index the `a` block.
template <class F>
Eigen::MatrixXd hessian_block(const F& f, const Eigen::VectorXd& x, Block a, Block b) {
  Eigen::MatrixXd h(a.len, b.len);
  auto xs = detail::lift<Dual2>(f, x);
  for (int i = 0; i < a.len; ++i) {
    xs[static_cast<std::size_t>(a.start + i)].d.v = 1.0;
    for (int j = 0; j < b.len; ++j) {
      xs[static_cast<std::size_t>(b.start + j)].v.d = 1.0;
      const Dual2 y = f(xs);
      xs[static_cast<std::size_t>(b.start + j)].v.d = 0.0;
      if (!std::isfinite(y.d.d))
        throw NumericalEvalError(a.start + i, "non-finite second derivative");
      h(i, j) = y.d.d;
    }
    xs[static_cast<std::size_t>(a.start + i)].d.v = 0.0;
  }
  return h;
}

/// d loss / d params via reverse accumulation on a per-call tape.
template <class F>
Eigen::VectorXd parameter_gradient(const F& loss, const Eigen::VectorXd& params) {
  Tape tape;
  std::vector<Rvar> ps(static_cast<std::size_t>(params.size()));
  for (Eigen::Index i = 0; i < params.size(); ++i)
    ps[static_cast<std::size_t>(i)] = Rvar(params[i], &tape);
  const Rvar y = loss(ps);
  if (!std::isfinite(y.value()))
    throw NumericalEvalError(-1, "non-finite loss value in parameter_gradient");
  Eigen::VectorXd g = Eigen::VectorXd::Zero(params.size());
  if (y.id() < 0) return g;  // loss independent of every parameter
  const std::vector<double> adj = tape.backward(y.id());
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double gi = adj[static_cast<std::size_t>(ps[static_cast<std::size_t>(i)].id())];
    if (!std::isfinite(gi))
      throw NumericalEvalError(static_cast<int>(i), "non-finite parameter gradient");
    g[i] = gi;
  }
  return g;
}

/// Smooth shifted softplus-like activation (x + sqrt(x^2 + b)) / 2.
/// Twice differentiable everywhere for b > 0.
template <class S>
S squareplus(const S& x, double b) {
  return (x + sqrt(x * x + b)) * 0.5;
}

inline double squareplus_d1(double x, double b) {
  return 0.5 * (1.0 + x / std::sqrt(x * x + b));
}
inline double squareplus_d2(double x, double b) {
  const double r = std::sqrt(x * x + b);
  return 0.5 * b / (r * r * r);
}
inline double squareplus_d3(double x, double b) {
  const double r = std::sqrt(x * x + b);
  return -1.5 * b * x / (r * r * r * r * r);
}

}  // namespace lagdyn
