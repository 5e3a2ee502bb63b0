#pragma once

#include <cstdint>

#include "lagdyn/mlp.hpp"
#include "lagdyn/model.hpp"

namespace lagdyn {

struct SizeMismatchError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Feed-forward baseline: one perceptron mapping the concatenated free
/// (q, qdot) of a fixed-size system to a scalar Lagrangian. The input width
/// is fixed at construction; applying the model to a system with a different
/// free-coordinate count is a SizeMismatchError.
struct ClnnConfig {
  int input_width = 0;
  int hidden = 128;
  int hidden_layers = 2;
  double squareplus_b = 4.0;

  void validate() const;
};

struct ClnnParams {
  ClnnConfig config;
  std::uint64_t seed = 0;
  Mlp net;

  static ClnnParams init(const ClnnConfig& config, std::uint64_t seed);
  Eigen::VectorXd flatten() const;
  void unflatten(const Eigen::VectorXd& flat);
  int parameter_count() const;
};

class FeedForwardModel final : public LagrangianModel {
 public:
  explicit FeedForwardModel(ClnnParams params) : params_(std::move(params)) {}

  double lagrangian(const Topology& topology, const State& state) const override;
  EnergyTerms energy_terms(const Topology& topology, const State& state) const override;
  std::unique_ptr<DifferentiableFunction> lagrangian_function(
      const Topology& topology) const override;
  std::string family() const override { return "clnn"; }

  /// Same contract as GraphNetModel::objective_param_gradient.
  Eigen::VectorXd objective_param_gradient(const Topology& topology, const State& state,
                                           const Eigen::VectorXd& u_qdot,
                                           const Eigen::VectorXd& w_q,
                                           const Eigen::VectorXd& w_qdot,
                                           const Eigen::VectorXd& g_q) const override;

  int parameter_count() const override { return params_.parameter_count(); }
  Eigen::VectorXd parameters() const override { return params_.flatten(); }
  void set_parameters(const Eigen::VectorXd& flat) override { params_.unflatten(flat); }

  const ClnnParams& params() const { return params_; }
  ClnnParams& params() { return params_; }

 private:
  void check_width(const Topology& topology) const;
  ClnnParams params_;
};

/// Reference scalar route, parameters from a flat vector in flatten order.
template <class S>
S clnn_eval_generic(const ClnnConfig& config, const std::vector<S>& flat_params,
                    const std::vector<S>& x) {
  std::size_t pos = 0;
  auto linear = [&](int out, int in, const std::vector<S>& v) {
    std::vector<S> y(static_cast<std::size_t>(out));
    for (int r = 0; r < out; ++r) {
      S acc(0.0);
      for (int c = 0; c < in; ++c) acc += flat_params[pos + static_cast<std::size_t>(r * in + c)] * v[static_cast<std::size_t>(c)];
      y[static_cast<std::size_t>(r)] = acc;
    }
    pos += static_cast<std::size_t>(out) * in;
    for (int r = 0; r < out; ++r) y[static_cast<std::size_t>(r)] += flat_params[pos + static_cast<std::size_t>(r)];
    pos += static_cast<std::size_t>(out);
    return y;
  };
  std::vector<S> h = x;
  int width = config.input_width;
  for (int l = 0; l < config.hidden_layers; ++l) {
    h = linear(config.hidden, width, h);
    for (auto& v : h) v = squareplus(v, config.squareplus_b);
    width = config.hidden;
  }
  h = linear(1, width, h);
  return h[0];
}

}  // namespace lagdyn
