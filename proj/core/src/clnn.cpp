#include "lagdyn/clnn.hpp"

namespace lagdyn {

void ClnnConfig::validate() const {
  if (input_width < 1 || hidden < 1 || hidden_layers < 1)
    throw std::invalid_argument("clnn config: all sizes must be >= 1");
  if (!(squareplus_b > 0.0))
    throw std::invalid_argument("clnn config: squareplus shift must be > 0");
}

ClnnParams ClnnParams::init(const ClnnConfig& config, std::uint64_t seed) {
  config.validate();
  ClnnParams p;
  p.config = config;
  p.seed = seed;
  Rng rng(derive_seed(seed, 0x636c6e6e));
  p.net = make_mlp(config.input_width, config.hidden, config.hidden_layers, 1, rng);
  return p;
}

Eigen::VectorXd ClnnParams::flatten() const {
  std::vector<double> out;
  append_flat(net, out);
  return Eigen::Map<const Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size()));
}

void ClnnParams::unflatten(const Eigen::VectorXd& flat) {
  if (flat.size() != parameter_count())
    throw std::invalid_argument("clnn unflatten: parameter count mismatch");
  const double* cursor = flat.data();
  read_flat(net, cursor);
}

int ClnnParams::parameter_count() const { return static_cast<int>(flatten().size()); }

void FeedForwardModel::check_width(const Topology& topology) const {
  const FreeDofMap map = free_dof_index(topology);
  if (2 * map.count != params_.config.input_width)
    throw SizeMismatchError("clnn input width " + std::to_string(params_.config.input_width) +
                            " does not match system free-coordinate count " +
                            std::to_string(2 * map.count) +
                            "; the feed-forward baseline is not inductive");
}

namespace {
Batch input_batch(const Topology& topology, const FreeDofMap& map, const State& state,
                  const std::vector<SeedChannel>& seeds, int channels) {
  const int n_free = map.count;
  Batch x(1, channels, 2 * n_free);
  for (int k = 0; k < n_free; ++k) {
    const int full = map.to_full[static_cast<std::size_t>(k)];
    x.ch(0)(0, k) = state.q[full];
    x.ch(0)(0, n_free + k) = state.qdot[full];
  }
  for (int c = 1; c < channels; ++c) {
    const SeedChannel& s = seeds[static_cast<std::size_t>(c - 1)];
    for (int k = 0; k < n_free; ++k) {
      const int full = map.to_full[static_cast<std::size_t>(k)];
      if (s.dq.size()) x.ch(c)(0, k) = s.dq[full];
      if (s.dqdot.size()) x.ch(c)(0, n_free + k) = s.dqdot[full];
    }
  }
  return x;
}
}  // namespace

double FeedForwardModel::lagrangian(const Topology& topology, const State& state) const {
  check_width(topology);
  const FreeDofMap map = free_dof_index(topology);
  const RingSpec ring{1, -1, -1, -1, {}};
  const MlpTrace trace = mlp_forward(
      params_.net, input_batch(topology, map, state, {}, 1), params_.config.squareplus_b, ring);
  return trace.out.ch(0)(0, 0);
}

EnergyTerms FeedForwardModel::energy_terms(const Topology& topology, const State& state) const {
  check_width(topology);
  const FreeDofMap map = free_dof_index(topology);
  const int n_free = map.count;

  RingSpec ring;
  ring.channels = 1 + n_free;
  std::vector<SeedChannel> seeds(static_cast<std::size_t>(n_free));
  for (int k = 0; k < n_free; ++k) {
    seeds[static_cast<std::size_t>(k)].dqdot = Eigen::VectorXd::Zero(topology.n_coords());
    seeds[static_cast<std::size_t>(k)].dqdot[map.to_full[static_cast<std::size_t>(k)]] = 1.0;
  }
  const Batch x = input_batch(topology, map, state, seeds, ring.channels);
  const MlpTrace trace = mlp_forward(params_.net, x, params_.config.squareplus_b, ring);

  Batch ybar(1, ring.channels, 1);
  ybar.ch(0)(0, 0) = 1.0;
  const Batch xbar =
      mlp_backward(params_.net, trace, ybar, params_.config.squareplus_b, ring, nullptr);

  EnergyTerms terms;
  terms.conservative.resize(n_free);
  terms.mass.resize(n_free, n_free);
  terms.coriolis.resize(n_free, n_free);
  for (int b = 0; b < n_free; ++b) {
    terms.conservative[b] = xbar.ch(0)(0, b);
    for (int a = 0; a < n_free; ++a) {
      terms.mass(a, b) = xbar.ch(1 + a)(0, n_free + b);
      terms.coriolis(a, b) = xbar.ch(1 + a)(0, b);
    }
  }
  return terms;
}

Eigen::VectorXd FeedForwardModel::objective_param_gradient(
    const Topology& topology, const State& state, const Eigen::VectorXd& u_qdot,
    const Eigen::VectorXd& w_q, const Eigen::VectorXd& w_qdot, const Eigen::VectorXd& g_q) const {
  check_width(topology);
  const FreeDofMap map = free_dof_index(topology);

  RingSpec ring;
  ring.channels = 5;
  ring.a = 1;
  ring.b = 2;
  ring.ab = 3;
  ring.selection = {{3, -1.0}, {4, +1.0}};
  std::vector<SeedChannel> seeds(4);
  seeds[0].dqdot = u_qdot;
  seeds[1].dq = w_q;
  seeds[1].dqdot = w_qdot;
  seeds[3].dq = g_q;

  const Batch x = input_batch(topology, map, state, seeds, ring.channels);
  const MlpTrace trace = mlp_forward(params_.net, x, params_.config.squareplus_b, ring);
  Batch ybar(1, ring.channels, 1);
  ybar.ch(0)(0, 0) = 1.0;
  MlpGrad grads = zero_grad(params_.net);
  (void)mlp_backward(params_.net, trace, ybar, params_.config.squareplus_b, ring, &grads);

  std::vector<double> flat;
  append_flat(grads, flat);
  return Eigen::Map<const Eigen::VectorXd>(flat.data(), static_cast<Eigen::Index>(flat.size()));
}

std::unique_ptr<DifferentiableFunction> FeedForwardModel::lagrangian_function(
    const Topology& topology) const {
  check_width(topology);
  const Eigen::VectorXd flat = params_.flatten();
  const ClnnConfig config = params_.config;
  auto fn = [flat, config](const auto& x) {
    using S = std::decay_t<decltype(x[0])>;
    std::vector<S> fp(static_cast<std::size_t>(flat.size()));
    for (Eigen::Index i = 0; i < flat.size(); ++i) fp[static_cast<std::size_t>(i)] = S(flat[i]);
    return clnn_eval_generic(config, fp, x);
  };
  return std::make_unique<FunctionAdapter<decltype(fn)>>(std::move(fn));
}

}  // namespace lagdyn
