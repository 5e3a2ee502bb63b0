#include "lagdyn/analytic.hpp"

#include <cmath>

namespace lagdyn {

LagrangianModel::~LagrangianModel() = default;
DifferentiableFunction::~DifferentiableFunction() = default;

Eigen::VectorXd pack_free_state(const Topology& topology, const FreeDofMap& map,
                                const State& state) {
  Eigen::VectorXd x(2 * map.count);
  x.head(map.count) = map.gather(state.q);
  x.tail(map.count) = map.gather(state.qdot);
  (void)topology;
  return x;
}

EnergyTerms energy_terms_via_autodiff(const DifferentiableFunction& f, const Eigen::VectorXd& x) {
  const int n_free = static_cast<int>(x.size()) / 2;
  auto call = [&f](const auto& xs) { return f(xs); };
  EnergyTerms t;
  t.conservative = gradient(call, x).head(n_free);
  t.mass = hessian_block(call, x, {n_free, n_free}, {n_free, n_free});
  t.coriolis = hessian_block(call, x, {n_free, n_free}, {0, n_free});
  return t;
}

namespace {
template <class S>
std::vector<S> full_coords(const Topology& topology, const FreeDofMap& map,
                           const std::vector<S>& x, bool velocity_part) {
  std::vector<S> full(static_cast<std::size_t>(topology.n_coords()), S(0.0));
  if (!velocity_part) {
    const Eigen::VectorXd ref = topology.reference_q();
    for (int s = 0; s < topology.n_coords(); ++s) full[static_cast<std::size_t>(s)] = S(ref[s]);
  }
  const int offset = velocity_part ? map.count : 0;
  for (int k = 0; k < map.count; ++k)
    full[static_cast<std::size_t>(map.to_full[static_cast<std::size_t>(k)])] =
        x[static_cast<std::size_t>(offset + k)];
  return full;
}
}  // namespace

AnalyticRodModel::AnalyticRodModel(const Topology& topology) {
  topology.validate();
  const FreeDofMap map = free_dof_index(topology);
  n_free_ = map.count;
  const int d = topology.dim;

  Eigen::MatrixXd mass_full = Eigen::MatrixXd::Zero(topology.n_coords(), topology.n_coords());
  Eigen::VectorXd cons_full = Eigen::VectorXd::Zero(topology.n_coords());
  for (const Edge& e : topology.edges) {
    const double corr =
        (e.inertia - e.mass * e.length * e.length / 12.0) / (e.length * e.length);
    const double diag = e.mass / 3.0 + corr;
    const double cross = e.mass / 6.0 - corr;
    for (int a = 0; a < d; ++a) {
      mass_full(e.i * d + a, e.i * d + a) += diag;
      mass_full(e.j * d + a, e.j * d + a) += diag;
      mass_full(e.i * d + a, e.j * d + a) += cross;
      mass_full(e.j * d + a, e.i * d + a) += cross;
    }
    cons_full[e.i * d + 1] -= 0.5 * e.mass * topology.gravity;
    cons_full[e.j * d + 1] -= 0.5 * e.mass * topology.gravity;
  }

  mass_free_.resize(n_free_, n_free_);
  conservative_free_.resize(n_free_);
  for (int r = 0; r < n_free_; ++r) {
    conservative_free_[r] = cons_full[map.to_full[static_cast<std::size_t>(r)]];
    for (int c = 0; c < n_free_; ++c)
      mass_free_(r, c) = mass_full(map.to_full[static_cast<std::size_t>(r)],
                                   map.to_full[static_cast<std::size_t>(c)]);
  }
}

double AnalyticRodModel::lagrangian(const Topology& topology, const State& state) const {
  std::vector<double> q(state.q.data(), state.q.data() + state.q.size());
  std::vector<double> qd(state.qdot.data(), state.qdot.data() + state.qdot.size());
  return evaluate(topology, q, qd);
}

EnergyTerms AnalyticRodModel::energy_terms(const Topology& topology, const State& state) const {
  (void)topology;
  (void)state;
  EnergyTerms t;
  t.mass = mass_free_;
  t.coriolis = Eigen::MatrixXd::Zero(n_free_, n_free_);
  t.conservative = conservative_free_;
  return t;
}

std::unique_ptr<DifferentiableFunction> AnalyticRodModel::lagrangian_function(
    const Topology& topology) const {
  const FreeDofMap map = free_dof_index(topology);
  auto fn = [this, topology, map](const auto& x) {
    using S = std::decay_t<decltype(x[0])>;
    const std::vector<S> q = full_coords(topology, map, x, false);
    const std::vector<S> qd = full_coords(topology, map, x, true);
    return this->evaluate(topology, q, qd);
  };
  return std::make_unique<FunctionAdapter<decltype(fn)>>(std::move(fn));
}

double AnalyticRodModel::kinetic_energy(const Topology& topology,
                                        const Eigen::VectorXd& qdot) const {
  const int d = topology.dim;
  double total = 0.0;
  for (const Edge& e : topology.edges) {
    const auto vi = qdot.segment(e.i * d, d);
    const auto vj = qdot.segment(e.j * d, d);
    const double corr =
        (e.inertia - e.mass * e.length * e.length / 12.0) / (e.length * e.length);
    total += (e.mass / 6.0) * (vi.squaredNorm() + vi.dot(vj) + vj.squaredNorm()) +
             0.5 * corr * (vj - vi).squaredNorm();
  }
  return total;
}

double AnalyticRodModel::potential_energy(const Topology& topology,
                                          const Eigen::VectorXd& q) const {
  const int d = topology.dim;
  double total = 0.0;
  for (const Edge& e : topology.edges)
    total += e.mass * topology.gravity * 0.5 * (q[e.i * d + 1] + q[e.j * d + 1]);
  return total;
}

bool is_serial_chain(const Topology& topology) {
  if (topology.dim != 2) return false;
  const int n = topology.n_edges();
  if (topology.n_nodes() != n + 1) return false;
  for (int k = 0; k < n; ++k) {
    const Edge& e = topology.edges[static_cast<std::size_t>(k)];
    if (e.i != k || e.j != k + 1) return false;
  }
  return true;
}

double chain_lagrangian_generalized(const Topology& topology, const Eigen::VectorXd& phi,
                                    const Eigen::VectorXd& phidot) {
  if (!is_serial_chain(topology))
    throw std::invalid_argument("generalized Lagrangian is defined for serial chains only");
  const int n = topology.n_edges();
  if (phi.size() != n || phidot.size() != n)
    throw std::invalid_argument("angle vector length must equal link count");

  double x_joint = topology.ref_positions(0, 0);
  double y_joint = topology.ref_positions(0, 1);
  double vx_joint = 0.0, vy_joint = 0.0;
  double kinetic = 0.0, potential = 0.0;
  for (int k = 0; k < n; ++k) {
    const Edge& e = topology.edges[static_cast<std::size_t>(k)];
    const double c = std::cos(phi[k]), s = std::sin(phi[k]);
    const double xcm = x_joint + 0.5 * e.length * c;
    const double ycm = y_joint + 0.5 * e.length * s;
    const double vxcm = vx_joint - 0.5 * e.length * s * phidot[k];
    const double vycm = vy_joint + 0.5 * e.length * c * phidot[k];
    kinetic += 0.5 * (e.mass * (vxcm * vxcm + vycm * vycm) + e.inertia * phidot[k] * phidot[k]);
    potential += e.mass * topology.gravity * ycm;
    x_joint += e.length * c;
    y_joint += e.length * s;
    vx_joint -= e.length * s * phidot[k];
    vy_joint += e.length * c * phidot[k];
  }
  return kinetic - potential;
}

State chain_state_from_angles(const Topology& topology, const Eigen::VectorXd& phi,
                              const Eigen::VectorXd& phidot) {
  if (!is_serial_chain(topology))
    throw std::invalid_argument("chain_state_from_angles requires a serial chain");
  const int n = topology.n_edges();
  State state;
  state.q.resize(topology.n_coords());
  state.qdot = Eigen::VectorXd::Zero(topology.n_coords());
  state.q[0] = topology.ref_positions(0, 0);
  state.q[1] = topology.ref_positions(0, 1);
  for (int k = 0; k < n; ++k) {
    const Edge& e = topology.edges[static_cast<std::size_t>(k)];
    const double c = std::cos(phi[k]), s = std::sin(phi[k]);
    state.q[2 * (k + 1)] = state.q[2 * k] + e.length * c;
    state.q[2 * (k + 1) + 1] = state.q[2 * k + 1] + e.length * s;
    state.qdot[2 * (k + 1)] = state.qdot[2 * k] - e.length * s * phidot[k];
    state.qdot[2 * (k + 1) + 1] = state.qdot[2 * k + 1] + e.length * c * phidot[k];
  }
  return state;
}

void chain_angles_from_state(const Topology& topology, const State& state, Eigen::VectorXd& phi,
                             Eigen::VectorXd& phidot) {
  if (!is_serial_chain(topology))
    throw std::invalid_argument("chain_angles_from_state requires a serial chain");
  const int n = topology.n_edges();
  phi.resize(n);
  phidot.resize(n);
  for (int k = 0; k < n; ++k) {
    const double dx = state.q[2 * (k + 1)] - state.q[2 * k];
    const double dy = state.q[2 * (k + 1) + 1] - state.q[2 * k + 1];
    phi[k] = std::atan2(dy, dx);
    const double dvx = state.qdot[2 * (k + 1)] - state.qdot[2 * k];
    const double dvy = state.qdot[2 * (k + 1) + 1] - state.qdot[2 * k + 1];
    // phidot = (dx * dvy - dy * dvx) / |d|^2
    phidot[k] = (dx * dvy - dy * dvx) / (dx * dx + dy * dy);
  }
}

}  // namespace lagdyn
