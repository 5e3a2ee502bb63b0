#include "lagdyn/systems.hpp"

#include <cmath>
#include <iostream>

#include "lagdyn/analytic.hpp"
#include "lagdyn/random.hpp"

namespace lagdyn {

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;

Edge make_edge(int i, int j, double length, double mass = 1.0, double inertia = 1.0 / 12.0,
               int type = 0) {
  Edge e;
  e.i = i;
  e.j = j;
  e.type = type;
  e.length = length;
  e.mass = mass;
  e.inertia = inertia;
  return e;
}

Topology chain_topology(int n_links, const std::vector<double>& lengths,
                        const std::vector<double>& masses, const std::vector<double>& inertias) {
  Topology t;
  t.dim = 2;
  t.gravity = 9.81;
  t.ref_positions.resize(n_links + 1, 2);
  t.fixed.assign(static_cast<std::size_t>(n_links + 1), false);
  t.fixed[0] = true;
  double y = 0.0;
  t.ref_positions(0, 0) = 0.0;
  t.ref_positions(0, 1) = 0.0;
  for (int k = 0; k < n_links; ++k) {
    y -= lengths[static_cast<std::size_t>(k)];
    t.ref_positions(k + 1, 0) = 0.0;
    t.ref_positions(k + 1, 1) = y;
    t.edges.push_back(make_edge(k, k + 1, lengths[static_cast<std::size_t>(k)],
                                masses[static_cast<std::size_t>(k)],
                                inertias[static_cast<std::size_t>(k)]));
  }
  return t;
}

Topology uniform_chain(int n_links) {
  std::vector<double> ones(static_cast<std::size_t>(n_links), 1.0);
  std::vector<double> inertias(static_cast<std::size_t>(n_links), 1.0 / 12.0);
  return chain_topology(n_links, ones, ones, inertias);
}

// Builder state for the rod-and-rope assemblies.
struct Assembly {
  Topology topo;
  int add_node(double x, double y, bool fixed) {
    const int id = topo.n_nodes();
    topo.ref_positions.conservativeResize(id + 1, 2);
    topo.ref_positions(id, 0) = x;
    topo.ref_positions(id, 1) = y;
    topo.fixed.push_back(fixed);
    return id;
  }
  void rod(int i, int j) {
    const double len = (topo.ref_positions.row(i) - topo.ref_positions.row(j)).norm();
    topo.edges.push_back(make_edge(i, j, len));
  }
  // Rope of `segments` rigid links of length 0.5 between existing nodes a and
  // b. When the endpoints are closer than the total rope length the interior
  // nodes zig-zag around the straight line so every segment length is exact.
  void rope(int a, int b, int segments) {
    const Eigen::Vector2d pa = topo.ref_positions.row(a);
    const Eigen::Vector2d pb = topo.ref_positions.row(b);
    const double dist = (pb - pa).norm();
    const double along = dist / segments;
    const double seg = 0.5;
    const double perp_mag = std::sqrt(std::max(0.0, seg * seg - along * along));
    const Eigen::Vector2d dir = (pb - pa) / dist;
    const Eigen::Vector2d perp(-dir.y(), dir.x());
    int prev = a;
    for (int k = 1; k < segments; ++k) {
      const Eigen::Vector2d p =
          pa + dir * (along * k) + perp * ((k % 2 == 1) ? perp_mag : 0.0);
      const int id = add_node(p.x(), p.y(), false);
      topo.edges.push_back(make_edge(prev, id, seg));
      prev = id;
    }
    topo.edges.push_back(make_edge(prev, b, seg));
  }
};

// Suspended bridge: six fixed supports, a straight 0.5-segment rope hanging
// from each, and a deck of five length-2 rods joining the rope ends.
// 41 segments; starts at exact static equilibrium.
Topology build_t1() {
  Assembly a;
  a.topo.dim = 2;
  a.topo.gravity = 9.81;
  std::vector<int> deck;
  for (int k = 0; k < 6; ++k) {
    const int support = a.add_node(2.0 * k, 0.0, true);
    const int bottom = a.add_node(2.0 * k, -3.0, false);
    a.rope(support, bottom, 6);
    deck.push_back(bottom);
  }
  for (int k = 0; k + 1 < 6; ++k) a.rod(deck[static_cast<std::size_t>(k)], deck[static_cast<std::size_t>(k + 1)]);
  return a.topo;
}

// Hanging tower of three X-modules: crossing length-2 rods between levels,
// zig-zag ropes along the sides and across each lower level. 42 segments;
// released slightly off equilibrium.
Topology build_t2() {
  Assembly a;
  a.topo.dim = 2;
  a.topo.gravity = 9.81;
  const double w = 1.2, h = 1.6;
  int ul = a.add_node(0.0, 0.0, true);
  int ur = a.add_node(w, 0.0, true);
  for (int m = 1; m <= 3; ++m) {
    const int ll = a.add_node(0.0, -h * m, false);
    const int lr = a.add_node(w, -h * m, false);
    a.rod(ul, lr);
    a.rod(ur, ll);
    a.rope(ul, ll, 4);
    a.rope(ur, lr, 4);
    a.rope(ll, lr, 4);
    ul = ll;
    ur = lr;
  }
  return a.topo;
}

// Lattice curtain: four fixed supports with straight 8-segment ropes and
// three length-2 rods tying the ropes together at four depths. 44 segments;
// starts at exact static equilibrium.
Topology build_t3() {
  Assembly a;
  a.topo.dim = 2;
  a.topo.gravity = 9.81;
  std::vector<std::vector<int>> columns;
  for (int c = 0; c < 4; ++c) {
    const int support = a.add_node(2.0 * c, 0.0, true);
    std::vector<int> col{support};
    int prev = support;
    for (int j = 1; j <= 8; ++j) {
      const int id = a.add_node(2.0 * c, -0.5 * j, false);
      a.topo.edges.push_back(make_edge(prev, id, 0.5));
      col.push_back(id);
      prev = id;
    }
    columns.push_back(col);
  }
  for (int depth : {2, 4, 6, 8})
    for (int c = 0; c + 1 < 4; ++c)
      a.rod(columns[static_cast<std::size_t>(c)][static_cast<std::size_t>(depth)],
            columns[static_cast<std::size_t>(c + 1)][static_cast<std::size_t>(depth)]);
  return a.topo;
}
}  // namespace

std::vector<std::string> catalog_labels() {
  return {"chain-4", "chain-8", "chain-16", "chain-100", "chain-4-hetero", "chain-4-drag",
          "T1",      "T2",      "T3"};
}

SystemSpec catalog(const std::string& label) {
  SystemSpec spec;
  spec.label = label;
  if (label == "chain-4-hetero") {
    // Four links with distinct lengths, masses and inertias.
    const std::vector<double> lengths{0.81331408, 1.15980562, 0.8647536, 1.17632355};
    const std::vector<double> masses{1.83244264, 1.18182497, 1.30424224, 1.43194502};
    const std::vector<double> inertias{1.21233911, 1.18340451, 1.52475643, 1.29122914};
    spec.topology = chain_topology(4, lengths, masses, inertias);
    return spec;
  }
  if (label == "chain-4-drag") {
    spec.topology = uniform_chain(4);
    spec.drag_coeff = 0.01;
    spec.topology.drag_coeff = 0.01;
    return spec;
  }
  if (label.rfind("chain-", 0) == 0) {
    const int n = std::stoi(label.substr(6));
    if (n < 1) throw std::invalid_argument("catalog: chain size must be >= 1");
    spec.topology = uniform_chain(n);
    return spec;
  }
  if (label == "T1" || label == "T2" || label == "T3") {
    spec.topology = label == "T1" ? build_t1() : (label == "T2" ? build_t2() : build_t3());
    spec.initial_conditions.name = "fixed-structure";
    return spec;
  }
  throw std::invalid_argument("catalog: unknown system label '" + label + "'");
}

State sample_initial_state(const SystemSpec& spec, std::uint64_t seed) {
  State state;
  state.t = 0.0;
  if (spec.initial_conditions.name == "fixed-structure") {
    state.q = spec.topology.reference_q();
    state.qdot = Eigen::VectorXd::Zero(spec.topology.n_coords());
    return state;
  }
  if (spec.initial_conditions.name != "chain-angles")
    throw std::invalid_argument("unknown initial-condition policy: " + spec.initial_conditions.name);
  if (!is_serial_chain(spec.topology))
    throw std::invalid_argument("chain-angles policy requires a serial chain");
  Rng rng(seed);
  const int n = spec.topology.n_edges();
  Eigen::VectorXd phi(n), phidot = Eigen::VectorXd::Zero(n);
  for (int k = 0; k < n; ++k)
    phi[k] = -0.5 * kPi + rng.uniform(-spec.initial_conditions.angle_spread,
                                      spec.initial_conditions.angle_spread);
  state = chain_state_from_angles(spec.topology, phi, phidot);
  project_state(spec.topology, state);
  return state;
}

TrajectoryDataset simulate(const SystemSpec& spec, const LagrangianModel& model,
                           const Eigen::VectorXd& q0, const Eigen::VectorXd& qdot0, double dt,
                           long steps, long record_every, int project_override) {
  if (record_every < 1) throw std::invalid_argument("simulate: record_every must be >= 1");
  {
    const double residual = constraint_residual(spec.topology, q0);
    if (residual > 1e-10)
      throw std::invalid_argument("simulate: initial state violates constraints, residual " +
                                  std::to_string(residual));
  }
  IntegrateOptions opts;
  opts.dt = dt;
  opts.project = project_override >= 0 ? project_override != 0
                                       : (static_cast<double>(steps) * dt >= 0.1);

  TrajectoryDataset ds;
  ds.topology = spec.topology;
  ds.label = spec.label;
  ds.sample_interval = dt * static_cast<double>(record_every);
  ds.source_dt = dt;

  State state{q0, qdot0, 0.0};
  Eigen::VectorXd accel;
  for (long step = 0; step <= steps; ++step) {
    if (!state.q.allFinite() || !state.qdot.allFinite())
      throw DivergenceError("simulation diverged", step - 1);
    const bool record = (step % record_every) == 0;
    if (step == steps) {
      if (record) {
        accel = acceleration_full(model, spec.topology, state, spec.drag_coeff);
        ds.records.push_back({state.t, state.q, state.qdot, accel});
      }
      break;
    }
    State next = verlet_step(model, spec.topology, spec.drag_coeff, state, opts,
                             record ? &accel : nullptr);
    next.t = static_cast<double>(step + 1) * dt;  // avoid accumulated rounding
    if (record) ds.records.push_back({state.t, state.q, state.qdot, accel});
    state = std::move(next);
  }
  return ds;
}

TrajectoryDataset generate_dataset(const SystemSpec& spec, const LagrangianModel& model,
                                   int n_trajectories, int points_total, double dt,
                                   double sample_interval, std::uint64_t seed) {
  if (n_trajectories < 1 || points_total < n_trajectories)
    throw std::invalid_argument("generate_dataset: need at least one point per trajectory");
  const int points_per_traj = points_total / n_trajectories;
  const long record_every = std::lround(sample_interval / dt);
  if (record_every < 1 || std::abs(record_every * dt - sample_interval) > 1e-12 * sample_interval)
    throw std::invalid_argument("generate_dataset: sample_interval must be a multiple of dt");
  const long steps = static_cast<long>(points_per_traj - 1) * record_every;

  TrajectoryDataset ds;
  ds.topology = spec.topology;
  ds.label = spec.label;
  ds.sample_interval = sample_interval;
  ds.source_dt = dt;
  for (int traj = 0; traj < n_trajectories; ++traj) {
    for (int retry = 0;; ++retry) {
      const std::uint64_t traj_seed = derive_seed(seed, static_cast<std::uint64_t>(traj),
                                                  static_cast<std::uint64_t>(retry));
      const State init = sample_initial_state(spec, traj_seed);
      try {
        TrajectoryDataset one =
            simulate(spec, model, init.q, init.qdot, dt, steps, record_every);
        ds.records.insert(ds.records.end(), one.records.begin(), one.records.end());
        break;
      } catch (const DivergenceError& err) {
        std::cerr << "generate_dataset: trajectory " << traj << " diverged at step "
                  << err.last_valid_step << ", resampling (retry " << retry + 1 << ")\n";
        if (retry >= 9) throw;
      }
    }
  }
  return ds;
}

}  // namespace lagdyn
