#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "lagdyn/dataset.hpp"
#include "lagdyn/dynamics.hpp"
#include "test_util.hpp"

using namespace lagdyn;

namespace {
std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

double total_energy(const AnalyticRodModel& model, const Topology& topo, const State& s) {
  return model.kinetic_energy(topo, s.qdot) + model.potential_energy(topo, s.q);
}
}  // namespace

TEST_CASE("rigidly translating rod has kinetic energy m v^2 / 2") {
  const auto spec = catalog("chain-1");
  const AnalyticRodModel model(spec.topology);
  Eigen::VectorXd qdot(4);
  qdot << 0.7, -0.2, 0.7, -0.2;
  const double v2 = 0.7 * 0.7 + 0.2 * 0.2;
  CHECK(testutil::rel_err(model.kinetic_energy(spec.topology, qdot), 0.5 * 1.0 * v2) < 1e-14);
}

TEST_CASE("rod at rest contributes only -m g y_mid") {
  const auto spec = catalog("chain-1");
  const AnalyticRodModel model(spec.topology);
  State s;
  s.q = spec.topology.reference_q();
  s.qdot = Eigen::VectorXd::Zero(4);
  const double y_mid = 0.5 * (s.q[1] + s.q[3]);
  CHECK(testutil::rel_err(model.lagrangian(spec.topology, s),
                          -1.0 * spec.topology.gravity * y_mid) < 1e-14);
}

TEST_CASE("generalized single-link values") {
  const auto spec = catalog("chain-1");
  // At phi = 0 at rest, with the pivot at the origin, L = 0.
  CHECK(std::abs(chain_lagrangian_generalized(spec.topology, Eigen::VectorXd::Zero(1),
                                              Eigen::VectorXd::Zero(1))) < 1e-14);
  // Rotating about the pivot: T = (1/2)(m l^2/4 + I) w^2 = (1/6) m l^2 w^2.
  const double w = 1.3;
  const double got = chain_lagrangian_generalized(spec.topology, Eigen::VectorXd::Zero(1),
                                                  Eigen::VectorXd::Constant(1, w));
  CHECK(testutil::rel_err(got, (1.0 / 6.0) * w * w) < 1e-14);
}

TEST_CASE("generalized Lagrangian rejects non-chain topologies") {
  const auto spec = catalog("T1");
  CHECK_THROWS_AS((void)chain_lagrangian_generalized(spec.topology, Eigen::VectorXd::Zero(3),
                                                     Eigen::VectorXd::Zero(3)),
                  std::invalid_argument);
}

TEST_CASE("cartesian and generalized Lagrangians agree on chains") {
  for (int n : {1, 2, 4, 8}) {
    const auto spec = catalog("chain-" + std::to_string(n));
    const AnalyticRodModel model(spec.topology);
    Rng rng(1000 + static_cast<std::uint64_t>(n));
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
      Eigen::VectorXd phi(n), phidot(n);
      for (int k = 0; k < n; ++k) {
        phi[k] = rng.uniform(-3.1, 3.1);
        phidot[k] = rng.uniform(-2.0, 2.0);
      }
      const State s = chain_state_from_angles(spec.topology, phi, phidot);
      const double cart = model.lagrangian(spec.topology, s);
      const double gen = chain_lagrangian_generalized(spec.topology, phi, phidot);
      worst = std::max(worst, std::abs(cart - gen));
    }
    CHECK(worst < 1e-9);
  }
}

TEST_CASE("drag force: zero velocity, single-link split, dissipativity") {
  const auto spec = catalog("chain-4");
  State rest;
  rest.q = spec.topology.reference_q();
  rest.qdot = Eigen::VectorXd::Zero(spec.topology.n_coords());
  CHECK(drag_model(spec.topology, rest, 0.01).norm() == 0.0);

  // Isolated link, both nodes moving at v: each free node receives -c v / 2.
  Topology link;
  link.dim = 2;
  link.ref_positions.resize(2, 2);
  link.ref_positions << 0.0, 0.0, 1.0, 0.0;
  link.fixed = {false, false};
  link.edges = {Edge{0, 1, 0, 1.0, 1.0, 1.0 / 12.0}};
  State moving;
  moving.q = link.reference_q();
  moving.qdot.resize(4);
  moving.qdot << 0.4, -0.3, 0.4, -0.3;
  const double c = 0.05;
  const Eigen::VectorXd force = drag_model(link, moving, c);
  CHECK(testutil::rel_err(force[0], -c * 0.4 / 2.0) < 1e-14);
  CHECK(testutil::rel_err(force[1], c * 0.3 / 2.0) < 1e-14);
  // total over the link: -c v
  CHECK(testutil::rel_err(force[0] + force[2], -c * 0.4) < 1e-14);

  const FreeDofMap map = free_dof_index(spec.topology);
  for (int trial = 0; trial < 100; ++trial) {
    const State s = testutil::random_chain_state(spec.topology, 40 + trial);
    const Eigen::VectorXd ups = drag_model(spec.topology, s, 0.01);
    CHECK(ups.dot(map.gather(s.qdot)) <= 1e-15);
  }
}

TEST_CASE("catalog: chain-4 structure") {
  const auto spec = catalog("chain-4");
  CHECK(spec.topology.n_nodes() == 5);
  CHECK(spec.topology.n_edges() == 4);
  CHECK(spec.topology.fixed[0]);
  CHECK_FALSE(spec.topology.fixed[4]);
  CHECK(spec.drag_coeff == 0.0);
  for (const Edge& e : spec.topology.edges) {
    CHECK(e.length == 1.0);
    CHECK(e.mass == 1.0);
    CHECK(e.inertia == doctest::Approx(1.0 / 12.0).epsilon(1e-15));
  }
}

TEST_CASE("catalog: heterogeneous link values") {
  const auto spec = catalog("chain-4-hetero");
  const std::vector<double> lengths{0.81331408, 1.15980562, 0.8647536, 1.17632355};
  const std::vector<double> masses{1.83244264, 1.18182497, 1.30424224, 1.43194502};
  const std::vector<double> inertias{1.21233911, 1.18340451, 1.52475643, 1.29122914};
  for (int k = 0; k < 4; ++k) {
    CHECK(spec.topology.edges[static_cast<std::size_t>(k)].length == lengths[static_cast<std::size_t>(k)]);
    CHECK(spec.topology.edges[static_cast<std::size_t>(k)].mass == masses[static_cast<std::size_t>(k)]);
    CHECK(spec.topology.edges[static_cast<std::size_t>(k)].inertia == inertias[static_cast<std::size_t>(k)]);
  }
}

TEST_CASE("catalog: drag variant and unknown labels") {
  CHECK(catalog("chain-4-drag").drag_coeff == 0.01);
  CHECK_THROWS_AS((void)catalog("pendulum-9000"), std::invalid_argument);
}

TEST_CASE("catalog: rod-and-rope assemblies are consistent and solvable") {
  for (const std::string label : {"T1", "T2", "T3"}) {
    CAPTURE(label);
    const auto spec = catalog(label);
    spec.topology.validate();
    CHECK(spec.topology.n_edges() > 40);
    CHECK(constraint_residual(spec.topology, spec.topology.reference_q()) < 1e-10);
    CHECK(spec.initial_conditions.name == "fixed-structure");

    const AnalyticRodModel model(spec.topology);
    const State s0 = sample_initial_state(spec, 0);
    const Eigen::VectorXd a = acceleration_full(model, spec.topology, s0, spec.drag_coeff);
    CHECK(a.allFinite());
  }
  // T1 and T3 start at exact static equilibrium.
  for (const std::string label : {"T1", "T3"}) {
    const auto spec = catalog(label);
    const AnalyticRodModel model(spec.topology);
    const State s0 = sample_initial_state(spec, 0);
    CHECK(acceleration_full(model, spec.topology, s0, 0.0).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("sampled chain initial conditions satisfy constraints with zero velocity") {
  const auto spec = catalog("chain-8");
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    const State s = sample_initial_state(spec, seed);
    CHECK(constraint_residual(spec.topology, s.q) < 1e-12);
    CHECK(s.qdot.norm() == 0.0);
  }
}

TEST_CASE("simulate: zero gravity and zero velocity stays put") {
  auto spec = catalog("chain-2");
  spec.topology.gravity = 0.0;
  const AnalyticRodModel model(spec.topology);
  const Eigen::VectorXd q0 = spec.topology.reference_q();
  const Eigen::VectorXd v0 = Eigen::VectorXd::Zero(spec.topology.n_coords());
  const TrajectoryDataset ds = simulate(spec, model, q0, v0, 1e-4, 500, 100);
  for (const auto& r : ds.records) {
    CHECK((r.q - q0).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(r.qdot.cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("simulate: hanging equilibrium persists") {
  const auto spec = catalog("chain-4");
  const AnalyticRodModel model(spec.topology);
  const Eigen::VectorXd q0 = spec.topology.reference_q();
  const Eigen::VectorXd v0 = Eigen::VectorXd::Zero(spec.topology.n_coords());
  const TrajectoryDataset ds = simulate(spec, model, q0, v0, 1e-5, 10000, 1000);
  for (const auto& r : ds.records) CHECK((r.q - q0).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("simulate: short gravity-only run conserves energy and length") {
  const auto spec = catalog("chain-4");
  const AnalyticRodModel model(spec.topology);
  const State init = sample_initial_state(spec, 7);
  const TrajectoryDataset ds = simulate(spec, model, init.q, init.qdot, 1e-5, 20000, 200);
  const double e0 = total_energy(model, spec.topology, {ds.records[0].q, ds.records[0].qdot, 0.0});
  const double scale = std::abs(e0) > 1.0 ? std::abs(e0) : 1.0;
  for (const auto& r : ds.records) {
    CHECK(std::abs(total_energy(model, spec.topology, {r.q, r.qdot, r.t}) - e0) / scale < 1e-4);
    CHECK(constraint_residual(spec.topology, r.q) < 1e-6);
  }
}

TEST_CASE("simulate: drag makes total energy non-increasing") {
  const auto spec = catalog("chain-4-drag");
  const AnalyticRodModel model(spec.topology);
  const State init = sample_initial_state(spec, 13);
  const TrajectoryDataset ds = simulate(spec, model, init.q, init.qdot, 1e-5, 20000, 500);
  for (std::size_t k = 1; k < ds.records.size(); ++k) {
    const double before = total_energy(
        model, spec.topology, {ds.records[k - 1].q, ds.records[k - 1].qdot, 0.0});
    const double after =
        total_energy(model, spec.topology, {ds.records[k].q, ds.records[k].qdot, 0.0});
    CHECK(after <= before + 1e-6);
  }
}

TEST_CASE("simulate: rejects initial states off the constraint manifold") {
  const auto spec = catalog("chain-2");
  const AnalyticRodModel model(spec.topology);
  Eigen::VectorXd q0 = spec.topology.reference_q();
  q0[5] += 1e-3;
  CHECK_THROWS_AS((void)simulate(spec, model, q0, Eigen::VectorXd::Zero(6), 1e-4, 10, 1),
                  std::invalid_argument);
}

TEST_CASE("simulate: recorded labels equal the solver acceleration at the record instant") {
  const auto spec = catalog("chain-2");
  const AnalyticRodModel model(spec.topology);
  const State init = sample_initial_state(spec, 3);
  const TrajectoryDataset ds = simulate(spec, model, init.q, init.qdot, 1e-4, 50, 10);
  for (const auto& r : ds.records) {
    const Eigen::VectorXd a =
        acceleration_full(model, spec.topology, {r.q, r.qdot, r.t}, spec.drag_coeff);
    CHECK((a - r.qddot).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("generate_dataset: record counts") {
  const auto spec = catalog("chain-2");
  const AnalyticRodModel model(spec.topology);
  const TrajectoryDataset one = generate_dataset(spec, model, 1, 10, 1e-4, 1e-3, 5);
  CHECK(one.records.size() == 10);
  const TrajectoryDataset many = generate_dataset(spec, model, 5, 50, 1e-4, 1e-3, 5);
  CHECK(many.records.size() == 50);
}

TEST_CASE("generate_dataset: same seed gives byte-identical files") {
  const auto spec = catalog("chain-2");
  const AnalyticRodModel model(spec.topology);
  const std::string pa = "/tmp/lagdyn_ds_a.jsonl", pb = "/tmp/lagdyn_ds_b.jsonl";
  save_dataset(generate_dataset(spec, model, 3, 30, 1e-4, 1e-3, 42), pa);
  save_dataset(generate_dataset(spec, model, 3, 30, 1e-4, 1e-3, 42), pb);
  CHECK(slurp(pa) == slurp(pb));
  std::remove(pa.c_str());
  std::remove(pb.c_str());
}

TEST_CASE("dataset save/load round trip preserves values exactly") {
  const auto spec = catalog("chain-2");
  const AnalyticRodModel model(spec.topology);
  const TrajectoryDataset ds = generate_dataset(spec, model, 2, 10, 1e-4, 1e-3, 9);
  const std::string path = "/tmp/lagdyn_ds_rt.jsonl";
  save_dataset(ds, path);
  const TrajectoryDataset back = load_dataset(path);
  REQUIRE(back.records.size() == ds.records.size());
  CHECK(back.sample_interval == ds.sample_interval);
  CHECK(back.source_dt == ds.source_dt);
  CHECK(back.label == ds.label);
  for (std::size_t k = 0; k < ds.records.size(); ++k) {
    CHECK(back.records[k].t == ds.records[k].t);
    CHECK((back.records[k].q - ds.records[k].q).norm() == 0.0);
    CHECK((back.records[k].qdot - ds.records[k].qdot).norm() == 0.0);
    CHECK((back.records[k].qddot - ds.records[k].qddot).norm() == 0.0);
  }
  std::remove(path.c_str());
}

TEST_CASE("topology json round trip") {
  for (const std::string label : {"chain-4-hetero", "T2"}) {
    const Topology t = catalog(label).topology;
    const Topology back = topology_from_json(topology_to_json(t));
    CHECK(back.dim == t.dim);
    CHECK(back.gravity == t.gravity);
    CHECK((back.ref_positions - t.ref_positions).norm() == 0.0);
    REQUIRE(back.edges.size() == t.edges.size());
    for (std::size_t k = 0; k < t.edges.size(); ++k) {
      CHECK(back.edges[k].i == t.edges[k].i);
      CHECK(back.edges[k].j == t.edges[k].j);
      CHECK(back.edges[k].length == t.edges[k].length);
      CHECK(back.edges[k].mass == t.edges[k].mass);
      CHECK(back.edges[k].inertia == t.edges[k].inertia);
    }
  }
}
