#include "lagdyn/topology.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"

namespace lagdyn {

void Topology::validate() const {
  if (dim != 2 && dim != 3) throw std::invalid_argument("topology: dim must be 2 or 3");
  const int n = n_nodes();
  if (static_cast<int>(fixed.size()) != n)
    throw std::invalid_argument("topology: fixed flags size mismatch");
  if (drag_coeff < 0.0) throw std::invalid_argument("topology: drag_coeff must be >= 0");
  for (const Edge& e : edges) {
    if (e.i == e.j) throw std::invalid_argument("topology: edge endpoints must be distinct");
    if (e.i < 0 || e.i >= n || e.j < 0 || e.j >= n)
      throw std::invalid_argument("topology: edge references missing node");
    if (!(e.length > 0.0) || !(e.mass > 0.0) || !(e.inertia > 0.0))
      throw std::invalid_argument("topology: length, mass and inertia must be positive");
    if (e.type < 0) throw std::invalid_argument("topology: edge type must be non-negative");
  }
}

Eigen::VectorXd Topology::reference_q() const {
  Eigen::VectorXd q(n_coords());
  for (int u = 0; u < n_nodes(); ++u)
    for (int a = 0; a < dim; ++a) q[u * dim + a] = ref_positions(u, a);
  return q;
}

FreeDofMap free_dof_index(const Topology& topology) {
  FreeDofMap map;
  map.to_free.assign(static_cast<std::size_t>(topology.n_coords()), -1);
  for (int u = 0; u < topology.n_nodes(); ++u) {
    if (topology.fixed[static_cast<std::size_t>(u)]) continue;
    for (int a = 0; a < topology.dim; ++a) {
      const int slot = u * topology.dim + a;
      map.to_free[static_cast<std::size_t>(slot)] = map.count++;
      map.to_full.push_back(slot);
    }
  }
  return map;
}

double constraint_residual(const Topology& topology, const Eigen::VectorXd& q) {
  double worst = 0.0;
  const int d = topology.dim;
  for (const Edge& e : topology.edges) {
    const double len = (q.segment(e.i * d, d) - q.segment(e.j * d, d)).norm();
    worst = std::max(worst, std::abs(len - e.length));
  }
  return worst;
}

namespace {
nlohmann::json topology_json(const Topology& t) {
  nlohmann::json nodes = nlohmann::json::array();
  for (int u = 0; u < t.n_nodes(); ++u) {
    std::vector<double> q0(static_cast<std::size_t>(t.dim));
    for (int a = 0; a < t.dim; ++a) q0[static_cast<std::size_t>(a)] = t.ref_positions(u, a);
    nodes.push_back({{"id", u}, {"q0", q0}, {"fixed", static_cast<bool>(t.fixed[static_cast<std::size_t>(u)])}});
  }
  nlohmann::json edges = nlohmann::json::array();
  for (const Edge& e : t.edges) {
    edges.push_back({{"i", e.i},
                     {"j", e.j},
                     {"type", e.type},
                     {"length", e.length},
                     {"mass", e.mass},
                     {"inertia", e.inertia}});
  }
  return {{"dim", t.dim},
          {"gravity", t.gravity},
          {"nodes", nodes},
          {"edges", edges},
          {"drag_coeff", t.drag_coeff}};
}
}  // namespace

std::string topology_to_json(const Topology& topology) { return topology_json(topology).dump(); }

Topology topology_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  Topology t;
  t.dim = j.at("dim").get<int>();
  t.gravity = j.at("gravity").get<double>();
  t.drag_coeff = j.value("drag_coeff", 0.0);
  const auto& nodes = j.at("nodes");
  t.ref_positions.resize(static_cast<Eigen::Index>(nodes.size()), t.dim);
  t.fixed.assign(nodes.size(), false);
  for (const auto& n : nodes) {
    const int id = n.at("id").get<int>();
    if (id < 0 || id >= static_cast<int>(nodes.size()))
      throw std::invalid_argument("topology json: node ids must be dense 0..n-1");
    const auto q0 = n.at("q0").get<std::vector<double>>();
    if (static_cast<int>(q0.size()) != t.dim)
      throw std::invalid_argument("topology json: q0 length != dim");
    for (int a = 0; a < t.dim; ++a) t.ref_positions(id, a) = q0[static_cast<std::size_t>(a)];
    t.fixed[static_cast<std::size_t>(id)] = n.at("fixed").get<bool>();
  }
  for (const auto& e : j.at("edges")) {
    Edge edge;
    edge.i = e.at("i").get<int>();
    edge.j = e.at("j").get<int>();
    edge.type = e.at("type").get<int>();
    edge.length = e.at("length").get<double>();
    edge.mass = e.at("mass").get<double>();
    edge.inertia = e.at("inertia").get<double>();
    t.edges.push_back(edge);
  }
  t.validate();
  return t;
}

void save_topology(const Topology& topology, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write topology file: " + path);
  out << topology_to_json(topology) << "\n";
}

Topology load_topology(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read topology file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return topology_from_json(text);
}

}  // namespace lagdyn
