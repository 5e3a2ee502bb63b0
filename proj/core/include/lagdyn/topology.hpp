#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>
#include <vector>

namespace lagdyn {

/// Rigid link between two joints.
struct Edge {
  int i = 0;
  int j = 0;
  int type = 0;
  double length = 1.0;
  double mass = 1.0;
  double inertia = 1.0 / 12.0;
};

/// Joints-and-links description of an articulated body. Nodes are joints,
/// edges are rigid segments; fixed nodes are supports pinned at their
/// reference positions. Coordinates are node-major: slot = node * dim + axis.
struct Topology {
  int dim = 2;
  double gravity = 9.81;  // acts along -y
  Eigen::MatrixXd ref_positions;  // n_nodes x dim
  std::vector<bool> fixed;
  std::vector<Edge> edges;
  double drag_coeff = 0.0;

  int n_nodes() const { return static_cast<int>(ref_positions.rows()); }
  int n_coords() const { return n_nodes() * dim; }
  int n_edges() const { return static_cast<int>(edges.size()); }

  void validate() const;

  /// Reference configuration as a flat coordinate vector.
  Eigen::VectorXd reference_q() const;
};

struct State {
  Eigen::VectorXd q;
  Eigen::VectorXd qdot;
  double t = 0.0;
};

/// Bijection between free node coordinates and a dense index range;
/// fixed-node coordinates are excluded from every solve.
struct FreeDofMap {
  std::vector<int> to_free;  // full slot -> free slot, -1 for fixed
  std::vector<int> to_full;  // free slot -> full slot
  int count = 0;

  Eigen::VectorXd gather(const Eigen::VectorXd& full) const {
    Eigen::VectorXd out(count);
    for (int k = 0; k < count; ++k) out[k] = full[to_full[static_cast<std::size_t>(k)]];
    return out;
  }
  Eigen::VectorXd scatter(const Eigen::VectorXd& free, Eigen::Index full_size) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(full_size);
    for (int k = 0; k < count; ++k) out[to_full[static_cast<std::size_t>(k)]] = free[k];
    return out;
  }
};

FreeDofMap free_dof_index(const Topology& topology);

/// Largest rigid-link length violation max_e | ||q_i - q_j|| - l_e |.
double constraint_residual(const Topology& topology, const Eigen::VectorXd& q);

std::string topology_to_json(const Topology& topology);
Topology topology_from_json(const std::string& text);
void save_topology(const Topology& topology, const std::string& path);
Topology load_topology(const std::string& path);

}  // namespace lagdyn
