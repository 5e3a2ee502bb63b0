#pragma once

#include <vector>

#include "lagdyn/model.hpp"

namespace lagdyn {

/// Ground-truth Lagrangian of an assembly of rigid uniform-density rods in
/// endpoint coordinates:
///
///   L = sum_e (m/6)(|vi|^2 + vi.vj + |vj|^2)
///       + (I - m l^2/12) |vj - vi|^2 / (2 l^2)
///       - m g (yi + yj)/2
///
/// The first term is the exact kinetic energy of a uniform rod expressed in
/// its endpoint velocities; the second adjusts the rotational part when the
/// edge inertia differs from the uniform value; the last is the gravitational
/// potential of the rod midpoint. The mass matrix is constant and the
/// Coriolis block vanishes, so `energy_terms` is closed-form.
class AnalyticRodModel final : public LagrangianModel {
 public:
  explicit AnalyticRodModel(const Topology& topology);

  double lagrangian(const Topology& topology, const State& state) const override;
  EnergyTerms energy_terms(const Topology& topology, const State& state) const override;
  std::unique_ptr<DifferentiableFunction> lagrangian_function(
      const Topology& topology) const override;
  bool constant_mass() const override { return true; }
  std::string family() const override { return "analytic"; }

  double kinetic_energy(const Topology& topology, const Eigen::VectorXd& qdot) const;
  double potential_energy(const Topology& topology, const Eigen::VectorXd& q) const;

  template <class S>
  S evaluate(const Topology& topology, const std::vector<S>& q, const std::vector<S>& qdot) const;

 private:
  Eigen::MatrixXd mass_free_;          // constant free-coordinate mass matrix
  Eigen::VectorXd conservative_free_;  // constant dL/dq (gravity is linear in q)
  int n_free_ = 0;
};

template <class S>
S AnalyticRodModel::evaluate(const Topology& topology, const std::vector<S>& q,
                             const std::vector<S>& qdot) const {
  const int d = topology.dim;
  S total(0.0);
  for (const Edge& e : topology.edges) {
    S vi2(0.0), vj2(0.0), vij(0.0), rel2(0.0);
    for (int a = 0; a < d; ++a) {
      const S& vi = qdot[static_cast<std::size_t>(e.i * d + a)];
      const S& vj = qdot[static_cast<std::size_t>(e.j * d + a)];
      vi2 += vi * vi;
      vj2 += vj * vj;
      vij += vi * vj;
      const S rel = vj - vi;
      rel2 += rel * rel;
    }
    const double corr = (e.inertia - e.mass * e.length * e.length / 12.0) / (e.length * e.length);
    const S kinetic = (e.mass / 6.0) * (vi2 + vij + vj2) + (0.5 * corr) * rel2;
    const S ymid = (q[static_cast<std::size_t>(e.i * d + 1)] + q[static_cast<std::size_t>(e.j * d + 1)]) * 0.5;
    total += kinetic - e.mass * topology.gravity * ymid;
  }
  return total;
}

/// Serial-chain Lagrangian in generalized link angles: center-of-mass
/// positions accumulated along the chain, T = 1/2 sum(m vcm^2 + I phidot^2),
/// V = sum m g y_cm. Throws `std::invalid_argument` for non-chain topologies.
double chain_lagrangian_generalized(const Topology& topology, const Eigen::VectorXd& phi,
                                    const Eigen::VectorXd& phidot);

/// Map link angles (and rates) to the Cartesian node state of a serial chain.
State chain_state_from_angles(const Topology& topology, const Eigen::VectorXd& phi,
                              const Eigen::VectorXd& phidot);

/// Recover link angles and rates from a Cartesian chain state.
void chain_angles_from_state(const Topology& topology, const State& state, Eigen::VectorXd& phi,
                             Eigen::VectorXd& phidot);

/// Serial-chain check: edges must form the path 0-1-...-n in order.
bool is_serial_chain(const Topology& topology);

}  // namespace lagdyn
