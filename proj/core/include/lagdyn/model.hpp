#pragma once

#include <Eigen/Core>
#include <memory>
#include <string>

#include "lagdyn/autodiff.hpp"
#include "lagdyn/topology.hpp"

namespace lagdyn {

/// Derivatives of a Lagrangian at one state, restricted to free coordinates.
/// `coriolis` rows index velocity slots and columns index position slots,
/// so the Euler-Lagrange velocity term is `coriolis * qdot`.
struct EnergyTerms {
  Eigen::MatrixXd mass;          // d2L/dqdot2
  Eigen::MatrixXd coriolis;      // d2L/dq dqdot
  Eigen::VectorXd conservative;  // dL/dq
};

/// A scalar Lagrangian L(q, qdot) over a topology. Implementations provide
/// their own derivative extraction; `lagrangian_function` exposes the same
/// scalar through the generic autodiff contract for cross-checks and probes.
class LagrangianModel {
 public:
  virtual ~LagrangianModel();

  virtual double lagrangian(const Topology& topology, const State& state) const = 0;
  virtual EnergyTerms energy_terms(const Topology& topology, const State& state) const = 0;

  /// L as a function of the concatenated free coordinates [q_free, qdot_free];
  /// fixed nodes are pinned at the topology reference with zero velocity.
  virtual std::unique_ptr<DifferentiableFunction> lagrangian_function(
      const Topology& topology) const = 0;

  /// True when d2L/dqdot2 does not depend on the state, enabling caching.
  virtual bool constant_mass() const { return false; }

  virtual std::string family() const = 0;

  // Trainable-parameter surface; parameterless models keep the defaults.
  virtual int parameter_count() const { return 0; }
  virtual Eigen::VectorXd parameters() const { return Eigen::VectorXd(); }
  virtual void set_parameters(const Eigen::VectorXd&) {
    throw std::logic_error("model has no trainable parameters");
  }

  /// d/dtheta of -[L]_ab + [L]_gamma with payload channels seeded
  /// (alpha: u on qdot), (beta: w_q on q, w_qdot on qdot), (gamma: g_q on q);
  /// directions are full-coordinate vectors, zero at fixed slots.
  virtual Eigen::VectorXd objective_param_gradient(const Topology&, const State&,
                                                   const Eigen::VectorXd& /*u_qdot*/,
                                                   const Eigen::VectorXd& /*w_q*/,
                                                   const Eigen::VectorXd& /*w_qdot*/,
                                                   const Eigen::VectorXd& /*g_q*/) const {
    throw std::logic_error("model is not trainable");
  }
};

/// Free-coordinate state packed as the input vector of `lagrangian_function`.
Eigen::VectorXd pack_free_state(const Topology& topology, const FreeDofMap& map,
                                const State& state);

/// Reference extraction of (mass, coriolis, conservative) from the generic
/// function contract with nested forward mode, at the packed free state
/// x = [q_free, qdot_free]. Slow; used by probes and as the oracle for
/// model-specific fast paths.
EnergyTerms energy_terms_via_autodiff(const DifferentiableFunction& f, const Eigen::VectorXd& x);

}  // namespace lagdyn
