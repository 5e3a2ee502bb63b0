#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <optional>
#include <stdexcept>

#include "lagdyn/model.hpp"
#include "lagdyn/topology.hpp"

namespace lagdyn {

struct DegenerateConstraintError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RankDeficiencyError : std::runtime_error {
  RankDeficiencyError(const std::string& msg, double cond)
      : std::runtime_error(msg), condition_estimate(cond) {}
  double condition_estimate;
};

/// Differentiated rigid-link constraints A(q) qdot = 0 on free coordinates:
/// one row per edge with at least one free endpoint, entries (q_i - q_j) at
/// node-i slots and -(q_i - q_j) at node-j slots. `accel_bias` holds
/// Adot(q) qdot, i.e. |qdot_i - qdot_j|^2 per row. Rows are not normalized.
struct ConstraintSystem {
  Eigen::MatrixXd jacobian;    // k x D
  Eigen::VectorXd accel_bias;  // k
  int rows() const { return static_cast<int>(jacobian.rows()); }
};

/// Everything the constrained acceleration solve consumes at one state.
struct DynamicsTerms {
  EnergyTerms energy;            // M, C, Pi on free coordinates
  Eigen::VectorXd dissipative;   // Upsilon
  Eigen::VectorXd external;      // F
  ConstraintSystem constraints;  // A, Adot*qdot
  Eigen::VectorXd qdot;          // free-coordinate velocities the terms were built at
};

/// Symmetric solve with a Cholesky fast path. When the factorization fails
/// (matrix only numerically positive definite, or indefinite during early
/// training) it falls back to LU with diagonal jitter 1e-10 * trace / n.
class SymmetricSolver {
 public:
  void factor(const Eigen::MatrixXd& m);
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const;
  bool used_cholesky() const { return cholesky_ok_; }

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::FullPivLU<Eigen::MatrixXd> lu_;
  bool cholesky_ok_ = false;
};

ConstraintSystem constraint_matrix(const Topology& topology, const State& state);

DynamicsTerms assemble_terms(const LagrangianModel& model, const Topology& topology,
                             const State& state, double drag_coeff,
                             const Eigen::VectorXd* external_force = nullptr);

/// Lagrange multipliers
///   lambda = (A M^-1 A^T)^-1 (Adot qdot + A M^-1 (-C qdot + Pi + Upsilon + F)).
/// Throws RankDeficiencyError when A M^-1 A^T is singular (redundant rows).
Eigen::VectorXd solve_lambda(const DynamicsTerms& terms);

/// Free-coordinate acceleration M^-1 (Pi - C qdot + Upsilon - A^T lambda + F),
/// computed with linear solves only.
Eigen::VectorXd acceleration(const DynamicsTerms& terms);

/// Full-coordinate acceleration with zeros at fixed slots.
Eigen::VectorXd acceleration_full(const LagrangianModel& model, const Topology& topology,
                                  const State& state, double drag_coeff,
                                  const Eigen::VectorXd* external_force = nullptr);

/// Nodal drag forces gathered to free coordinates: each link applies
/// -drag_coeff * (qdot_i + qdot_j)/2, split equally onto its two nodes.
Eigen::VectorXd drag_model(const Topology& topology, const State& state, double drag_coeff);

}  // namespace lagdyn
