#include "lagdyn/dynamics.hpp"

#include <cmath>
#include <limits>

namespace lagdyn {

void SymmetricSolver::factor(const Eigen::MatrixXd& m) {
  llt_.compute(m);
  cholesky_ok_ = (llt_.info() == Eigen::Success);
  if (cholesky_ok_) return;
  const double jitter = 1e-10 * m.trace() / static_cast<double>(m.rows());
  Eigen::MatrixXd jittered = m;
  jittered.diagonal().array() += jitter;
  lu_.compute(jittered);
  const double rcond = lu_.isInvertible() ? lu_.rcond() : 0.0;
  if (rcond < 1e-10) {
    // The jitter regularizes a singular matrix into a numerically invertible
    // one; the reciprocal condition exposes that and we refuse the solve.
    const double cond = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
    throw RankDeficiencyError("singular system after jitter fallback", cond);
  }
}

Eigen::VectorXd SymmetricSolver::solve(const Eigen::VectorXd& b) const {
  return cholesky_ok_ ? Eigen::VectorXd(llt_.solve(b)) : Eigen::VectorXd(lu_.solve(b));
}

Eigen::MatrixXd SymmetricSolver::solve(const Eigen::MatrixXd& b) const {
  return cholesky_ok_ ? Eigen::MatrixXd(llt_.solve(b)) : Eigen::MatrixXd(lu_.solve(b));
}

ConstraintSystem constraint_matrix(const Topology& topology, const State& state) {
  const FreeDofMap map = free_dof_index(topology);
  const int d = topology.dim;

  int rows = 0;
  for (const Edge& e : topology.edges)
    if (!topology.fixed[static_cast<std::size_t>(e.i)] ||
        !topology.fixed[static_cast<std::size_t>(e.j)])
      ++rows;

  ConstraintSystem cs;
  cs.jacobian = Eigen::MatrixXd::Zero(rows, map.count);
  cs.accel_bias = Eigen::VectorXd::Zero(rows);
  int r = 0;
  for (const Edge& e : topology.edges) {
    if (topology.fixed[static_cast<std::size_t>(e.i)] &&
        topology.fixed[static_cast<std::size_t>(e.j)])
      continue;  // both ends pinned: length is constant by construction
    const auto diff = state.q.segment(e.i * d, d) - state.q.segment(e.j * d, d);
    if (diff.norm() < 1e-9)
      throw DegenerateConstraintError("coincident edge endpoints in constraint row");
    for (int a = 0; a < d; ++a) {
      const int fi = map.to_free[static_cast<std::size_t>(e.i * d + a)];
      const int fj = map.to_free[static_cast<std::size_t>(e.j * d + a)];
      if (fi >= 0) cs.jacobian(r, fi) = diff[a];
      if (fj >= 0) cs.jacobian(r, fj) = -diff[a];
    }
    cs.accel_bias[r] =
        (state.qdot.segment(e.i * d, d) - state.qdot.segment(e.j * d, d)).squaredNorm();
    ++r;
  }
  return cs;
}

Eigen::VectorXd drag_model(const Topology& topology, const State& state, double drag_coeff) {
  const FreeDofMap map = free_dof_index(topology);
  Eigen::VectorXd force = Eigen::VectorXd::Zero(map.count);
  if (drag_coeff == 0.0) return force;
  const int d = topology.dim;
  for (const Edge& e : topology.edges) {
    const Eigen::VectorXd v_link =
        0.5 * (state.qdot.segment(e.i * d, d) + state.qdot.segment(e.j * d, d));
    for (int a = 0; a < d; ++a) {
      const double half = -0.5 * drag_coeff * v_link[a];
      const int fi = map.to_free[static_cast<std::size_t>(e.i * d + a)];
      const int fj = map.to_free[static_cast<std::size_t>(e.j * d + a)];
      if (fi >= 0) force[fi] += half;
      if (fj >= 0) force[fj] += half;
    }
  }
  return force;
}

DynamicsTerms assemble_terms(const LagrangianModel& model, const Topology& topology,
                             const State& state, double drag_coeff,
                             const Eigen::VectorXd* external_force) {
  const FreeDofMap map = free_dof_index(topology);
  DynamicsTerms terms;
  terms.energy = model.energy_terms(topology, state);
  terms.dissipative = drag_model(topology, state, drag_coeff);
  terms.external = external_force ? *external_force : Eigen::VectorXd::Zero(map.count);
  terms.constraints = constraint_matrix(topology, state);
  terms.qdot = map.gather(state.qdot);
  return terms;
}

namespace {
Eigen::VectorXd generalized_force(const DynamicsTerms& t) {
  // Pi - C qdot + Upsilon + F
  return t.energy.conservative - t.energy.coriolis * t.qdot + t.dissipative + t.external;
}
}  // namespace

namespace {
struct ConstrainedSolution {
  Eigen::VectorXd lambda;
  Eigen::VectorXd qddot;
};

ConstrainedSolution solve_constrained(const DynamicsTerms& terms) {
  SymmetricSolver mass;
  mass.factor(terms.energy.mass);
  const Eigen::VectorXd force = generalized_force(terms);
  const Eigen::VectorXd y = mass.solve(force);

  ConstrainedSolution out;
  const int k = terms.constraints.rows();
  if (k == 0) {
    out.lambda.resize(0);
    out.qddot = y;
    return out;
  }
  const Eigen::MatrixXd z = mass.solve(Eigen::MatrixXd(terms.constraints.jacobian.transpose()));
  Eigen::MatrixXd s = terms.constraints.jacobian * z;
  s = 0.5 * (s + s.transpose()).eval();
  SymmetricSolver schur;
  try {
    schur.factor(s);
  } catch (const RankDeficiencyError& err) {
    throw RankDeficiencyError("redundant constraints: A M^-1 A^T is singular",
                              err.condition_estimate);
  }
  out.lambda = schur.solve(
      Eigen::VectorXd(terms.constraints.accel_bias + terms.constraints.jacobian * y));
  out.qddot = y - z * out.lambda;
  return out;
}
}  // namespace

Eigen::VectorXd solve_lambda(const DynamicsTerms& terms) {
  if (terms.constraints.rows() == 0) return Eigen::VectorXd(0);
  return solve_constrained(terms).lambda;
}

Eigen::VectorXd acceleration(const DynamicsTerms& terms) { return solve_constrained(terms).qddot; }

Eigen::VectorXd acceleration_full(const LagrangianModel& model, const Topology& topology,
                                  const State& state, double drag_coeff,
                                  const Eigen::VectorXd* external_force) {
  const FreeDofMap map = free_dof_index(topology);
  const DynamicsTerms terms = assemble_terms(model, topology, state, drag_coeff, external_force);
  return map.scatter(acceleration(terms), topology.n_coords());
}

}  // namespace lagdyn
