#include "lagdyn/integrate.hpp"

#include <cmath>

namespace lagdyn {

namespace {
// Length residuals and their Jacobian rows (unit directions) over free slots.
// Rows skip edges whose endpoints are both fixed.
void length_residuals(const Topology& topology, const FreeDofMap& map, const Eigen::VectorXd& q,
                      Eigen::VectorXd& r, Eigen::MatrixXd& jac) {
  const int d = topology.dim;
  int rows = 0;
  for (const Edge& e : topology.edges)
    if (!topology.fixed[static_cast<std::size_t>(e.i)] ||
        !topology.fixed[static_cast<std::size_t>(e.j)])
      ++rows;
  r.resize(rows);
  jac = Eigen::MatrixXd::Zero(rows, map.count);
  int row = 0;
  for (const Edge& e : topology.edges) {
    if (topology.fixed[static_cast<std::size_t>(e.i)] &&
        topology.fixed[static_cast<std::size_t>(e.j)])
      continue;
    const Eigen::VectorXd diff = q.segment(e.i * d, d) - q.segment(e.j * d, d);
    const double len = diff.norm();
    r[row] = len - e.length;
    for (int a = 0; a < d; ++a) {
      const double u = diff[a] / len;
      const int fi = map.to_free[static_cast<std::size_t>(e.i * d + a)];
      const int fj = map.to_free[static_cast<std::size_t>(e.j * d + a)];
      if (fi >= 0) jac(row, fi) = u;
      if (fj >= 0) jac(row, fj) = -u;
    }
    ++row;
  }
}
}  // namespace

void project_state(const Topology& topology, State& state, int max_iters, double tol) {
  const FreeDofMap map = free_dof_index(topology);
  if (map.count == 0 || topology.edges.empty()) return;

  Eigen::VectorXd r;
  Eigen::MatrixXd jac;
  for (int iter = 0; iter < max_iters; ++iter) {
    length_residuals(topology, map, state.q, r, jac);
    if (r.size() == 0 || r.cwiseAbs().maxCoeff() <= tol) break;
    SymmetricSolver gram;
    gram.factor(jac * jac.transpose());
    const Eigen::VectorXd step = jac.transpose() * gram.solve(r);
    for (int k = 0; k < map.count; ++k)
      state.q[map.to_full[static_cast<std::size_t>(k)]] -= step[k];
  }

  const ConstraintSystem cs = constraint_matrix(topology, state);
  if (cs.rows() == 0) return;
  Eigen::VectorXd qdot_free = map.gather(state.qdot);
  SymmetricSolver gram;
  gram.factor(cs.jacobian * cs.jacobian.transpose());
  qdot_free -= cs.jacobian.transpose() * gram.solve(Eigen::VectorXd(cs.jacobian * qdot_free));
  for (int k = 0; k < map.count; ++k)
    state.qdot[map.to_full[static_cast<std::size_t>(k)]] = qdot_free[k];
}

State verlet_step(const LagrangianModel& model, const Topology& topology, double drag_coeff,
                  const State& state, const IntegrateOptions& opts, Eigen::VectorXd* accel_out) {
  const Eigen::VectorXd a0 = acceleration_full(model, topology, state, drag_coeff);
  if (accel_out) *accel_out = a0;

  State next;
  next.t = state.t + opts.dt;
  const Eigen::VectorXd v_half = state.qdot + 0.5 * opts.dt * a0;
  next.q = state.q + opts.dt * v_half;
  next.qdot = v_half;

  const Eigen::VectorXd a1 = acceleration_full(model, topology, next, drag_coeff);
  next.qdot = v_half + 0.5 * opts.dt * a1;

  if (opts.project) project_state(topology, next, opts.max_project_iters, opts.project_tol);
  return next;
}

}  // namespace lagdyn
