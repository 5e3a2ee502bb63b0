#pragma once

#include "lagdyn/dynamics.hpp"

namespace lagdyn {

struct DivergenceError : std::runtime_error {
  DivergenceError(const std::string& msg, long last_valid_step)
      : std::runtime_error(msg), last_valid_step(last_valid_step) {}
  long last_valid_step;
};

struct IntegrateOptions {
  double dt = 1e-5;
  bool project = true;  // manifold projection after each step
  int max_project_iters = 50;
  double project_tol = 1e-12;
};

/// Gauss-Newton projection of free positions onto the link-length manifold,
/// followed by velocity projection onto A(q) qdot = 0.
void project_state(const Topology& topology, State& state, int max_iters = 50,
                   double tol = 1e-12);

/// One velocity-Verlet step of the constrained dynamics. When `accel_out` is
/// non-null it receives the full-coordinate acceleration at the incoming
/// state (the value recorded as a dataset label).
State verlet_step(const LagrangianModel& model, const Topology& topology, double drag_coeff,
                  const State& state, const IntegrateOptions& opts,
                  Eigen::VectorXd* accel_out = nullptr);

}  // namespace lagdyn
