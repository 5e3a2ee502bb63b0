#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lagdyn/dataset.hpp"
#include "lagdyn/integrate.hpp"
#include "lagdyn/model.hpp"

namespace lagdyn {

/// How a system samples rollout / dataset initial conditions.
///  - "chain-angles": each link angle uniform in +-spread around hanging,
///    zero velocity, then projected onto the constraint manifold.
///  - "fixed-structure": the reference configuration at rest.
struct InitialConditionPolicy {
  std::string name = "chain-angles";
  double angle_spread = 1.0471975511965976;  // pi/3
};

struct SystemSpec {
  Topology topology;
  double drag_coeff = 0.0;
  InitialConditionPolicy initial_conditions;
  std::string label;
};

/// Named systems: chain-<n> (unit links, node 0 fixed), chain-4-hetero,
/// chain-4-drag, and the rod-and-rope assemblies T1-T3.
SystemSpec catalog(const std::string& label);
std::vector<std::string> catalog_labels();

State sample_initial_state(const SystemSpec& spec, std::uint64_t seed);

/// Velocity-Verlet run recording every `record_every` steps, acceleration
/// labels taken from the solver at the recorded instants. Projection is on
/// when the horizon steps*dt reaches 0.1 s unless overridden.
TrajectoryDataset simulate(const SystemSpec& spec, const LagrangianModel& model,
                           const Eigen::VectorXd& q0, const Eigen::VectorXd& qdot0, double dt,
                           long steps, long record_every, int project_override = -1);

/// n short simulations from sampled initial conditions; divergent draws are
/// resampled (at most 10 retries each). Deterministic under `seed`.
TrajectoryDataset generate_dataset(const SystemSpec& spec, const LagrangianModel& model,
                                   int n_trajectories = 100, int points_total = 10000,
                                   double dt = 1e-5, double sample_interval = 1e-3,
                                   std::uint64_t seed = 0);

}  // namespace lagdyn
