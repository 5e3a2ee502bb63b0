#pragma once

#include <string>
#include <vector>

#include "lagdyn/analytic.hpp"
#include "lagdyn/systems.hpp"

namespace lagdyn {

/// Velocity-Verlet rollout of a (learned or analytic) model at the inference
/// timestep, manifold projection on. A non-finite state truncates the
/// trajectory and records the step index.
struct Rollout {
  std::vector<TrajectoryRecord> records;  // qddot left empty
  long diverged_step = -1;
  bool diverged() const { return diverged_step >= 0; }
};

Rollout rollout(const LagrangianModel& model, const Topology& topology, double drag_coeff,
                const Eigen::VectorXd& q0, const Eigen::VectorXd& qdot0, double horizon = 1.0,
                double dt = 1e-3);

/// RE(t) = |qhat - q| / (|qhat| + |q|), 0/0 = 0. Bounded by 1.
double rollout_error(const Eigen::VectorXd& predicted, const Eigen::VectorXd& truth);

/// The same normalized discrepancy for scalar total energies.
double energy_error(double predicted_energy, double truth_energy);

/// sqrt(RE * EE) per step, then time-averaged; zeros floored at 1e-15.
double geometric_mean_error(const std::vector<double>& rollout_errors,
                            const std::vector<double>& energy_errors);

struct SeedMetrics {
  std::uint64_t seed = 0;
  std::vector<double> t;
  std::vector<double> re;
  std::vector<double> ee;
  bool diverged = false;
  double combined = 0.0;  // time-averaged sqrt(RE*EE)
};

struct SystemSummary {
  std::string system;
  double geomean_re = 0.0;
  double geomean_ee = 0.0;
  double geomean_combined = 0.0;
  int n_diverged = 0;
};

struct SystemEval {
  std::string system;
  std::vector<SeedMetrics> seeds;
  SystemSummary summary;
};

struct EvalOptions {
  double horizon = 1.0;
  double dt = 1e-3;      // inference timestep
  double gt_dt = 1e-5;   // ground-truth integration timestep
  int n_seeds = 100;     // ignored for fixed-structure systems (single run)
  std::uint64_t seed = 0;
  int threads = 0;       // 0 = hardware concurrency
};

/// Rollouts from seeded initial conditions (or the fixed reference structure)
/// against analytic ground truth, with per-step and aggregate metrics.
/// Divergent rollouts are truncated and counted, never dropped.
SystemEval evaluate_system(const LagrangianModel& model, const SystemSpec& spec,
                           const EvalOptions& options);

std::vector<SystemEval> zero_shot_eval(const LagrangianModel& model,
                                       const std::vector<SystemSpec>& systems,
                                       const EvalOptions& options);

void write_metrics_csv(const std::vector<SystemEval>& evals, const std::string& path);
void write_summary_csv(const std::vector<SystemEval>& evals, const std::string& path);
std::vector<SystemSummary> read_summary_csv(const std::string& path);

/// Mass matrix extracted through the generic second-derivative contract at
/// one state, with structure diagnostics.
struct MassMatrixReport {
  Eigen::MatrixXd matrix;                    // free x free
  double symmetry_residual = 0.0;            // max |M - M^T|
  std::vector<double> max_by_distance;       // max |M_ab| per node graph distance
  Eigen::MatrixXi mask;                      // |M_ab| > 1% of max diagonal entry
};

MassMatrixReport mass_matrix_probe(const LagrangianModel& model, const Topology& topology,
                                   const State& state);

void write_matrix_csv(const Eigen::MatrixXd& m, const std::string& path);
void write_mask_csv(const Eigen::MatrixXi& m, const std::string& path);

}  // namespace lagdyn
