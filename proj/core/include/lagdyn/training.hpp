#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lagdyn/dataset.hpp"
#include "lagdyn/dynamics.hpp"

namespace lagdyn {

struct TrainConfig {
  double lr = 1e-3;
  int batch_size = 10;
  int max_epochs = 10000;
  int early_stop_patience = 500;
  double early_stop_min_delta = 1e-8;
  double split = 0.75;  // train fraction
  std::uint64_t seed = 0;
  // adaptive-moment optimizer constants
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

struct TrainReport {
  std::vector<double> train_loss;  // per epoch (mean of batch losses)
  std::vector<double> val_loss;    // per epoch
  int best_epoch = -1;
  double best_val_loss = std::numeric_limits<double>::infinity();
  long skipped_samples = 0;
  double wall_seconds = 0.0;
  double label_std = 0.0;  // pooled standard deviation of acceleration labels
};

/// Central-difference acceleration label from three uniformly spaced samples:
/// (q_next + q_prev - 2 q) / dt^2. Exact for quadratic trajectories.
Eigen::VectorXd verlet_labels(const Eigen::VectorXd& q_prev, const Eigen::VectorXd& q_curr,
                              const Eigen::VectorXd& q_next, double dt);

/// Checked variant: record times must be uniformly spaced to 1e-12 relative.
Eigen::VectorXd verlet_labels(const TrajectoryRecord& prev, const TrajectoryRecord& curr,
                              const TrajectoryRecord& next);

/// Mean over samples of |qddot_pred - qddot_label|^2 / n_nodes, the fixed
/// normalization of the squared-error objective. Samples whose constrained
/// solve fails are skipped and counted.
double loss(const LagrangianModel& model, const Topology& topology,
            const std::vector<const TrajectoryRecord*>& batch, double drag_coeff,
            long* skipped = nullptr);

/// Per-sample objective gradient through the full pipeline: closed-form
/// adjoints of the constrained solve (solve adjoints use the inverse-identity
/// rule) contracted against third-order network derivatives via the payload
/// ring. Returns parameter-space gradient and the per-sample loss.
struct SampleGradient {
  double loss = 0.0;
  Eigen::VectorXd grad;
  bool failed = false;
};
SampleGradient loss_sample_gradient(const LagrangianModel& model, const Topology& topology,
                                    const State& state, const Eigen::VectorXd& label_full,
                                    double drag_coeff);

/// Random 75:25 split, mini-batches with replacement, adaptive-moment
/// updates, early stopping on validation loss; the model is left at the
/// best-validation parameters. Deterministic under (dataset, config, seed).
TrainReport train(LagrangianModel& model, const TrajectoryDataset& dataset,
                  const TrainConfig& config);

/// Deterministic index partition used by train(): sizes floor(split*N) and
/// the remainder.
void split_indices(int n, double split, std::uint64_t seed, std::vector<int>& train_idx,
                   std::vector<int>& val_idx);

void save_report_json(const TrainReport& report, const std::string& path);
void save_loss_csv(const TrainReport& report, const std::string& path);

}  // namespace lagdyn
