#include "lagdyn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>

#include "json.hpp"
#include "lagdyn/random.hpp"

namespace lagdyn {

void TrainConfig::validate() const {
  if (!(split > 0.0 && split < 1.0)) throw std::invalid_argument("train: 0 < split < 1 required");
  if (batch_size < 1 || max_epochs < 0 || early_stop_patience < 1)
    throw std::invalid_argument("train: counts must be >= 1");
  if (!(lr > 0.0)) throw std::invalid_argument("train: learning rate must be positive");
}

Eigen::VectorXd verlet_labels(const Eigen::VectorXd& q_prev, const Eigen::VectorXd& q_curr,
                              const Eigen::VectorXd& q_next, double dt) {
  return (q_next + q_prev - 2.0 * q_curr) / (dt * dt);
}

Eigen::VectorXd verlet_labels(const TrajectoryRecord& prev, const TrajectoryRecord& curr,
                              const TrajectoryRecord& next) {
  const double d1 = curr.t - prev.t;
  const double d2 = next.t - curr.t;
  if (std::abs(d1 - d2) > 1e-12 * std::max(std::abs(d1), std::abs(d2)))
    throw std::invalid_argument("verlet_labels: samples are not uniformly spaced");
  return verlet_labels(prev.q, curr.q, next.q, d1);
}

namespace {
struct ForwardSolve {
  Eigen::VectorXd qddot;  // free coordinates
  Eigen::VectorXd f;      // Pi - C qdot + Upsilon + F
  Eigen::VectorXd lambda;
  SymmetricSolver mass;
  SymmetricSolver schur;
  Eigen::MatrixXd z;  // M^-1 A^T
  ConstraintSystem constraints;
};

ForwardSolve forward_solve(const LagrangianModel& model, const Topology& topology,
                           const State& state, double drag_coeff) {
  const DynamicsTerms terms = assemble_terms(model, topology, state, drag_coeff);
  ForwardSolve out;
  out.constraints = terms.constraints;
  out.f = terms.energy.conservative - terms.energy.coriolis * terms.qdot + terms.dissipative +
          terms.external;
  out.mass.factor(terms.energy.mass);
  const Eigen::VectorXd y = out.mass.solve(out.f);
  const int k = terms.constraints.rows();
  if (k == 0) {
    out.qddot = y;
    return out;
  }
  out.z = out.mass.solve(Eigen::MatrixXd(terms.constraints.jacobian.transpose()));
  Eigen::MatrixXd s = terms.constraints.jacobian * out.z;
  s = 0.5 * (s + s.transpose()).eval();
  out.schur.factor(s);
  out.lambda = out.schur.solve(
      Eigen::VectorXd(terms.constraints.accel_bias + terms.constraints.jacobian * y));
  out.qddot = y - out.z * out.lambda;
  return out;
}
}  // namespace

double loss(const LagrangianModel& model, const Topology& topology,
            const std::vector<const TrajectoryRecord*>& batch, double drag_coeff, long* skipped) {
  if (batch.empty()) throw std::invalid_argument("loss: batch must be non-empty");
  const FreeDofMap map = free_dof_index(topology);
  const double n_units = static_cast<double>(topology.n_nodes());
  double total = 0.0;
  long used = 0;
  for (const TrajectoryRecord* rec : batch) {
    try {
      const ForwardSolve fs =
          forward_solve(model, topology, {rec->q, rec->qdot, rec->t}, drag_coeff);
      const Eigen::VectorXd resid = fs.qddot - map.gather(rec->qddot);
      if (!resid.allFinite()) throw std::runtime_error("non-finite residual");
      total += resid.squaredNorm() / n_units;
      ++used;
    } catch (const std::exception&) {
      if (skipped) ++(*skipped);
    }
  }
  if (used == 0) return std::numeric_limits<double>::infinity();
  return total / static_cast<double>(used);
}

SampleGradient loss_sample_gradient(const LagrangianModel& model, const Topology& topology,
                                    const State& state, const Eigen::VectorXd& label_full,
                                    double drag_coeff) {
  SampleGradient out;
  const FreeDofMap map = free_dof_index(topology);
  const double n_units = static_cast<double>(topology.n_nodes());
  ForwardSolve fs;
  try {
    fs = forward_solve(model, topology, state, drag_coeff);
  } catch (const std::exception&) {
    out.failed = true;
    return out;
  }
  const Eigen::VectorXd label = map.gather(label_full);
  const Eigen::VectorXd resid = fs.qddot - label;
  if (!resid.allFinite()) {
    out.failed = true;
    return out;
  }
  out.loss = resid.squaredNorm() / n_units;

  // Reverse pass through  qddot = M^-1 (f - A^T lambda)  with
  // lambda = (A M^-1 A^T)^-1 (a0 + A M^-1 f); every solve adjoint follows
  // d(X^-1) = -X^-1 dX X^-1. The energy-term adjoints come out rank-one:
  //   Pi_bar = fbar,  C_bar = -fbar qdot^T,  M_bar = -fbar qddot^T.
  const Eigen::VectorXd r = (2.0 / n_units) * resid;
  Eigen::VectorXd ybar = r;
  if (fs.constraints.rows() > 0) {
    const Eigen::VectorXd lambda_bar = -fs.z.transpose() * r;
    const Eigen::VectorXd m_bar = fs.schur.solve(lambda_bar);
    ybar += fs.constraints.jacobian.transpose() * m_bar;
  }
  const Eigen::VectorXd fbar = fs.mass.solve(ybar);

  const Eigen::VectorXd u_full = map.scatter(fbar, topology.n_coords());
  const Eigen::VectorXd wq_full = map.scatter(map.gather(state.qdot), topology.n_coords());
  const Eigen::VectorXd wqd_full = map.scatter(fs.qddot, topology.n_coords());
  out.grad = model.objective_param_gradient(topology, state, u_full, wq_full, wqd_full, u_full);
  if (!out.grad.allFinite()) out.failed = true;
  return out;
}

void split_indices(int n, double split, std::uint64_t seed, std::vector<int>& train_idx,
                   std::vector<int>& val_idx) {
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, 0x73706c69));
  std::shuffle(order.begin(), order.end(), rng.engine());
  const int n_train = static_cast<int>(std::floor(split * n));
  train_idx.assign(order.begin(), order.begin() + n_train);
  val_idx.assign(order.begin() + n_train, order.end());
}

TrainReport train(LagrangianModel& model, const TrajectoryDataset& dataset,
                  const TrainConfig& config) {
  config.validate();
  if (dataset.records.size() < 2)
    throw std::invalid_argument("train: dataset needs at least two samples");
  const auto t_start = std::chrono::steady_clock::now();

  const Topology& topology = dataset.topology;
  const double drag_coeff = dataset.topology.drag_coeff;
  const FreeDofMap map = free_dof_index(topology);

  TrainReport report;
  {
    // Pooled standard deviation of the free-coordinate labels.
    double sum = 0.0, sum2 = 0.0;
    long count = 0;
    for (const auto& rec : dataset.records) {
      const Eigen::VectorXd lab = map.gather(rec.qddot);
      sum += lab.sum();
      sum2 += lab.squaredNorm();
      count += lab.size();
    }
    const double mean = sum / static_cast<double>(count);
    report.label_std = std::sqrt(std::max(0.0, sum2 / static_cast<double>(count) - mean * mean));
  }

  std::vector<int> train_idx, val_idx;
  split_indices(static_cast<int>(dataset.records.size()), config.split, config.seed, train_idx,
                val_idx);

  auto val_records = [&]() {
    std::vector<const TrajectoryRecord*> recs;
    recs.reserve(val_idx.size());
    for (int i : val_idx) recs.push_back(&dataset.records[static_cast<std::size_t>(i)]);
    return recs;
  }();

  Eigen::VectorXd params = model.parameters();
  Eigen::VectorXd best_params = params;
  Eigen::VectorXd adam_m = Eigen::VectorXd::Zero(params.size());
  Eigen::VectorXd adam_v = Eigen::VectorXd::Zero(params.size());
  long adam_t = 0;
  Rng batch_rng(derive_seed(config.seed, 0x62617463));
  int patience_left = config.early_stop_patience;

  const int batches_per_epoch =
      static_cast<int>((train_idx.size() + static_cast<std::size_t>(config.batch_size) - 1) /
                       static_cast<std::size_t>(config.batch_size));

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    double epoch_loss = 0.0;
    long epoch_batches = 0;
    long epoch_used_samples = 0;
    for (int b = 0; b < batches_per_epoch; ++b) {
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(params.size());
      double batch_loss = 0.0;
      int used = 0;
      for (int s = 0; s < config.batch_size; ++s) {
        const TrajectoryRecord& rec =
            dataset.records[static_cast<std::size_t>(train_idx[batch_rng.index(train_idx.size())])];
        const SampleGradient sg = loss_sample_gradient(
            model, topology, {rec.q, rec.qdot, rec.t}, rec.qddot, drag_coeff);
        if (sg.failed) {
          ++report.skipped_samples;
          continue;
        }
        grad += sg.grad;
        batch_loss += sg.loss;
        ++used;
      }
      if (used == 0) continue;
      grad /= static_cast<double>(used);
      batch_loss /= static_cast<double>(used);
      epoch_loss += batch_loss;
      ++epoch_batches;
      epoch_used_samples += used;

      ++adam_t;
      adam_m = config.beta1 * adam_m + (1.0 - config.beta1) * grad;
      adam_v = config.beta2 * adam_v.array().matrix() +
               (1.0 - config.beta2) * grad.array().square().matrix();
      const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(adam_t));
      const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(adam_t));
      params -= (config.lr * (adam_m / bc1).array() /
                 ((adam_v / bc2).array().sqrt() + config.adam_eps))
                    .matrix();
      model.set_parameters(params);
    }
    if (epoch_used_samples == 0)
      throw std::runtime_error("train: every sample failed in epoch " + std::to_string(epoch) +
                               " (" + std::to_string(report.skipped_samples) +
                               " skipped so far); aborting");

    report.train_loss.push_back(epoch_loss / static_cast<double>(std::max<long>(1, epoch_batches)));
    const double v = loss(model, topology, val_records, drag_coeff, &report.skipped_samples);
    report.val_loss.push_back(v);
    if (!std::isfinite(v))
      throw std::runtime_error("train: non-finite validation loss at epoch " +
                               std::to_string(epoch));

    if (v < report.best_val_loss - config.early_stop_min_delta) {
      report.best_val_loss = v;
      report.best_epoch = epoch;
      best_params = params;
      patience_left = config.early_stop_patience;
    } else if (--patience_left <= 0) {
      break;
    }
  }

  if (report.best_epoch >= 0) model.set_parameters(best_params);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return report;
}

void save_report_json(const TrainReport& report, const std::string& path) {
  nlohmann::json j = {{"train_loss", report.train_loss},
                      {"val_loss", report.val_loss},
                      {"best_epoch", report.best_epoch},
                      {"best_val_loss", report.best_val_loss},
                      {"skipped_samples", report.skipped_samples},
                      {"wall_seconds", report.wall_seconds},
                      {"label_std", report.label_std}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report: " + path);
  out << j.dump(2) << "\n";
}

void save_loss_csv(const TrainReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write loss csv: " + path);
  out << "epoch,train_loss,val_loss\n";
  char buf[64];
  for (std::size_t e = 0; e < report.train_loss.size(); ++e) {
    out << e << ",";
    std::snprintf(buf, sizeof buf, "%.17g", report.train_loss[e]);
    out << buf << ",";
    std::snprintf(buf, sizeof buf, "%.17g", report.val_loss[e]);
    out << buf << "\n";
  }
}

}  // namespace lagdyn
