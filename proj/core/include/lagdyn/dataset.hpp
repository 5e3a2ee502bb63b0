#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "lagdyn/topology.hpp"

namespace lagdyn {

struct TrajectoryRecord {
  double t = 0.0;
  Eigen::VectorXd q;
  Eigen::VectorXd qdot;
  Eigen::VectorXd qddot;
};

/// Sampled states with solver acceleration labels. Records are grouped by
/// trajectory; time restarts at 0 at each trajectory boundary and is sorted
/// within one.
struct TrajectoryDataset {
  Topology topology;
  std::string label;
  double sample_interval = 1e-3;
  double source_dt = 1e-5;
  std::vector<TrajectoryRecord> records;
};

/// JSON-lines layout: a header line embedding the topology and sampling
/// metadata, then one record per line {t, q, qdot, qddot}. Floats keep full
/// round-trip precision.
void save_dataset(const TrajectoryDataset& dataset, const std::string& path);
TrajectoryDataset load_dataset(const std::string& path);

}  // namespace lagdyn
