#include "lagdyn/dataset.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"

namespace lagdyn {

namespace {
std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}
Eigen::VectorXd from_std(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}
}  // namespace

void save_dataset(const TrajectoryDataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset file: " + path);
  nlohmann::json header = {
      {"topology", nlohmann::json::parse(topology_to_json(dataset.topology))},
      {"label", dataset.label},
      {"sample_interval", dataset.sample_interval},
      {"source_dt", dataset.source_dt},
      {"records", dataset.records.size()},
  };
  out << header.dump() << "\n";
  for (const TrajectoryRecord& r : dataset.records) {
    nlohmann::json line = {
        {"t", r.t}, {"q", to_std(r.q)}, {"qdot", to_std(r.qdot)}, {"qddot", to_std(r.qddot)}};
    out << line.dump() << "\n";
  }
}

TrajectoryDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read dataset file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("dataset file is empty: " + path);
  const nlohmann::json header = nlohmann::json::parse(line);

  TrajectoryDataset ds;
  ds.topology = topology_from_json(header.at("topology").dump());
  ds.label = header.value("label", std::string{});
  ds.sample_interval = header.value("sample_interval", 1e-3);
  ds.source_dt = header.value("source_dt", 1e-5);

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line);
    TrajectoryRecord r;
    r.t = j.at("t").get<double>();
    r.q = from_std(j.at("q").get<std::vector<double>>());
    r.qdot = from_std(j.at("qdot").get<std::vector<double>>());
    r.qddot = from_std(j.at("qddot").get<std::vector<double>>());
    if (!r.q.allFinite() || !r.qdot.allFinite() || !r.qddot.allFinite())
      throw std::runtime_error("dataset record contains non-finite values");
    ds.records.push_back(std::move(r));
  }
  return ds;
}

}  // namespace lagdyn
