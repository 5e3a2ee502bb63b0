#include "lagdyn/evaluation.hpp"
#include <atomic>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <queue>
#include <sstream>
#include <thread>

#include "lagdyn/integrate.hpp"
#include "lagdyn/random.hpp"

namespace lagdyn {

Rollout rollout(const LagrangianModel& model, const Topology& topology, double drag_coeff,
                const Eigen::VectorXd& q0, const Eigen::VectorXd& qdot0, double horizon,
                double dt) {
  const long steps = std::lround(horizon / dt);
  IntegrateOptions opts;
  opts.dt = dt;
  opts.project = true;

  Rollout out;
  State state{q0, qdot0, 0.0};
  for (long step = 0; step <= steps; ++step) {
    if (!state.q.allFinite() || !state.qdot.allFinite()) {
      out.diverged_step = step - 1;
      break;
    }
    out.records.push_back({state.t, state.q, state.qdot, Eigen::VectorXd()});
    if (step == steps) break;
    try {
      state = verlet_step(model, topology, drag_coeff, state, opts);
    } catch (const RankDeficiencyError&) {
      out.diverged_step = step;
      break;
    } catch (const DegenerateConstraintError&) {
      out.diverged_step = step;
      break;
    } catch (const NumericalEvalError&) {
      out.diverged_step = step;
      break;
    }
    state.t = static_cast<double>(step + 1) * dt;
  }
  return out;
}

double rollout_error(const Eigen::VectorXd& predicted, const Eigen::VectorXd& truth) {
  if (predicted.size() != truth.size())
    throw std::invalid_argument("rollout_error: length mismatch");
  const double denom = predicted.norm() + truth.norm();
  if (denom == 0.0) return 0.0;
  return (predicted - truth).norm() / denom;
}

double energy_error(double predicted_energy, double truth_energy) {
  const double denom = std::abs(predicted_energy) + std::abs(truth_energy);
  if (denom == 0.0) return 0.0;
  return std::abs(predicted_energy - truth_energy) / denom;
}

double geometric_mean_error(const std::vector<double>& rollout_errors,
                            const std::vector<double>& energy_errors) {
  if (rollout_errors.size() != energy_errors.size() || rollout_errors.empty())
    throw std::invalid_argument("geometric_mean_error: inputs must align and be non-empty");
  double acc = 0.0;
  for (std::size_t k = 0; k < rollout_errors.size(); ++k)
    acc += std::sqrt(std::max(rollout_errors[k], 1e-15) * std::max(energy_errors[k], 1e-15));
  return acc / static_cast<double>(rollout_errors.size());
}

namespace {
SeedMetrics metrics_for_seed(const LagrangianModel& model, const SystemSpec& spec,
                             const AnalyticRodModel& truth_model, const EvalOptions& opt,
                             std::uint64_t seed, bool fixed_start) {
  SeedMetrics sm;
  sm.seed = seed;
  const State init = fixed_start
                         ? State{spec.topology.reference_q(),
                                 Eigen::VectorXd::Zero(spec.topology.n_coords()), 0.0}
                         : sample_initial_state(spec, seed);

  const long ratio = std::lround(opt.dt / opt.gt_dt);
  const long gt_steps = std::lround(opt.horizon / opt.gt_dt);
  const TrajectoryDataset truth =
      simulate(spec, truth_model, init.q, init.qdot, opt.gt_dt, gt_steps, ratio,
               /*project_override=*/1);

  const Rollout pred = rollout(model, spec.topology, spec.drag_coeff, init.q, init.qdot,
                               opt.horizon, opt.dt);
  sm.diverged = pred.diverged();

  const std::size_t n = std::min(pred.records.size(), truth.records.size());
  for (std::size_t k = 0; k < n; ++k) {
    const auto& p = pred.records[k];
    const auto& g = truth.records[k];
    const double re = rollout_error(p.q, g.q);
    const double h_pred = truth_model.kinetic_energy(spec.topology, p.qdot) +
                          truth_model.potential_energy(spec.topology, p.q);
    const double h_true = truth_model.kinetic_energy(spec.topology, g.qdot) +
                          truth_model.potential_energy(spec.topology, g.q);
    sm.t.push_back(p.t);
    sm.re.push_back(re);
    sm.ee.push_back(energy_error(h_pred, h_true));
  }
  // A rollout glued to RE ~ 1 has lost the trajectory entirely; flag it.
  int saturated = 0;
  for (double re : sm.re) saturated += re > 0.99;
  if (saturated > static_cast<int>(sm.re.size()) / 2) sm.diverged = true;

  if (sm.re.size() > 1) {
    const std::vector<double> re_tail(sm.re.begin() + 1, sm.re.end());
    const std::vector<double> ee_tail(sm.ee.begin() + 1, sm.ee.end());
    sm.combined = geometric_mean_error(re_tail, ee_tail);
  }
  return sm;
}

double geomean_over(const std::vector<SeedMetrics>& seeds, bool energy) {
  double acc = 0.0;
  long count = 0;
  for (const SeedMetrics& sm : seeds) {
    const std::vector<double>& xs = energy ? sm.ee : sm.re;
    for (std::size_t k = 1; k < xs.size(); ++k) {  // step 0 is identical by construction
      acc += std::log(std::max(xs[k], 1e-15));
      ++count;
    }
  }
  return count ? std::exp(acc / static_cast<double>(count)) : 0.0;
}
}  // namespace

SystemEval evaluate_system(const LagrangianModel& model, const SystemSpec& spec,
                           const EvalOptions& options) {
  SystemEval eval;
  eval.system = spec.label;
  const AnalyticRodModel truth_model(spec.topology);
  const bool fixed_start = spec.initial_conditions.name == "fixed-structure";
  const int n_runs = fixed_start ? 1 : options.n_seeds;

  eval.seeds.resize(static_cast<std::size_t>(n_runs));
  const int threads = options.threads > 0
                          ? options.threads
                          : std::max(1u, std::thread::hardware_concurrency());
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int k = next.fetch_add(1);
      if (k >= n_runs) return;
      eval.seeds[static_cast<std::size_t>(k)] =
          metrics_for_seed(model, spec, truth_model, options,
                           derive_seed(options.seed, static_cast<std::uint64_t>(k)), fixed_start);
    }
  };
  if (threads <= 1 || n_runs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < std::min(threads, n_runs); ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  eval.summary.system = spec.label;
  eval.summary.geomean_re = geomean_over(eval.seeds, false);
  eval.summary.geomean_ee = geomean_over(eval.seeds, true);
  double acc = 0.0;
  for (const SeedMetrics& sm : eval.seeds) {
    acc += sm.combined;
    eval.summary.n_diverged += sm.diverged;
  }
  eval.summary.geomean_combined = eval.seeds.empty() ? 0.0 : acc / static_cast<double>(eval.seeds.size());
  return eval;
}

std::vector<SystemEval> zero_shot_eval(const LagrangianModel& model,
                                       const std::vector<SystemSpec>& systems,
                                       const EvalOptions& options) {
  std::vector<SystemEval> out;
  out.reserve(systems.size());
  for (const SystemSpec& spec : systems) out.push_back(evaluate_system(model, spec, options));
  return out;
}

namespace {
std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace

void write_metrics_csv(const std::vector<SystemEval>& evals, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write metrics csv: " + path);
  out << "system,seed,t,rollout_error,energy_error\n";
  for (const SystemEval& ev : evals)
    for (const SeedMetrics& sm : ev.seeds)
      for (std::size_t k = 0; k < sm.t.size(); ++k)
        out << ev.system << "," << sm.seed << "," << fmt(sm.t[k]) << "," << fmt(sm.re[k]) << ","
            << fmt(sm.ee[k]) << "\n";
}

void write_summary_csv(const std::vector<SystemEval>& evals, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write summary csv: " + path);
  out << "system,geomean_RE,geomean_EE,geomean_combined,n_diverged\n";
  for (const SystemEval& ev : evals)
    out << ev.summary.system << "," << fmt(ev.summary.geomean_re) << ","
        << fmt(ev.summary.geomean_ee) << "," << fmt(ev.summary.geomean_combined) << ","
        << ev.summary.n_diverged << "\n";
}

std::vector<SystemSummary> read_summary_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read summary csv: " + path);
  std::string line;
  std::getline(in, line);  // header
  std::vector<SystemSummary> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    SystemSummary s;
    std::string field;
    std::getline(ss, s.system, ',');
    std::getline(ss, field, ',');
    s.geomean_re = std::stod(field);
    std::getline(ss, field, ',');
    s.geomean_ee = std::stod(field);
    std::getline(ss, field, ',');
    s.geomean_combined = std::stod(field);
    std::getline(ss, field, ',');
    s.n_diverged = std::stoi(field);
    out.push_back(std::move(s));
  }
  return out;
}

MassMatrixReport mass_matrix_probe(const LagrangianModel& model, const Topology& topology,
                                   const State& state) {
  const FreeDofMap map = free_dof_index(topology);
  const auto fn = model.lagrangian_function(topology);
  const Eigen::VectorXd x = pack_free_state(topology, map, state);
  auto call = [&](const auto& xs) { return (*fn)(xs); };

  MassMatrixReport report;
  report.matrix = hessian_block(call, x, {map.count, map.count}, {map.count, map.count});
  report.symmetry_residual = (report.matrix - report.matrix.transpose()).cwiseAbs().maxCoeff();

  // Node graph distances by BFS.
  const int n = topology.n_nodes();
  std::vector<std::vector<int>> adjacency(static_cast<std::size_t>(n));
  for (const Edge& e : topology.edges) {
    adjacency[static_cast<std::size_t>(e.i)].push_back(e.j);
    adjacency[static_cast<std::size_t>(e.j)].push_back(e.i);
  }
  Eigen::MatrixXi dist = Eigen::MatrixXi::Constant(n, n, -1);
  for (int s = 0; s < n; ++s) {
    std::queue<int> frontier;
    frontier.push(s);
    dist(s, s) = 0;
    while (!frontier.empty()) {
      const int u = frontier.front();
      frontier.pop();
      for (int v : adjacency[static_cast<std::size_t>(u)])
        if (dist(s, v) < 0) {
          dist(s, v) = dist(s, u) + 1;
          frontier.push(v);
        }
    }
  }

  int max_dist = 0;
  for (int a = 0; a < map.count; ++a)
    for (int b = 0; b < map.count; ++b) {
      const int na = map.to_full[static_cast<std::size_t>(a)] / topology.dim;
      const int nb = map.to_full[static_cast<std::size_t>(b)] / topology.dim;
      if (dist(na, nb) > max_dist) max_dist = dist(na, nb);
    }
  report.max_by_distance.assign(static_cast<std::size_t>(max_dist + 1), 0.0);
  for (int a = 0; a < map.count; ++a)
    for (int b = 0; b < map.count; ++b) {
      const int na = map.to_full[static_cast<std::size_t>(a)] / topology.dim;
      const int nb = map.to_full[static_cast<std::size_t>(b)] / topology.dim;
      const int d = dist(na, nb);
      if (d < 0) continue;  // disconnected pair
      report.max_by_distance[static_cast<std::size_t>(d)] =
          std::max(report.max_by_distance[static_cast<std::size_t>(d)],
                   std::abs(report.matrix(a, b)));
    }

  const double threshold = 0.01 * report.matrix.diagonal().cwiseAbs().maxCoeff();
  report.mask = (report.matrix.cwiseAbs().array() > threshold).cast<int>();
  return report;
}

void write_matrix_csv(const Eigen::MatrixXd& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write matrix csv: " + path);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << fmt(m(r, c));
    out << "\n";
  }
}

void write_mask_csv(const Eigen::MatrixXi& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write mask csv: " + path);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << m(r, c);
    out << "\n";
  }
}

}  // namespace lagdyn
