// Command-line surface for the rigid-body Lagrangian toolkit: dataset
// generation, training, evaluation, single rollouts and mass-matrix probes.
// Every command is deterministic under (inputs, seed) and echoes its
// effective configuration into the output directory.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "lagdyn/evaluation.hpp"
#include "lagdyn/model_io.hpp"
#include "lagdyn/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lagdyn;

namespace {

// Values for a JSON config file are applied as option defaults before argv
// is parsed, so command-line flags override file values.
json load_config_arg(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) {
      std::ifstream in(argv[i + 1]);
      if (!in) throw std::runtime_error(std::string("cannot read config file: ") + argv[i + 1]);
      return json::parse(in);
    }
    if (a.rfind("--config=", 0) == 0) {
      std::ifstream in(a.substr(9));
      if (!in) throw std::runtime_error("cannot read config file: " + a.substr(9));
      return json::parse(in);
    }
  }
  return json::object();
}

void apply_config(const json& cfg, CLI::App* sub) {
  if (cfg.empty()) return;
  for (const auto& [key, value] : cfg.items()) {
    CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (!opt) continue;
    opt->default_val(value.is_string() ? value.get<std::string>() : value.dump());
  }
}

void write_effective_config(const json& cfg, const std::string& out_dir) {
  std::ofstream out(out_dir + "/effective_config.json");
  out << cfg.dump(2) << "\n";
  std::cout << "config: " << cfg.dump() << "\n";
}

SystemSpec resolve_system(const std::string& label, const std::string& topology_file) {
  if (!topology_file.empty()) {
    SystemSpec spec;
    spec.topology = load_topology(topology_file);
    spec.drag_coeff = spec.topology.drag_coeff;
    spec.label = label.empty() ? fs::path(topology_file).stem().string() : label;
    spec.initial_conditions.name =
        is_serial_chain(spec.topology) ? "chain-angles" : "fixed-structure";
    return spec;
  }
  return catalog(label);
}

std::unique_ptr<LagrangianModel> resolve_model(const std::string& checkpoint,
                                               const Topology& topology) {
  if (checkpoint == "analytic") return std::make_unique<AnalyticRodModel>(topology);
  return load_checkpoint(checkpoint);
}

int cmd_generate(const std::string& system, const std::string& topology_file, int trajectories,
                 int points, double dt, double sample_interval, std::uint64_t seed,
                 const std::string& out_dir) {
  const SystemSpec spec = resolve_system(system, topology_file);
  const AnalyticRodModel model(spec.topology);
  const TrajectoryDataset ds =
      generate_dataset(spec, model, trajectories, points, dt, sample_interval, seed);
  save_topology(spec.topology, out_dir + "/topology.json");
  save_dataset(ds, out_dir + "/dataset.jsonl");
  std::cout << "wrote " << ds.records.size() << " records to " << out_dir << "/dataset.jsonl\n";
  return 0;
}

int cmd_train(const std::string& dataset_path, const std::string& model_kind,
              const ModelConfig& mc, int clnn_hidden, int clnn_layers, const TrainConfig& tc,
              const std::string& out_dir) {
  const TrajectoryDataset ds = load_dataset(dataset_path);
  std::unique_ptr<LagrangianModel> model;
  if (model_kind == "lgnn") {
    model = std::make_unique<GraphNetModel>(LgnnParams::init(mc, ds.topology.dim, tc.seed));
  } else if (model_kind == "clnn") {
    ClnnConfig cc;
    cc.input_width = 2 * free_dof_index(ds.topology).count;
    cc.hidden = clnn_hidden;
    cc.hidden_layers = clnn_layers;
    cc.squareplus_b = mc.squareplus_b;
    model = std::make_unique<FeedForwardModel>(ClnnParams::init(cc, tc.seed));
  } else {
    throw std::invalid_argument("unknown model kind '" + model_kind + "' (lgnn|clnn)");
  }

  const TrainReport report = train(*model, ds, tc);
  if (auto* g = dynamic_cast<GraphNetModel*>(model.get()))
    save_checkpoint(g->params(), out_dir + "/checkpoint.json");
  else if (auto* c = dynamic_cast<FeedForwardModel*>(model.get()))
    save_checkpoint(c->params(), out_dir + "/checkpoint.json");
  save_report_json(report, out_dir + "/report.json");
  save_loss_csv(report, out_dir + "/loss.csv");
  std::cout << "trained " << model_kind << " for " << report.train_loss.size() << " epochs, best val "
            << report.best_val_loss << " at epoch " << report.best_epoch << " (label std "
            << report.label_std << ", skipped " << report.skipped_samples << ")\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::vector<std::string>& systems,
             const std::vector<std::string>& topology_files, const EvalOptions& opt,
             const std::string& out_dir) {
  std::vector<SystemEval> evals;
  std::vector<SystemSpec> specs;
  for (const std::string& label : systems) specs.push_back(resolve_system(label, ""));
  for (const std::string& file : topology_files) specs.push_back(resolve_system("", file));
  for (const SystemSpec& spec : specs) {
    const auto model = resolve_model(checkpoint, spec.topology);
    evals.push_back(evaluate_system(*model, spec, opt));
    const auto& s = evals.back().summary;
    std::cout << s.system << ": geomean_RE " << s.geomean_re << ", geomean_EE " << s.geomean_ee
              << ", combined " << s.geomean_combined << ", diverged " << s.n_diverged << "\n";
  }
  write_metrics_csv(evals, out_dir + "/metrics.csv");
  write_summary_csv(evals, out_dir + "/summary.csv");
  return 0;
}

int cmd_rollout(const std::string& checkpoint, const std::string& system,
                const std::string& topology_file, const EvalOptions& opt,
                const std::string& out_dir) {
  const SystemSpec spec = resolve_system(system, topology_file);
  const auto model = resolve_model(checkpoint, spec.topology);

  EvalOptions single = opt;
  single.n_seeds = 1;
  const SystemEval ev = evaluate_system(*model, spec, single);
  write_metrics_csv({ev}, out_dir + "/metrics.csv");
  write_summary_csv({ev}, out_dir + "/summary.csv");

  const State init = spec.initial_conditions.name == "fixed-structure"
                         ? State{spec.topology.reference_q(),
                                 Eigen::VectorXd::Zero(spec.topology.n_coords()), 0.0}
                         : sample_initial_state(spec, derive_seed(opt.seed, 0));
  const Rollout ro =
      rollout(*model, spec.topology, spec.drag_coeff, init.q, init.qdot, opt.horizon, opt.dt);
  TrajectoryDataset traj;
  traj.topology = spec.topology;
  traj.label = spec.label;
  traj.sample_interval = opt.dt;
  traj.source_dt = opt.dt;
  for (const auto& rec : ro.records) {
    TrajectoryRecord r = rec;
    r.qddot = acceleration_full(*model, spec.topology, {r.q, r.qdot, r.t}, spec.drag_coeff);
    traj.records.push_back(std::move(r));
  }
  save_dataset(traj, out_dir + "/trajectory.jsonl");
  std::cout << spec.label << ": " << ro.records.size() << " states"
            << (ro.diverged() ? " (diverged at step " + std::to_string(ro.diverged_step) + ")"
                              : "")
            << ", combined error " << ev.summary.geomean_combined << "\n";
  return 0;
}

int cmd_massmatrix(const std::string& checkpoint, const std::string& system,
                   const std::string& topology_file, const std::string& state_from,
                   int state_index, const std::string& out_dir) {
  const SystemSpec spec = resolve_system(system, topology_file);
  const auto model = resolve_model(checkpoint, spec.topology);

  State state;
  if (state_from.empty()) {
    state.q = spec.topology.reference_q();
    state.qdot = Eigen::VectorXd::Zero(spec.topology.n_coords());
  } else {
    const TrajectoryDataset ds = load_dataset(state_from);
    if (state_index < 0 || state_index >= static_cast<int>(ds.records.size()))
      throw std::invalid_argument("state index out of range");
    const auto& rec = ds.records[static_cast<std::size_t>(state_index)];
    state = {rec.q, rec.qdot, rec.t};
  }

  const MassMatrixReport report = mass_matrix_probe(*model, spec.topology, state);
  write_matrix_csv(report.matrix, out_dir + "/mass_matrix.csv");
  write_mask_csv(report.mask, out_dir + "/mass_mask.csv");
  json band = {{"symmetry_residual", report.symmetry_residual},
               {"max_by_node_distance", report.max_by_distance},
               {"mask_threshold_fraction_of_max_diagonal", 0.01}};
  std::ofstream out(out_dir + "/band_report.json");
  out << band.dump(2) << "\n";
  std::cout << "mass matrix " << report.matrix.rows() << "x" << report.matrix.cols()
            << ", symmetry residual " << report.symmetry_residual << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-network Lagrangian dynamics toolkit"};
  app.require_subcommand(1);

  std::string config_file, out_dir = ".";
  std::uint64_t seed = 0;
  app.add_option("--config", config_file, "JSON config file; flags override file values");

  json cfg;
  try {
    cfg = load_config_arg(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  // generate
  auto* gen = app.add_subcommand("generate", "Generate a trajectory dataset");
  std::string gen_system = "chain-4", gen_topology;
  int gen_traj = 100, gen_points = 10000;
  double gen_dt = 1e-5, gen_interval = 1e-3;
  gen->add_option("--system", gen_system, "catalog label")->capture_default_str();
  gen->add_option("--topology", gen_topology, "topology JSON file (overrides --system)");
  gen->add_option("--trajectories", gen_traj, "number of trajectories")->capture_default_str();
  gen->add_option("--points", gen_points, "total records")->capture_default_str();
  gen->add_option("--dt", gen_dt, "integration timestep [s]")->capture_default_str();
  gen->add_option("--sample-interval", gen_interval, "recording interval [s]")
      ->capture_default_str();

  // train
  auto* tr = app.add_subcommand("train", "Train a model on a dataset");
  std::string tr_dataset, tr_model = "lgnn";
  ModelConfig mc;
  TrainConfig tc;
  int clnn_hidden = 128, clnn_layers = 2;
  tr->add_option("--dataset", tr_dataset, "dataset.jsonl path")->required();
  tr->add_option("--model", tr_model, "lgnn | clnn")->capture_default_str();
  tr->add_option("--embed", mc.embedding_dim, "embedding dimension")->capture_default_str();
  tr->add_option("--hidden", mc.mlp_hidden, "MLP hidden width")->capture_default_str();
  tr->add_option("--mlp-layers", mc.mlp_layers, "MLP hidden layers")->capture_default_str();
  tr->add_option("--rounds", mc.mp_rounds, "message-passing rounds")->capture_default_str();
  tr->add_option("--type-vocab", mc.type_vocab, "edge type vocabulary")->capture_default_str();
  tr->add_option("--squareplus-b", mc.squareplus_b, "activation shift")->capture_default_str();
  tr->add_option("--clnn-hidden", clnn_hidden, "clnn hidden width")->capture_default_str();
  tr->add_option("--clnn-layers", clnn_layers, "clnn hidden layers")->capture_default_str();
  tr->add_option("--lr", tc.lr, "learning rate")->capture_default_str();
  tr->add_option("--batch", tc.batch_size, "batch size")->capture_default_str();
  tr->add_option("--max-epochs", tc.max_epochs, "epoch cap")->capture_default_str();
  tr->add_option("--patience", tc.early_stop_patience, "early-stop patience")
      ->capture_default_str();
  tr->add_option("--split", tc.split, "train fraction")->capture_default_str();

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate rollouts against ground truth");
  std::string ev_checkpoint = "analytic";
  std::vector<std::string> ev_systems, ev_topologies;
  EvalOptions eo;
  ev->add_option("--checkpoint", ev_checkpoint, "checkpoint.json or 'analytic'")
      ->capture_default_str();
  ev->add_option("--systems", ev_systems, "comma-separated catalog labels")->delimiter(',');
  ev->add_option("--topology", ev_topologies, "additional topology files");
  ev->add_option("--horizon", eo.horizon, "rollout horizon [s]")->capture_default_str();
  ev->add_option("--dt", eo.dt, "inference timestep [s]")->capture_default_str();
  ev->add_option("--gt-dt", eo.gt_dt, "ground-truth timestep [s]")->capture_default_str();
  ev->add_option("--rollouts", eo.n_seeds, "seeded rollouts per system")->capture_default_str();
  ev->add_option("--threads", eo.threads, "worker threads (0 = auto)")->capture_default_str();

  // rollout
  auto* ro = app.add_subcommand("rollout", "Forward-simulate one trajectory");
  std::string ro_checkpoint = "analytic", ro_system = "chain-4", ro_topology;
  EvalOptions ro_opt;
  ro->add_option("--checkpoint", ro_checkpoint, "checkpoint.json or 'analytic'")
      ->capture_default_str();
  ro->add_option("--system", ro_system, "catalog label")->capture_default_str();
  ro->add_option("--topology", ro_topology, "topology JSON file");
  ro->add_option("--horizon", ro_opt.horizon, "rollout horizon [s]")->capture_default_str();
  ro->add_option("--dt", ro_opt.dt, "inference timestep [s]")->capture_default_str();
  ro->add_option("--gt-dt", ro_opt.gt_dt, "ground-truth timestep [s]")->capture_default_str();

  // massmatrix
  auto* mm = app.add_subcommand("massmatrix", "Extract and report the mass matrix");
  std::string mm_checkpoint = "analytic", mm_system = "chain-16", mm_topology, mm_state_from;
  int mm_state_index = 0;
  mm->add_option("--checkpoint", mm_checkpoint, "checkpoint.json or 'analytic'")
      ->capture_default_str();
  mm->add_option("--system", mm_system, "catalog label")->capture_default_str();
  mm->add_option("--topology", mm_topology, "topology JSON file");
  mm->add_option("--state-from", mm_state_from, "dataset.jsonl supplying the probe state");
  mm->add_option("--state-index", mm_state_index, "record index in --state-from")
      ->capture_default_str();

  for (CLI::App* sub : {gen, tr, ev, ro, mm}) {
    sub->add_option("--seed", seed, "master seed")->capture_default_str();
    sub->add_option("--out", out_dir, "output directory")->capture_default_str();
    sub->add_option("--config", config_file, "JSON config file; flags override file values");
    apply_config(cfg, sub);
  }

  CLI11_PARSE(app, argc, argv);

  try {
    fs::create_directories(out_dir);
    json echo;
    for (CLI::App* sub : {gen, tr, ev, ro, mm}) {
      if (!sub->parsed()) continue;
      echo["subcommand"] = sub->get_name();
      for (const CLI::Option* opt : sub->get_options()) {
        const std::string name = opt->get_name();
        if (name.rfind("--", 0) == 0 && !opt->results().empty())
          echo[name.substr(2)] = opt->results().size() == 1 ? json(opt->results()[0])
                                                            : json(opt->results());
      }
    }
    echo["seed"] = seed;
    echo["out"] = out_dir;
    write_effective_config(echo, out_dir);

    if (gen->parsed())
      return cmd_generate(gen_system, gen_topology, gen_traj, gen_points, gen_dt, gen_interval,
                          seed, out_dir);
    if (tr->parsed()) {
      tc.seed = seed;
      return cmd_train(tr_dataset, tr_model, mc, clnn_hidden, clnn_layers, tc, out_dir);
    }
    if (ev->parsed()) {
      eo.seed = seed;
      return cmd_eval(ev_checkpoint, ev_systems, ev_topologies, eo, out_dir);
    }
    if (ro->parsed()) {
      ro_opt.seed = seed;
      return cmd_rollout(ro_checkpoint, ro_system, ro_topology, ro_opt, out_dir);
    }
    if (mm->parsed())
      return cmd_massmatrix(mm_checkpoint, mm_system, mm_topology, mm_state_from, mm_state_index,
                            out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
