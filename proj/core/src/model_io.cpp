#include "lagdyn/model_io.hpp"

#include <fstream>

#include "json.hpp"

namespace lagdyn {

namespace {
using nlohmann::json;

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (static_cast<Eigen::Index>(rows[r].size()) != m.cols())
      throw std::runtime_error("checkpoint: ragged matrix");
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  return m;
}

json vector_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vector_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void put_mlp(json& out, const std::string& prefix, const Mlp& mlp) {
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    out[prefix + "." + std::to_string(l) + ".weight"] = matrix_json(mlp.layers[l].w);
    out[prefix + "." + std::to_string(l) + ".bias"] = vector_json(mlp.layers[l].b);
  }
}

void get_mlp(const json& in, const std::string& prefix, Mlp& mlp) {
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    mlp.layers[l].w = matrix_from_json(in.at(prefix + "." + std::to_string(l) + ".weight"));
    mlp.layers[l].b = vector_from_json(in.at(prefix + "." + std::to_string(l) + ".bias"));
  }
}

json stream_json(const StreamParams& s) {
  json out;
  out["node_encoder.weight"] = matrix_json(s.node_encoder.w);
  out["node_encoder.bias"] = vector_json(s.node_encoder.b);
  out["edge_encoder.weight"] = matrix_json(s.edge_encoder.w);
  out["edge_encoder.bias"] = vector_json(s.edge_encoder.b);
  for (std::size_t l = 0; l < s.rounds.size(); ++l) {
    const std::string p = "round" + std::to_string(l);
    out[p + ".edge_weight"] = matrix_json(s.rounds[l].w_edge);
    put_mlp(out, p + ".edge_mlp", s.rounds[l].edge_mlp);
    out[p + ".node_weight"] = matrix_json(s.rounds[l].w_node);
    put_mlp(out, p + ".node_mlp", s.rounds[l].node_mlp);
  }
  put_mlp(out, "readout", s.readout);
  return out;
}

void stream_from_json(const json& in, StreamParams& s) {
  s.node_encoder.w = matrix_from_json(in.at("node_encoder.weight"));
  s.node_encoder.b = vector_from_json(in.at("node_encoder.bias"));
  s.edge_encoder.w = matrix_from_json(in.at("edge_encoder.weight"));
  s.edge_encoder.b = vector_from_json(in.at("edge_encoder.bias"));
  for (std::size_t l = 0; l < s.rounds.size(); ++l) {
    const std::string p = "round" + std::to_string(l);
    s.rounds[l].w_edge = matrix_from_json(in.at(p + ".edge_weight"));
    get_mlp(in, p + ".edge_mlp", s.rounds[l].edge_mlp);
    s.rounds[l].w_node = matrix_from_json(in.at(p + ".node_weight"));
    get_mlp(in, p + ".node_mlp", s.rounds[l].node_mlp);
  }
  get_mlp(in, "readout", s.readout);
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << text << "\n";
}
}  // namespace

std::string checkpoint_to_json(const LgnnParams& params) {
  json j;
  j["model"] = "lgnn";
  j["config"] = {{"embedding_dim", params.config.embedding_dim},
                 {"mlp_hidden", params.config.mlp_hidden},
                 {"mlp_layers", params.config.mlp_layers},
                 {"mp_rounds", params.config.mp_rounds},
                 {"type_vocab", params.config.type_vocab},
                 {"squareplus_b", params.config.squareplus_b},
                 {"dim", params.dim}};
  j["seed"] = params.seed;
  j["potential_net"] = stream_json(params.potential);
  j["kinetic_net"] = stream_json(params.kinetic);
  return j.dump();
}

std::string checkpoint_to_json(const ClnnParams& params) {
  json j;
  j["model"] = "clnn";
  j["config"] = {{"input_width", params.config.input_width},
                 {"hidden", params.config.hidden},
                 {"hidden_layers", params.config.hidden_layers},
                 {"squareplus_b", params.config.squareplus_b}};
  j["seed"] = params.seed;
  json net;
  put_mlp(net, "net", params.net);
  j["net"] = std::move(net);
  return j.dump();
}

void save_checkpoint(const LgnnParams& params, const std::string& path) {
  write_file(path, checkpoint_to_json(params));
}

void save_checkpoint(const ClnnParams& params, const std::string& path) {
  write_file(path, checkpoint_to_json(params));
}

std::unique_ptr<LagrangianModel> load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  const json j = json::parse(in);
  const std::string model = j.at("model").get<std::string>();
  if (model == "lgnn") {
    ModelConfig cfg;
    const json& c = j.at("config");
    cfg.embedding_dim = c.at("embedding_dim").get<int>();
    cfg.mlp_hidden = c.at("mlp_hidden").get<int>();
    cfg.mlp_layers = c.at("mlp_layers").get<int>();
    cfg.mp_rounds = c.at("mp_rounds").get<int>();
    cfg.type_vocab = c.at("type_vocab").get<int>();
    cfg.squareplus_b = c.at("squareplus_b").get<double>();
    LgnnParams params = LgnnParams::init(cfg, c.at("dim").get<int>(),
                                         j.at("seed").get<std::uint64_t>());
    stream_from_json(j.at("potential_net"), params.potential);
    stream_from_json(j.at("kinetic_net"), params.kinetic);
    return std::make_unique<GraphNetModel>(std::move(params));
  }
  if (model == "clnn") {
    ClnnConfig cfg;
    const json& c = j.at("config");
    cfg.input_width = c.at("input_width").get<int>();
    cfg.hidden = c.at("hidden").get<int>();
    cfg.hidden_layers = c.at("hidden_layers").get<int>();
    cfg.squareplus_b = c.at("squareplus_b").get<double>();
    ClnnParams params = ClnnParams::init(cfg, j.at("seed").get<std::uint64_t>());
    get_mlp(j.at("net"), "net", params.net);
    return std::make_unique<FeedForwardModel>(std::move(params));
  }
  throw std::runtime_error("checkpoint: unknown model family '" + model + "'");
}

}  // namespace lagdyn
