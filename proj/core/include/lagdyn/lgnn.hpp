#pragma once

#include <cstdint>

#include "lagdyn/mlp.hpp"
#include "lagdyn/model.hpp"

namespace lagdyn {

struct ModelConfig {
  int embedding_dim = 5;
  int mlp_hidden = 10;
  int mlp_layers = 1;  // hidden layers per MLP
  int mp_rounds = 2;   // message-passing rounds
  int type_vocab = 2;  // edge type one-hot width
  double squareplus_b = 4.0;

  void validate() const;
};

/// One energy stream (potential or kinetic): linear encoders into the
/// embedding space, per-round edge/node update weights and MLPs, and a
/// per-edge scalar readout.
struct StreamParams {
  struct Round {
    Eigen::MatrixXd w_edge;  // embed x 2*embed, mixes endpoint embeddings
    Mlp edge_mlp;
    Eigen::MatrixXd w_node;  // embed x embed, applied to incident edges
    Mlp node_mlp;
  };
  Linear node_encoder;
  Linear edge_encoder;
  std::vector<Round> rounds;
  Mlp readout;
};

struct StreamGrads {
  struct Round {
    Eigen::MatrixXd w_edge;
    MlpGrad edge_mlp;
    Eigen::MatrixXd w_node;
    MlpGrad node_mlp;
  };
  LinearGrad node_encoder;
  LinearGrad edge_encoder;
  std::vector<Round> rounds;
  MlpGrad readout;
};

/// Two disjoint streams; the Lagrangian is kinetic minus potential energy.
struct LgnnParams {
  ModelConfig config;
  std::uint64_t seed = 0;
  int dim = 2;  // spatial dimension the encoders were sized for
  StreamParams potential;
  StreamParams kinetic;

  static LgnnParams init(const ModelConfig& config, int dim, std::uint64_t seed);
  Eigen::VectorXd flatten() const;
  void unflatten(const Eigen::VectorXd& flat);
  int parameter_count() const;
};

StreamGrads zero_grads(const StreamParams& stream);

/// Per-node and per-edge input features for one stream, payload included.
/// Potential stream: node q_i, edge (one-hot(type), q_i - q_j).
/// Kinetic stream: node qdot_i, edge (one-hot(type), (q_i-q_j) x (qdot_i-qdot_j)).
/// Cross products are taken in 3-D (planar inputs embedded with z = 0).
struct StreamFeatures {
  std::vector<int> src, dst;  // directed edges, two per topology edge
  Batch nodes, edges;
};

StreamFeatures featurize_stream(const ModelConfig& config, const Topology& topology,
                                const State& state, const std::vector<SeedChannel>& seeds,
                                const RingSpec& ring, bool kinetic);

class GraphNetModel final : public LagrangianModel {
 public:
  explicit GraphNetModel(LgnnParams params) : params_(std::move(params)) {}

  double lagrangian(const Topology& topology, const State& state) const override;
  EnergyTerms energy_terms(const Topology& topology, const State& state) const override;
  std::unique_ptr<DifferentiableFunction> lagrangian_function(
      const Topology& topology) const override;
  std::string family() const override { return "lgnn"; }

  /// Reverse-accumulation workhorse behind the training loss gradient.
  Eigen::VectorXd objective_param_gradient(const Topology& topology, const State& state,
                                           const Eigen::VectorXd& u_qdot,
                                           const Eigen::VectorXd& w_q,
                                           const Eigen::VectorXd& w_qdot,
                                           const Eigen::VectorXd& g_q) const override;

  int parameter_count() const override { return params_.parameter_count(); }
  Eigen::VectorXd parameters() const override { return params_.flatten(); }
  void set_parameters(const Eigen::VectorXd& flat) override { params_.unflatten(flat); }

  const LgnnParams& params() const { return params_; }
  LgnnParams& params() { return params_; }

 private:
  LgnnParams params_;
};

/// Fully generic scalar evaluation with parameters taken from a flat vector
/// in `LgnnParams::flatten` order. The reference route for transcription
/// checks and for differentiating with respect to parameters.
template <class S>
S lgnn_eval_generic(const ModelConfig& config, int dim, const std::vector<S>& flat_params,
                    const Topology& topology, const std::vector<S>& q, const std::vector<S>& qdot);

}  // namespace lagdyn
