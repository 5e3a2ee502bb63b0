#include "lagdyn/lgnn.hpp"

#include <cmath>

#include "lagdyn/lgnn_generic.hpp"

namespace lagdyn {

void ModelConfig::validate() const {
  if (embedding_dim < 1 || mlp_hidden < 1 || mlp_layers < 1 || mp_rounds < 1 || type_vocab < 1)
    throw std::invalid_argument("model config: all sizes must be >= 1");
  if (!(squareplus_b > 0.0)) throw std::invalid_argument("model config: squareplus shift must be > 0");
}

namespace {
StreamParams init_stream(const ModelConfig& cfg, int node_feat, int edge_feat, Rng& rng) {
  StreamParams p;
  p.node_encoder = make_linear(cfg.embedding_dim, node_feat, rng);
  p.edge_encoder = make_linear(cfg.embedding_dim, edge_feat, rng);
  for (int l = 0; l < cfg.mp_rounds; ++l) {
    StreamParams::Round round;
    round.w_edge.resize(cfg.embedding_dim, 2 * cfg.embedding_dim);
    {
      const double s = 1.0 / std::sqrt(2.0 * cfg.embedding_dim);
      for (Eigen::Index r = 0; r < round.w_edge.rows(); ++r)
        for (Eigen::Index c = 0; c < round.w_edge.cols(); ++c)
          round.w_edge(r, c) = rng.uniform(-s, s);
    }
    round.edge_mlp = make_mlp(cfg.embedding_dim, cfg.mlp_hidden, cfg.mlp_layers,
                              cfg.embedding_dim, rng);
    round.w_node.resize(cfg.embedding_dim, cfg.embedding_dim);
    {
      const double s = 1.0 / std::sqrt(static_cast<double>(cfg.embedding_dim));
      for (Eigen::Index r = 0; r < round.w_node.rows(); ++r)
        for (Eigen::Index c = 0; c < round.w_node.cols(); ++c)
          round.w_node(r, c) = rng.uniform(-s, s);
    }
    round.node_mlp = make_mlp(cfg.embedding_dim, cfg.mlp_hidden, cfg.mlp_layers,
                              cfg.embedding_dim, rng);
    p.rounds.push_back(std::move(round));
  }
  p.readout = make_mlp(cfg.embedding_dim, cfg.mlp_hidden, cfg.mlp_layers, 1, rng);
  return p;
}

void append_stream(const StreamParams& p, std::vector<double>& out) {
  append_flat(p.node_encoder, out);
  append_flat(p.edge_encoder, out);
  for (const auto& r : p.rounds) {
    for (Eigen::Index i = 0; i < r.w_edge.rows(); ++i)
      for (Eigen::Index j = 0; j < r.w_edge.cols(); ++j) out.push_back(r.w_edge(i, j));
    append_flat(r.edge_mlp, out);
    for (Eigen::Index i = 0; i < r.w_node.rows(); ++i)
      for (Eigen::Index j = 0; j < r.w_node.cols(); ++j) out.push_back(r.w_node(i, j));
    append_flat(r.node_mlp, out);
  }
  append_flat(p.readout, out);
}

void append_stream(const StreamGrads& p, std::vector<double>& out) {
  append_flat(p.node_encoder, out);
  append_flat(p.edge_encoder, out);
  for (const auto& r : p.rounds) {
    for (Eigen::Index i = 0; i < r.w_edge.rows(); ++i)
      for (Eigen::Index j = 0; j < r.w_edge.cols(); ++j) out.push_back(r.w_edge(i, j));
    append_flat(r.edge_mlp, out);
    for (Eigen::Index i = 0; i < r.w_node.rows(); ++i)
      for (Eigen::Index j = 0; j < r.w_node.cols(); ++j) out.push_back(r.w_node(i, j));
    append_flat(r.node_mlp, out);
  }
  append_flat(p.readout, out);
}

void read_stream(StreamParams& p, const double*& cursor) {
  read_flat(p.node_encoder, cursor);
  read_flat(p.edge_encoder, cursor);
  for (auto& r : p.rounds) {
    for (Eigen::Index i = 0; i < r.w_edge.rows(); ++i)
      for (Eigen::Index j = 0; j < r.w_edge.cols(); ++j) r.w_edge(i, j) = *cursor++;
    read_flat(r.edge_mlp, cursor);
    for (Eigen::Index i = 0; i < r.w_node.rows(); ++i)
      for (Eigen::Index j = 0; j < r.w_node.cols(); ++j) r.w_node(i, j) = *cursor++;
    read_flat(r.node_mlp, cursor);
  }
  read_flat(p.readout, cursor);
}
}  // namespace

LgnnParams LgnnParams::init(const ModelConfig& config, int dim, std::uint64_t seed) {
  config.validate();
  LgnnParams params;
  params.config = config;
  params.seed = seed;
  params.dim = dim;
  Rng rng(derive_seed(seed, 0x6c676e6e));
  params.potential = init_stream(config, dim, config.type_vocab + dim, rng);
  params.kinetic = init_stream(config, dim, config.type_vocab + 3, rng);
  return params;
}

Eigen::VectorXd LgnnParams::flatten() const {
  std::vector<double> out;
  append_stream(potential, out);
  append_stream(kinetic, out);
  return Eigen::Map<const Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size()));
}

void LgnnParams::unflatten(const Eigen::VectorXd& flat) {
  if (flat.size() != parameter_count())
    throw std::invalid_argument("unflatten: parameter count mismatch");
  const double* cursor = flat.data();
  read_stream(potential, cursor);
  read_stream(kinetic, cursor);
}

int LgnnParams::parameter_count() const { return static_cast<int>(flatten().size()); }

StreamGrads zero_grads(const StreamParams& stream) {
  StreamGrads g;
  g.node_encoder = zero_grad(stream.node_encoder);
  g.edge_encoder = zero_grad(stream.edge_encoder);
  for (const auto& r : stream.rounds) {
    StreamGrads::Round round;
    round.w_edge = Eigen::MatrixXd::Zero(r.w_edge.rows(), r.w_edge.cols());
    round.edge_mlp = zero_grad(r.edge_mlp);
    round.w_node = Eigen::MatrixXd::Zero(r.w_node.rows(), r.w_node.cols());
    round.node_mlp = zero_grad(r.node_mlp);
    g.rounds.push_back(std::move(round));
  }
  g.readout = zero_grad(stream.readout);
  return g;
}

namespace {
Eigen::VectorXd seed_or_zero(const Eigen::VectorXd& v, Eigen::Index n) {
  return v.size() == 0 ? Eigen::VectorXd::Zero(n) : v;
}
}  // namespace

StreamFeatures featurize_stream(const ModelConfig& config, const Topology& topology,
                                const State& state, const std::vector<SeedChannel>& seeds,
                                const RingSpec& ring, bool kinetic) {
  if (static_cast<int>(seeds.size()) != ring.channels - 1)
    throw std::invalid_argument("featurize: seed count must equal tangent channel count");
  const int n = topology.n_nodes();
  const int d = topology.dim;
  const int n_dir = 2 * topology.n_edges();
  const int voc = config.type_vocab;
  const int c_count = ring.channels;

  StreamFeatures f;
  f.src.reserve(static_cast<std::size_t>(n_dir));
  f.dst.reserve(static_cast<std::size_t>(n_dir));
  for (const Edge& e : topology.edges) {
    if (e.type >= voc)
      throw std::invalid_argument("featurize: edge type exceeds the model type vocabulary");
    f.src.push_back(e.i);
    f.dst.push_back(e.j);
    f.src.push_back(e.j);
    f.dst.push_back(e.i);
  }

  // Node features: q_i for the potential stream, qdot_i for the kinetic one.
  f.nodes = Batch(n, c_count, d);
  for (int u = 0; u < n; ++u)
    for (int a = 0; a < d; ++a)
      f.nodes.ch(0)(u, a) = kinetic ? state.qdot[u * d + a] : state.q[u * d + a];
  for (int c = 1; c < c_count; ++c) {
    const SeedChannel& s = seeds[static_cast<std::size_t>(c - 1)];
    const Eigen::VectorXd dir =
        kinetic ? seed_or_zero(s.dqdot, topology.n_coords()) : seed_or_zero(s.dq, topology.n_coords());
    for (int u = 0; u < n; ++u)
      for (int a = 0; a < d; ++a) f.nodes.ch(c)(u, a) = dir[u * d + a];
  }

  // Edge features: one-hot type plus the relative geometry feature.
  const int geom_width = kinetic ? 3 : d;
  f.edges = Batch(n_dir, c_count, voc + geom_width);
  for (int e = 0; e < n_dir; ++e)
    f.edges.ch(0)(e, topology.edges[static_cast<std::size_t>(e / 2)].type) = 1.0;

  // Relative positions (and velocities for the kinetic stream), ring-valued,
  // one stacked column per 3-D component.
  auto stacked_delta = [&](const Eigen::VectorXd& base, bool velocity, int comp) {
    Eigen::VectorXd col = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(c_count) * n_dir);
    if (comp < d) {
      for (int e = 0; e < n_dir; ++e)
        col[e] = base[f.src[static_cast<std::size_t>(e)] * d + comp] -
                 base[f.dst[static_cast<std::size_t>(e)] * d + comp];
      for (int c = 1; c < c_count; ++c) {
        const SeedChannel& s = seeds[static_cast<std::size_t>(c - 1)];
        const Eigen::VectorXd dir = velocity ? seed_or_zero(s.dqdot, topology.n_coords())
                                             : seed_or_zero(s.dq, topology.n_coords());
        for (int e = 0; e < n_dir; ++e)
          col[c * n_dir + e] = dir[f.src[static_cast<std::size_t>(e)] * d + comp] -
                               dir[f.dst[static_cast<std::size_t>(e)] * d + comp];
      }
    }
    return col;
  };

  if (!kinetic) {
    const Eigen::VectorXd empty;
    for (int a = 0; a < d; ++a) {
      const Eigen::VectorXd dq = stacked_delta(state.q, false, a);
      for (int c = 0; c < c_count; ++c)
        f.edges.ch(c).col(voc + a) = dq.segment(c * n_dir, n_dir);
    }
  } else {
    Eigen::VectorXd dq[3], dv[3];
    for (int comp = 0; comp < 3; ++comp) {
      dq[comp] = stacked_delta(state.q, false, comp);
      dv[comp] = stacked_delta(state.qdot, true, comp);
    }
    const Eigen::VectorXd omega[3] = {
        ring_col_product(dq[1], dv[2], n_dir, ring) - ring_col_product(dq[2], dv[1], n_dir, ring),
        ring_col_product(dq[2], dv[0], n_dir, ring) - ring_col_product(dq[0], dv[2], n_dir, ring),
        ring_col_product(dq[0], dv[1], n_dir, ring) - ring_col_product(dq[1], dv[0], n_dir, ring)};
    for (int comp = 0; comp < 3; ++comp)
      for (int c = 0; c < c_count; ++c)
        f.edges.ch(c).col(voc + comp) = omega[comp].segment(c * n_dir, n_dir);
  }
  return f;
}

namespace {

Batch gather_rows(const Batch& nodes, const std::vector<int>& idx) {
  Batch out(static_cast<int>(idx.size()), nodes.channels, static_cast<int>(nodes.width()));
  for (int c = 0; c < nodes.channels; ++c) {
    auto dstb = out.ch(c);
    const auto srcb = nodes.ch(c);
    for (std::size_t e = 0; e < idx.size(); ++e)
      dstb.row(static_cast<Eigen::Index>(e)) = srcb.row(idx[e]);
  }
  return out;
}

void scatter_add_rows(Batch& nodes, const Batch& rows, const std::vector<int>& idx) {
  for (int c = 0; c < nodes.channels; ++c) {
    auto dstb = nodes.ch(c);
    const auto srcb = rows.ch(c);
    for (std::size_t e = 0; e < idx.size(); ++e)
      dstb.row(idx[e]) += srcb.row(static_cast<Eigen::Index>(e));
  }
}

struct RoundTrace {
  Batch h_edge_in;  // round input edge embeddings (feed both paths)
  Batch concat;     // [h_src, h_dst]
  MlpTrace edge_mlp;
  MlpTrace node_mlp;
};

struct StreamTrace {
  StreamFeatures feat;
  Batch node_enc_pre, edge_enc_pre;
  std::vector<RoundTrace> rounds;
  MlpTrace readout;
  Eigen::VectorXd energy;  // per ring channel
};

StreamTrace stream_forward(const StreamParams& p, const ModelConfig& cfg, StreamFeatures feat,
                           const RingSpec& ring) {
  const double spb = cfg.squareplus_b;
  const int embed = cfg.embedding_dim;
  StreamTrace t;
  t.feat = std::move(feat);

  t.node_enc_pre = linear_forward(p.node_encoder, t.feat.nodes);
  Batch h_node = squareplus_forward(t.node_enc_pre, spb, ring);
  t.edge_enc_pre = linear_forward(p.edge_encoder, t.feat.edges);
  Batch h_edge = squareplus_forward(t.edge_enc_pre, spb, ring);

  for (const auto& round : p.rounds) {
    RoundTrace rt;
    rt.h_edge_in = h_edge;

    const Batch h_src = gather_rows(h_node, t.feat.src);
    const Batch h_dst = gather_rows(h_node, t.feat.dst);
    rt.concat = Batch(h_src.entities, h_src.channels, 2 * embed);
    rt.concat.m.leftCols(embed) = h_src.m;
    rt.concat.m.rightCols(embed) = h_dst.m;

    Batch edge_in = matmul_forward(round.w_edge, rt.concat);
    edge_in.m += h_edge.m;
    rt.edge_mlp = mlp_forward(round.edge_mlp, edge_in, spb, ring);
    Batch new_edge = squareplus_forward(rt.edge_mlp.out, spb, ring);

    Batch agg(h_node.entities, h_node.channels, embed);
    scatter_add_rows(agg, matmul_forward(round.w_node, h_edge), t.feat.dst);
    agg.m += h_node.m;
    rt.node_mlp = mlp_forward(round.node_mlp, agg, spb, ring);
    h_node = squareplus_forward(rt.node_mlp.out, spb, ring);

    h_edge = std::move(new_edge);
    t.rounds.push_back(std::move(rt));
  }

  t.readout = mlp_forward(p.readout, h_edge, spb, ring);
  t.energy.resize(ring.channels);
  for (int c = 0; c < ring.channels; ++c) t.energy[c] = t.readout.out.ch(c).sum();
  return t;
}

/// Ring-valued reverse pass. Returns feature adjoints; accumulates parameter
/// gradients into `grads` when non-null. `sign` is +1 for the kinetic stream
/// and -1 for the potential one (L = T - V).
void stream_backward(const StreamParams& p, const ModelConfig& cfg, const RingSpec& ring,
                     const StreamTrace& t, double sign, StreamGrads* grads, Batch& node_feat_bar,
                     Batch& edge_feat_bar) {
  const double spb = cfg.squareplus_b;
  const int embed = cfg.embedding_dim;
  const int rounds = static_cast<int>(p.rounds.size());

  Batch ybar(t.readout.out.entities, ring.channels, 1);
  ybar.ch(0).setConstant(sign);
  Batch h_edge_bar = mlp_backward(p.readout, t.readout, ybar, spb, ring,
                                  grads ? &grads->readout : nullptr);
  Batch h_node_bar(t.feat.nodes.entities, ring.channels, embed);

  for (int l = rounds - 1; l >= 0; --l) {
    const RoundTrace& rt = t.rounds[static_cast<std::size_t>(l)];
    const auto& round = p.rounds[static_cast<std::size_t>(l)];
    StreamGrads::Round* rg = grads ? &grads->rounds[static_cast<std::size_t>(l)] : nullptr;

    // Node path: h_node' = sp(MLP_U(h_node + scatter(W_U h_edge))).
    Batch s1 = squareplus_backward(rt.node_mlp.out, h_node_bar, spb, ring);
    Batch s2 = mlp_backward(round.node_mlp, rt.node_mlp, s1, spb, ring,
                            rg ? &rg->node_mlp : nullptr);
    Batch agg_edge_bar = gather_rows(s2, t.feat.dst);
    Batch from_agg = matmul_backward(round.w_node, rt.h_edge_in, agg_edge_bar, ring,
                                     rg ? &rg->w_node : nullptr);

    // Edge path: h_edge' = sp(MLP_E(h_edge + W_E [h_src, h_dst])).
    Batch e1 = squareplus_backward(rt.edge_mlp.out, h_edge_bar, spb, ring);
    Batch e2 = mlp_backward(round.edge_mlp, rt.edge_mlp, e1, spb, ring,
                            rg ? &rg->edge_mlp : nullptr);
    Batch concat_bar = matmul_backward(round.w_edge, rt.concat, e2, ring,
                                       rg ? &rg->w_edge : nullptr);

    // Previous-layer adjoints.
    h_edge_bar = std::move(e2);
    h_edge_bar.m += from_agg.m;

    h_node_bar = std::move(s2);
    Batch src_part(concat_bar.entities, concat_bar.channels, embed);
    src_part.m = concat_bar.m.leftCols(embed);
    scatter_add_rows(h_node_bar, src_part, t.feat.src);
    Batch dst_part(concat_bar.entities, concat_bar.channels, embed);
    dst_part.m = concat_bar.m.rightCols(embed);
    scatter_add_rows(h_node_bar, dst_part, t.feat.dst);
  }

  Batch n1 = squareplus_backward(t.node_enc_pre, h_node_bar, spb, ring);
  node_feat_bar = linear_backward(p.node_encoder, t.feat.nodes, n1, ring,
                                  grads ? &grads->node_encoder : nullptr);
  Batch e1 = squareplus_backward(t.edge_enc_pre, h_edge_bar, spb, ring);
  edge_feat_bar = linear_backward(p.edge_encoder, t.feat.edges, e1, ring,
                                  grads ? &grads->edge_encoder : nullptr);
}

/// Routes feature adjoints back to ring-valued coordinate adjoints
/// (channels x full coordinates). The kinetic edge feature is a cross
/// product, so its adjoint splits onto both position and velocity slots.
void features_backward_to_coords(const ModelConfig& cfg, const Topology& topology,
                                 const State& state, const std::vector<SeedChannel>& seeds,
                                 const RingSpec& ring, const StreamFeatures& feat, bool kinetic,
                                 const Batch& node_bar, const Batch& edge_bar,
                                 Eigen::MatrixXd& qbar, Eigen::MatrixXd& qdbar) {
  const int d = topology.dim;
  const int n = topology.n_nodes();
  const int n_dir = static_cast<int>(feat.src.size());
  const int voc = cfg.type_vocab;
  const int c_count = ring.channels;

  Eigen::MatrixXd& node_target = kinetic ? qdbar : qbar;
  for (int c = 0; c < c_count; ++c)
    for (int u = 0; u < n; ++u)
      for (int a = 0; a < d; ++a) node_target(c, u * d + a) += node_bar.ch(c)(u, a);

  if (!kinetic) {
    for (int c = 0; c < c_count; ++c)
      for (int e = 0; e < n_dir; ++e)
        for (int a = 0; a < d; ++a) {
          const double v = edge_bar.ch(c)(e, voc + a);
          qbar(c, feat.src[static_cast<std::size_t>(e)] * d + a) += v;
          qbar(c, feat.dst[static_cast<std::size_t>(e)] * d + a) -= v;
        }
    return;
  }

  // omega = u x w with u = dq, w = dqdot: u_bar = w x omega_bar,
  // w_bar = omega_bar x u, all products in the payload ring.
  auto stacked_delta = [&](const Eigen::VectorXd& base, bool velocity, int comp) {
    Eigen::VectorXd col = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(c_count) * n_dir);
    if (comp < d) {
      for (int e = 0; e < n_dir; ++e)
        col[e] = base[feat.src[static_cast<std::size_t>(e)] * d + comp] -
                 base[feat.dst[static_cast<std::size_t>(e)] * d + comp];
      for (int c = 1; c < c_count; ++c) {
        const SeedChannel& s = seeds[static_cast<std::size_t>(c - 1)];
        const Eigen::VectorXd dir = velocity ? seed_or_zero(s.dqdot, topology.n_coords())
                                             : seed_or_zero(s.dq, topology.n_coords());
        for (int e = 0; e < n_dir; ++e)
          col[c * n_dir + e] = dir[feat.src[static_cast<std::size_t>(e)] * d + comp] -
                               dir[feat.dst[static_cast<std::size_t>(e)] * d + comp];
      }
    }
    return col;
  };

  Eigen::VectorXd u[3], w[3], obar[3];
  for (int comp = 0; comp < 3; ++comp) {
    u[comp] = stacked_delta(state.q, false, comp);
    w[comp] = stacked_delta(state.qdot, true, comp);
    obar[comp].resize(static_cast<Eigen::Index>(c_count) * n_dir);
    for (int c = 0; c < c_count; ++c)
      obar[comp].segment(c * n_dir, n_dir) = edge_bar.ch(c).col(voc + comp);
  }
  const Eigen::VectorXd ubar[3] = {
      ring_col_product(w[1], obar[2], n_dir, ring) - ring_col_product(w[2], obar[1], n_dir, ring),
      ring_col_product(w[2], obar[0], n_dir, ring) - ring_col_product(w[0], obar[2], n_dir, ring),
      ring_col_product(w[0], obar[1], n_dir, ring) - ring_col_product(w[1], obar[0], n_dir, ring)};
  const Eigen::VectorXd wbar[3] = {
      ring_col_product(obar[1], u[2], n_dir, ring) - ring_col_product(obar[2], u[1], n_dir, ring),
      ring_col_product(obar[2], u[0], n_dir, ring) - ring_col_product(obar[0], u[2], n_dir, ring),
      ring_col_product(obar[0], u[1], n_dir, ring) - ring_col_product(obar[1], u[0], n_dir, ring)};

  for (int comp = 0; comp < d; ++comp)
    for (int c = 0; c < c_count; ++c)
      for (int e = 0; e < n_dir; ++e) {
        const int si = feat.src[static_cast<std::size_t>(e)] * d + comp;
        const int di = feat.dst[static_cast<std::size_t>(e)] * d + comp;
        qbar(c, si) += ubar[comp][c * n_dir + e];
        qbar(c, di) -= ubar[comp][c * n_dir + e];
        qdbar(c, si) += wbar[comp][c * n_dir + e];
        qdbar(c, di) -= wbar[comp][c * n_dir + e];
      }
}

struct CoordAdjoints {
  Eigen::MatrixXd qbar;   // channels x full coords
  Eigen::MatrixXd qdbar;  // channels x full coords
  double lagrangian = 0.0;
};

/// Forward + reverse over both streams with the given payload seeds.
CoordAdjoints coordinate_adjoints(const LgnnParams& params, const Topology& topology,
                                  const State& state, const std::vector<SeedChannel>& seeds,
                                  const RingSpec& kinetic_ring, const RingSpec& potential_ring,
                                  const std::vector<SeedChannel>& potential_seeds,
                                  StreamGrads* pot_grads, StreamGrads* kin_grads) {
  CoordAdjoints out;
  out.qbar = Eigen::MatrixXd::Zero(kinetic_ring.channels, topology.n_coords());
  out.qdbar = Eigen::MatrixXd::Zero(kinetic_ring.channels, topology.n_coords());

  StreamTrace kin = stream_forward(params.kinetic, params.config,
                                   featurize_stream(params.config, topology, state, seeds,
                                                    kinetic_ring, true),
                                   kinetic_ring);
  Batch kn_bar, ke_bar;
  stream_backward(params.kinetic, params.config, kinetic_ring, kin, +1.0, kin_grads, kn_bar,
                  ke_bar);
  features_backward_to_coords(params.config, topology, state, seeds, kinetic_ring, kin.feat, true,
                              kn_bar, ke_bar, out.qbar, out.qdbar);

  Eigen::MatrixXd qbar_pot = Eigen::MatrixXd::Zero(potential_ring.channels, topology.n_coords());
  Eigen::MatrixXd qdbar_pot = Eigen::MatrixXd::Zero(potential_ring.channels, topology.n_coords());
  StreamTrace pot = stream_forward(params.potential, params.config,
                                   featurize_stream(params.config, topology, state,
                                                    potential_seeds, potential_ring, false),
                                   potential_ring);
  Batch pn_bar, pe_bar;
  stream_backward(params.potential, params.config, potential_ring, pot, -1.0, pot_grads, pn_bar,
                  pe_bar);
  features_backward_to_coords(params.config, topology, state, potential_seeds, potential_ring,
                              pot.feat, false, pn_bar, pe_bar, qbar_pot, qdbar_pot);

  out.qbar.topRows(potential_ring.channels) += qbar_pot;
  out.qdbar.topRows(potential_ring.channels) += qdbar_pot;
  out.lagrangian = kin.energy[0] - pot.energy[0];
  return out;
}
}  // namespace

double GraphNetModel::lagrangian(const Topology& topology, const State& state) const {
  const RingSpec ring{1, -1, -1, -1, {}};
  const std::vector<SeedChannel> none;
  const StreamTrace kin = stream_forward(
      params_.kinetic, params_.config,
      featurize_stream(params_.config, topology, state, none, ring, true), ring);
  const StreamTrace pot = stream_forward(
      params_.potential, params_.config,
      featurize_stream(params_.config, topology, state, none, ring, false), ring);
  return kin.energy[0] - pot.energy[0];
}

EnergyTerms GraphNetModel::energy_terms(const Topology& topology, const State& state) const {
  const FreeDofMap map = free_dof_index(topology);
  const int n_free = map.count;

  // Tangent channels: unit directions along each free velocity coordinate.
  RingSpec kin_ring;
  kin_ring.channels = 1 + n_free;
  std::vector<SeedChannel> seeds(static_cast<std::size_t>(n_free));
  for (int k = 0; k < n_free; ++k) {
    seeds[static_cast<std::size_t>(k)].dqdot = Eigen::VectorXd::Zero(topology.n_coords());
    seeds[static_cast<std::size_t>(k)].dqdot[map.to_full[static_cast<std::size_t>(k)]] = 1.0;
  }
  // The potential stream never sees qdot: value-only pass suffices.
  const RingSpec pot_ring{1, -1, -1, -1, {}};
  const std::vector<SeedChannel> no_seeds;

  const CoordAdjoints adj = coordinate_adjoints(params_, topology, state, seeds, kin_ring,
                                                pot_ring, no_seeds, nullptr, nullptr);

  EnergyTerms terms;
  terms.conservative.resize(n_free);
  terms.mass.resize(n_free, n_free);
  terms.coriolis.resize(n_free, n_free);
  for (int b = 0; b < n_free; ++b) {
    const int full_b = map.to_full[static_cast<std::size_t>(b)];
    terms.conservative[b] = adj.qbar(0, full_b);
    for (int a = 0; a < n_free; ++a) {
      terms.mass(a, b) = adj.qdbar(1 + a, full_b);
      terms.coriolis(a, b) = adj.qbar(1 + a, full_b);
    }
  }
  return terms;
}

Eigen::VectorXd GraphNetModel::objective_param_gradient(const Topology& topology,
                                                        const State& state,
                                                        const Eigen::VectorXd& u_qdot,
                                                        const Eigen::VectorXd& w_q,
                                                        const Eigen::VectorXd& w_qdot,
                                                        const Eigen::VectorXd& g_q) const {
  RingSpec ring;
  ring.channels = 5;
  ring.a = 1;
  ring.b = 2;
  ring.ab = 3;
  ring.selection = {{3, -1.0}, {4, +1.0}};
  std::vector<SeedChannel> seeds(4);
  seeds[0].dqdot = u_qdot;          // alpha
  seeds[1].dq = w_q;                // beta
  seeds[1].dqdot = w_qdot;
  seeds[3].dq = g_q;                // gamma

  StreamGrads pot_grads = zero_grads(params_.potential);
  StreamGrads kin_grads = zero_grads(params_.kinetic);
  (void)coordinate_adjoints(params_, topology, state, seeds, ring, ring, seeds, &pot_grads,
                            &kin_grads);

  std::vector<double> flat;
  append_stream(pot_grads, flat);
  append_stream(kin_grads, flat);
  return Eigen::Map<const Eigen::VectorXd>(flat.data(), static_cast<Eigen::Index>(flat.size()));
}

std::unique_ptr<DifferentiableFunction> GraphNetModel::lagrangian_function(
    const Topology& topology) const {
  const FreeDofMap map = free_dof_index(topology);
  const Eigen::VectorXd flat = params_.flatten();
  const ModelConfig config = params_.config;
  const int dim = params_.dim;
  auto fn = [flat, config, dim, topology, map](const auto& x) {
    using S = std::decay_t<decltype(x[0])>;
    std::vector<S> fp(static_cast<std::size_t>(flat.size()));
    for (Eigen::Index i = 0; i < flat.size(); ++i) fp[static_cast<std::size_t>(i)] = S(flat[i]);
    const Eigen::VectorXd ref = topology.reference_q();
    std::vector<S> q(static_cast<std::size_t>(topology.n_coords()));
    std::vector<S> qd(static_cast<std::size_t>(topology.n_coords()), S(0.0));
    for (int s = 0; s < topology.n_coords(); ++s) q[static_cast<std::size_t>(s)] = S(ref[s]);
    for (int k = 0; k < map.count; ++k) {
      q[static_cast<std::size_t>(map.to_full[static_cast<std::size_t>(k)])] =
          x[static_cast<std::size_t>(k)];
      qd[static_cast<std::size_t>(map.to_full[static_cast<std::size_t>(k)])] =
          x[static_cast<std::size_t>(map.count + k)];
    }
    return lgnn_eval_generic(config, dim, fp, topology, q, qd);
  };
  return std::make_unique<FunctionAdapter<decltype(fn)>>(std::move(fn));
}

}  // namespace lagdyn
