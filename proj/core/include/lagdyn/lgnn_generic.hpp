#pragma once

#include "lagdyn/lgnn.hpp"

namespace lagdyn {

namespace generic_detail {

/// Reads parameters off a flat scalar vector in `LgnnParams::flatten` order.
template <class S>
struct Cursor {
  const std::vector<S>* flat;
  std::size_t pos = 0;
  S next() { return (*flat)[pos++]; }
};

inline std::size_t linear_size(int out, int in) {
  return static_cast<std::size_t>(out) * in + static_cast<std::size_t>(out);
}
inline std::size_t mlp_size(const ModelConfig& cfg, int in, int out) {
  std::size_t total = 0;
  int width = in;
  for (int l = 0; l < cfg.mlp_layers; ++l) {
    total += linear_size(cfg.mlp_hidden, width);
    width = cfg.mlp_hidden;
  }
  return total + linear_size(out, width);
}

template <class S>
using Vec = std::vector<S>;

template <class S>
Vec<S> linear_apply(Cursor<S>& cur, int out, int in, const Vec<S>& x) {
  Vec<S> w(static_cast<std::size_t>(out) * in);
  for (auto& v : w) v = cur.next();
  Vec<S> b(static_cast<std::size_t>(out));
  for (auto& v : b) v = cur.next();
  Vec<S> y(static_cast<std::size_t>(out), S(0.0));
  for (int r = 0; r < out; ++r) {
    S acc = b[static_cast<std::size_t>(r)];
    for (int c = 0; c < in; ++c) acc += w[static_cast<std::size_t>(r * in + c)] * x[static_cast<std::size_t>(c)];
    y[static_cast<std::size_t>(r)] = acc;
  }
  return y;
}

/// Applies one MLP to every entity row; parameters are consumed once and the
/// cursor is rewound for the next entity by the caller capturing `start`.
template <class S>
Vec<S> mlp_apply(Cursor<S>& cur, const ModelConfig& cfg, int in, int out, const Vec<S>& x) {
  Vec<S> h = x;
  int width = in;
  for (int l = 0; l < cfg.mlp_layers; ++l) {
    h = linear_apply(cur, cfg.mlp_hidden, width, h);
    for (auto& v : h) v = squareplus(v, cfg.squareplus_b);
    width = cfg.mlp_hidden;
  }
  return linear_apply(cur, out, width, h);
}

template <class S>
void sp_inplace(Vec<S>& v, double b) {
  for (auto& x : v) x = squareplus(x, b);
}

template <class S>
S stream_energy(const ModelConfig& cfg, int dim, Cursor<S>& cur, const Topology& topology,
                const Vec<S>& q, const Vec<S>& qdot, bool kinetic) {
  const int n = topology.n_nodes();
  const int voc = cfg.type_vocab;
  const int embed = cfg.embedding_dim;
  const int node_feat_w = dim;
  const int edge_feat_w = voc + (kinetic ? 3 : dim);

  std::vector<int> src, dst;
  for (const Edge& e : topology.edges) {
    src.push_back(e.i);
    dst.push_back(e.j);
    src.push_back(e.j);
    dst.push_back(e.i);
  }
  const int n_dir = static_cast<int>(src.size());

  // Input features.
  std::vector<Vec<S>> node_feat(static_cast<std::size_t>(n));
  for (int u = 0; u < n; ++u) {
    node_feat[static_cast<std::size_t>(u)].resize(static_cast<std::size_t>(node_feat_w));
    for (int a = 0; a < dim; ++a)
      node_feat[static_cast<std::size_t>(u)][static_cast<std::size_t>(a)] =
          kinetic ? qdot[static_cast<std::size_t>(u * dim + a)] : q[static_cast<std::size_t>(u * dim + a)];
  }
  std::vector<Vec<S>> edge_feat(static_cast<std::size_t>(n_dir));
  for (int e = 0; e < n_dir; ++e) {
    Vec<S>& f = edge_feat[static_cast<std::size_t>(e)];
    f.assign(static_cast<std::size_t>(edge_feat_w), S(0.0));
    f[static_cast<std::size_t>(topology.edges[static_cast<std::size_t>(e / 2)].type)] = S(1.0);
    S dq[3] = {S(0.0), S(0.0), S(0.0)}, dv[3] = {S(0.0), S(0.0), S(0.0)};
    for (int a = 0; a < dim; ++a) {
      dq[a] = q[static_cast<std::size_t>(src[static_cast<std::size_t>(e)] * dim + a)] -
              q[static_cast<std::size_t>(dst[static_cast<std::size_t>(e)] * dim + a)];
      dv[a] = qdot[static_cast<std::size_t>(src[static_cast<std::size_t>(e)] * dim + a)] -
              qdot[static_cast<std::size_t>(dst[static_cast<std::size_t>(e)] * dim + a)];
    }
    if (kinetic) {
      f[static_cast<std::size_t>(voc + 0)] = dq[1] * dv[2] - dq[2] * dv[1];
      f[static_cast<std::size_t>(voc + 1)] = dq[2] * dv[0] - dq[0] * dv[2];
      f[static_cast<std::size_t>(voc + 2)] = dq[0] * dv[1] - dq[1] * dv[0];
    } else {
      for (int a = 0; a < dim; ++a) f[static_cast<std::size_t>(voc + a)] = dq[a];
    }
  }

  // Encoders (shared parameters across entities: replay the cursor).
  std::vector<Vec<S>> h_node(static_cast<std::size_t>(n)), h_edge(static_cast<std::size_t>(n_dir));
  {
    const std::size_t start = cur.pos;
    for (int u = 0; u < n; ++u) {
      cur.pos = start;
      h_node[static_cast<std::size_t>(u)] =
          linear_apply(cur, embed, node_feat_w, node_feat[static_cast<std::size_t>(u)]);
      sp_inplace(h_node[static_cast<std::size_t>(u)], cfg.squareplus_b);
    }
    cur.pos = start + linear_size(embed, node_feat_w);
  }
  {
    const std::size_t start = cur.pos;
    for (int e = 0; e < n_dir; ++e) {
      cur.pos = start;
      h_edge[static_cast<std::size_t>(e)] =
          linear_apply(cur, embed, edge_feat_w, edge_feat[static_cast<std::size_t>(e)]);
      sp_inplace(h_edge[static_cast<std::size_t>(e)], cfg.squareplus_b);
    }
    cur.pos = start + linear_size(embed, edge_feat_w);
  }

  for (int l = 0; l < cfg.mp_rounds; ++l) {
    // W_E
    Vec<S> w_e(static_cast<std::size_t>(embed * 2 * embed));
    for (auto& v : w_e) v = cur.next();
    std::vector<Vec<S>> new_edge(static_cast<std::size_t>(n_dir));
    {
      const std::size_t start = cur.pos;
      for (int e = 0; e < n_dir; ++e) {
        cur.pos = start;
        Vec<S> pre(static_cast<std::size_t>(embed));
        const Vec<S>& hs = h_node[static_cast<std::size_t>(src[static_cast<std::size_t>(e)])];
        const Vec<S>& hd = h_node[static_cast<std::size_t>(dst[static_cast<std::size_t>(e)])];
        for (int r = 0; r < embed; ++r) {
          S acc = h_edge[static_cast<std::size_t>(e)][static_cast<std::size_t>(r)];
          for (int c = 0; c < embed; ++c) {
            acc += w_e[static_cast<std::size_t>(r * 2 * embed + c)] * hs[static_cast<std::size_t>(c)];
            acc += w_e[static_cast<std::size_t>(r * 2 * embed + embed + c)] * hd[static_cast<std::size_t>(c)];
          }
          pre[static_cast<std::size_t>(r)] = acc;
        }
        new_edge[static_cast<std::size_t>(e)] = mlp_apply(cur, cfg, embed, embed, pre);
        sp_inplace(new_edge[static_cast<std::size_t>(e)], cfg.squareplus_b);
      }
      cur.pos = start + mlp_size(cfg, embed, embed);
    }
    // W_U
    Vec<S> w_u(static_cast<std::size_t>(embed * embed));
    for (auto& v : w_u) v = cur.next();
    std::vector<Vec<S>> new_node(static_cast<std::size_t>(n));
    {
      const std::size_t start = cur.pos;
      for (int u = 0; u < n; ++u) {
        cur.pos = start;
        Vec<S> pre = h_node[static_cast<std::size_t>(u)];
        for (int e = 0; e < n_dir; ++e) {
          if (dst[static_cast<std::size_t>(e)] != u) continue;
          for (int r = 0; r < embed; ++r) {
            S acc(0.0);
            for (int c = 0; c < embed; ++c)
              acc += w_u[static_cast<std::size_t>(r * embed + c)] *
                     h_edge[static_cast<std::size_t>(e)][static_cast<std::size_t>(c)];
            pre[static_cast<std::size_t>(r)] += acc;
          }
        }
        new_node[static_cast<std::size_t>(u)] = mlp_apply(cur, cfg, embed, embed, pre);
        sp_inplace(new_node[static_cast<std::size_t>(u)], cfg.squareplus_b);
      }
      cur.pos = start + mlp_size(cfg, embed, embed);
    }
    h_edge = std::move(new_edge);
    h_node = std::move(new_node);
  }

  // Readout.
  S energy(0.0);
  {
    const std::size_t start = cur.pos;
    for (int e = 0; e < n_dir; ++e) {
      cur.pos = start;
      const Vec<S> v = mlp_apply(cur, cfg, embed, 1, h_edge[static_cast<std::size_t>(e)]);
      energy += v[0];
    }
    cur.pos = start + mlp_size(cfg, embed, 1);
  }
  return energy;
}

}  // namespace generic_detail

template <class S>
S lgnn_eval_generic(const ModelConfig& config, int dim, const std::vector<S>& flat_params,
                    const Topology& topology, const std::vector<S>& q,
                    const std::vector<S>& qdot) {
  generic_detail::Cursor<S> cur{&flat_params, 0};
  const S potential = generic_detail::stream_energy(config, dim, cur, topology, q, qdot, false);
  const S kinetic = generic_detail::stream_energy(config, dim, cur, topology, q, qdot, true);
  return kinetic - potential;
}

}  // namespace lagdyn
