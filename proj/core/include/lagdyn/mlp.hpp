#pragma once

#include <Eigen/Core>
#include <vector>

#include "lagdyn/autodiff.hpp"
#include "lagdyn/random.hpp"

namespace lagdyn {

/// Truncated-polynomial payload layout carried through network passes.
/// Channel 0 is the value; the remaining channels are first-order tangents
/// except that, when `ab >= 0`, channels `a` and `b` multiply into the
/// cross channel `ab` (second-order payload for parameter gradients).
struct RingSpec {
  int channels = 1;
  int a = -1, b = -1, ab = -1;
  /// Scalar objective used for parameter gradients: sum of weighted payload
  /// channels of the network output, e.g. {{ab, -1}, {gamma, +1}}.
  std::vector<std::pair<int, double>> selection;
  bool second_order() const { return ab >= 0; }
};

/// Activations for a batch of entities with ring payloads, stacked
/// channel-major: rows [c*entities, (c+1)*entities) hold channel c.
struct Batch {
  Eigen::MatrixXd m;
  int entities = 0;
  int channels = 1;

  Batch() = default;
  Batch(int entities_, int channels_, int width)
      : m(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(entities_) * channels_, width)),
        entities(entities_),
        channels(channels_) {}

  Eigen::Block<Eigen::MatrixXd> ch(int c) { return m.middleRows(c * entities, entities); }
  Eigen::Block<const Eigen::MatrixXd> ch(int c) const {
    return m.middleRows(c * entities, entities);
  }
  Eigen::Index width() const { return m.cols(); }
};

/// Directional seed vectors (full-coordinate) for one payload channel.
struct SeedChannel {
  Eigen::VectorXd dq;     // may be empty = zero
  Eigen::VectorXd dqdot;
};

struct Linear {
  Eigen::MatrixXd w;  // out x in
  Eigen::VectorXd b;  // out
};

struct LinearGrad {
  Eigen::MatrixXd w;
  Eigen::VectorXd b;
};

/// One-hidden-layer-per-entry perceptron: squareplus between linear layers,
/// no activation after the last one. `layers.size() - 1` hidden layers.
struct Mlp {
  std::vector<Linear> layers;
};

struct MlpGrad {
  std::vector<LinearGrad> grads;
};

Linear make_linear(int out, int in, Rng& rng);
Mlp make_mlp(int in, int hidden, int hidden_layers, int out, Rng& rng);
LinearGrad zero_grad(const Linear& lin);
MlpGrad zero_grad(const Mlp& mlp);

// ---- forward ----

/// y = x W^T, bias added to the value channel only.
Batch linear_forward(const Linear& lin, const Batch& x);

/// Ring-lifted elementwise squareplus. The input batch is retained by the
/// caller as the backward cache.
Batch squareplus_forward(const Batch& x, double b, const RingSpec& ring);

struct MlpTrace {
  std::vector<Batch> pre;  // input of each squareplus (post-linear)
  std::vector<Batch> in;   // input of each linear
  Batch out;
};

MlpTrace mlp_forward(const Mlp& mlp, const Batch& x, double sp_b, const RingSpec& ring);

// ---- backward (ring-valued adjoints, same batch layout) ----

/// Adjoint flow X_bar = Y_bar W. When `grad` is non-null, accumulates
/// d(objective)/d(params) for the channel selection in `ring.selection`.
Batch linear_backward(const Linear& lin, const Batch& x, const Batch& ybar, const RingSpec& ring,
                      LinearGrad* grad);

/// Bias-free variants for the message-passing mixing weights.
Batch matmul_forward(const Eigen::MatrixXd& w, const Batch& x);
Batch matmul_backward(const Eigen::MatrixXd& w, const Batch& x, const Batch& ybar,
                      const RingSpec& ring, Eigen::MatrixXd* grad);

Batch squareplus_backward(const Batch& x_pre, const Batch& ybar, double b, const RingSpec& ring);

Batch mlp_backward(const Mlp& mlp, const MlpTrace& trace, const Batch& ybar, double sp_b,
                   const RingSpec& ring, MlpGrad* grad);

/// Ring product of two single-column payload stacks (used for cross-product
/// edge features). Inputs and output share entity count and ring layout.
Eigen::VectorXd ring_col_product(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int entities,
                                 const RingSpec& ring);

// ---- flat parameter plumbing ----

void append_flat(const Linear& lin, std::vector<double>& out);
void append_flat(const Mlp& mlp, std::vector<double>& out);
void append_flat(const LinearGrad& lin, std::vector<double>& out);
void append_flat(const MlpGrad& mlp, std::vector<double>& out);
void read_flat(Linear& lin, const double*& cursor);
void read_flat(Mlp& mlp, const double*& cursor);

}  // namespace lagdyn
