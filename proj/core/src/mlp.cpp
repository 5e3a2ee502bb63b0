#include "lagdyn/mlp.hpp"

#include <cmath>

namespace lagdyn {

Linear make_linear(int out, int in, Rng& rng) {
  Linear lin;
  lin.w.resize(out, in);
  const double scale = 1.0 / std::sqrt(static_cast<double>(in));
  for (int r = 0; r < out; ++r)
    for (int c = 0; c < in; ++c) lin.w(r, c) = rng.uniform(-scale, scale);
  lin.b = Eigen::VectorXd::Zero(out);
  return lin;
}

Mlp make_mlp(int in, int hidden, int hidden_layers, int out, Rng& rng) {
  Mlp mlp;
  int width = in;
  for (int l = 0; l < hidden_layers; ++l) {
    mlp.layers.push_back(make_linear(hidden, width, rng));
    width = hidden;
  }
  mlp.layers.push_back(make_linear(out, width, rng));
  return mlp;
}

LinearGrad zero_grad(const Linear& lin) {
  return {Eigen::MatrixXd::Zero(lin.w.rows(), lin.w.cols()),
          Eigen::VectorXd::Zero(lin.b.size())};
}

MlpGrad zero_grad(const Mlp& mlp) {
  MlpGrad g;
  for (const Linear& l : mlp.layers) g.grads.push_back(zero_grad(l));
  return g;
}

Batch linear_forward(const Linear& lin, const Batch& x) {
  Batch y;
  y.entities = x.entities;
  y.channels = x.channels;
  y.m.noalias() = x.m * lin.w.transpose();
  y.ch(0).rowwise() += lin.b.transpose();
  return y;
}

Batch squareplus_forward(const Batch& x, double b, const RingSpec& ring) {
  Batch y;
  y.entities = x.entities;
  y.channels = x.channels;
  y.m.resize(x.m.rows(), x.m.cols());

  const auto v = x.ch(0).array();
  const auto root = (v * v + b).sqrt();
  const auto d1 = 0.5 * (1.0 + v / root);
  y.ch(0) = (0.5 * (v + root)).matrix();
  for (int c = 1; c < x.channels; ++c) y.ch(c) = (d1 * x.ch(c).array()).matrix();
  if (ring.second_order()) {
    const auto d2 = 0.5 * b / (root * root * root);
    y.ch(ring.ab) += (d2 * x.ch(ring.a).array() * x.ch(ring.b).array()).matrix();
  }
  return y;
}

Batch linear_backward(const Linear& lin, const Batch& x, const Batch& ybar, const RingSpec& ring,
                      LinearGrad* grad) {
  if (grad) {
    for (const auto& [c, weight] : ring.selection) {
      grad->w.noalias() += weight * (ybar.ch(0).transpose() * x.ch(c));
      if (c != 0) grad->w.noalias() += weight * (ybar.ch(c).transpose() * x.ch(0));
      if (c == ring.ab) {
        grad->w.noalias() += weight * (ybar.ch(ring.a).transpose() * x.ch(ring.b));
        grad->w.noalias() += weight * (ybar.ch(ring.b).transpose() * x.ch(ring.a));
      }
      grad->b.noalias() += weight * ybar.ch(c).colwise().sum().transpose();
    }
  }
  Batch xbar;
  xbar.entities = x.entities;
  xbar.channels = x.channels;
  xbar.m.noalias() = ybar.m * lin.w;
  return xbar;
}

Batch matmul_forward(const Eigen::MatrixXd& w, const Batch& x) {
  Batch y;
  y.entities = x.entities;
  y.channels = x.channels;
  y.m.noalias() = x.m * w.transpose();
  return y;
}

Batch matmul_backward(const Eigen::MatrixXd& w, const Batch& x, const Batch& ybar,
                      const RingSpec& ring, Eigen::MatrixXd* grad) {
  if (grad) {
    for (const auto& [c, weight] : ring.selection) {
      grad->noalias() += weight * (ybar.ch(0).transpose() * x.ch(c));
      if (c != 0) grad->noalias() += weight * (ybar.ch(c).transpose() * x.ch(0));
      if (c == ring.ab) {
        grad->noalias() += weight * (ybar.ch(ring.a).transpose() * x.ch(ring.b));
        grad->noalias() += weight * (ybar.ch(ring.b).transpose() * x.ch(ring.a));
      }
    }
  }
  Batch xbar;
  xbar.entities = x.entities;
  xbar.channels = x.channels;
  xbar.m.noalias() = ybar.m * w;
  return xbar;
}

Batch squareplus_backward(const Batch& x_pre, const Batch& ybar, double b, const RingSpec& ring) {
  const auto v = x_pre.ch(0).array();
  const auto root = (v * v + b).sqrt();
  const auto d1 = 0.5 * (1.0 + v / root);
  const auto d2 = 0.5 * b / (root * root * root);

  // Ring product ybar (x) s'(x_ring); s'(x_ring) has value d1 and
  // tangents d2 * x_c (cross channel also picks up d3 * x_a * x_b).
  Batch xbar;
  xbar.entities = x_pre.entities;
  xbar.channels = x_pre.channels;
  xbar.m.resize(x_pre.m.rows(), x_pre.m.cols());
  xbar.ch(0) = (ybar.ch(0).array() * d1).matrix();
  for (int c = 1; c < x_pre.channels; ++c)
    xbar.ch(c) =
        (ybar.ch(0).array() * d2 * x_pre.ch(c).array() + ybar.ch(c).array() * d1).matrix();
  if (ring.second_order()) {
    const auto d3 = -1.5 * b * v / (root * root * root * root * root);
    xbar.ch(ring.ab) += (ybar.ch(0).array() * d3 * x_pre.ch(ring.a).array() *
                             x_pre.ch(ring.b).array() +
                         ybar.ch(ring.a).array() * d2 * x_pre.ch(ring.b).array() +
                         ybar.ch(ring.b).array() * d2 * x_pre.ch(ring.a).array())
                            .matrix();
  }
  return xbar;
}

MlpTrace mlp_forward(const Mlp& mlp, const Batch& x, double sp_b, const RingSpec& ring) {
  MlpTrace trace;
  Batch cur = x;
  const int n = static_cast<int>(mlp.layers.size());
  for (int l = 0; l + 1 < n; ++l) {
    trace.in.push_back(cur);
    Batch pre = linear_forward(mlp.layers[static_cast<std::size_t>(l)], cur);
    cur = squareplus_forward(pre, sp_b, ring);
    trace.pre.push_back(std::move(pre));
  }
  trace.in.push_back(cur);
  trace.out = linear_forward(mlp.layers[static_cast<std::size_t>(n - 1)], cur);
  return trace;
}

Batch mlp_backward(const Mlp& mlp, const MlpTrace& trace, const Batch& ybar, double sp_b,
                   const RingSpec& ring, MlpGrad* grad) {
  const int n = static_cast<int>(mlp.layers.size());
  Batch bar = linear_backward(mlp.layers[static_cast<std::size_t>(n - 1)],
                              trace.in[static_cast<std::size_t>(n - 1)], ybar, ring,
                              grad ? &grad->grads[static_cast<std::size_t>(n - 1)] : nullptr);
  for (int l = n - 2; l >= 0; --l) {
    bar = squareplus_backward(trace.pre[static_cast<std::size_t>(l)], bar, sp_b, ring);
    bar = linear_backward(mlp.layers[static_cast<std::size_t>(l)],
                          trace.in[static_cast<std::size_t>(l)], bar, ring,
                          grad ? &grad->grads[static_cast<std::size_t>(l)] : nullptr);
  }
  return bar;
}

Eigen::VectorXd ring_col_product(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int entities,
                                 const RingSpec& ring) {
  Eigen::VectorXd out(x.size());
  const auto xc = [&](int c) { return x.segment(c * entities, entities).array(); };
  const auto yc = [&](int c) { return y.segment(c * entities, entities).array(); };
  out.segment(0, entities) = (xc(0) * yc(0)).matrix();
  for (int c = 1; c < ring.channels; ++c)
    out.segment(c * entities, entities) = (xc(0) * yc(c) + xc(c) * yc(0)).matrix();
  if (ring.second_order())
    out.segment(ring.ab * entities, entities) +=
        (xc(ring.a) * yc(ring.b) + xc(ring.b) * yc(ring.a)).matrix();
  return out;
}

void append_flat(const Linear& lin, std::vector<double>& out) {
  for (Eigen::Index r = 0; r < lin.w.rows(); ++r)
    for (Eigen::Index c = 0; c < lin.w.cols(); ++c) out.push_back(lin.w(r, c));
  for (Eigen::Index i = 0; i < lin.b.size(); ++i) out.push_back(lin.b[i]);
}

void append_flat(const Mlp& mlp, std::vector<double>& out) {
  for (const Linear& l : mlp.layers) append_flat(l, out);
}

void append_flat(const LinearGrad& lin, std::vector<double>& out) {
  for (Eigen::Index r = 0; r < lin.w.rows(); ++r)
    for (Eigen::Index c = 0; c < lin.w.cols(); ++c) out.push_back(lin.w(r, c));
  for (Eigen::Index i = 0; i < lin.b.size(); ++i) out.push_back(lin.b[i]);
}

void append_flat(const MlpGrad& mlp, std::vector<double>& out) {
  for (const LinearGrad& l : mlp.grads) append_flat(l, out);
}

void read_flat(Linear& lin, const double*& cursor) {
  for (Eigen::Index r = 0; r < lin.w.rows(); ++r)
    for (Eigen::Index c = 0; c < lin.w.cols(); ++c) lin.w(r, c) = *cursor++;
  for (Eigen::Index i = 0; i < lin.b.size(); ++i) lin.b[i] = *cursor++;
}

void read_flat(Mlp& mlp, const double*& cursor) {
  for (Linear& l : mlp.layers) read_flat(l, cursor);
}

}  // namespace lagdyn
