#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace lagdyn {

/// Reverse-mode tape. One tape per differentiation call; no global state,
/// so concurrent evaluations never share mutable storage.
class Tape {
 public:
  struct Node {
    double p0, p1;  // local partials
    int a0, a1;     // parent node ids, -1 when absent
  };

  int leaf() {
    nodes_.push_back({0.0, 0.0, -1, -1});
    return static_cast<int>(nodes_.size()) - 1;
  }
  int unary(int a, double pa) {
    nodes_.push_back({pa, 0.0, a, -1});
    return static_cast<int>(nodes_.size()) - 1;
  }
  int binary(int a, double pa, int b, double pb) {
    nodes_.push_back({pa, pb, a, b});
    return static_cast<int>(nodes_.size()) - 1;
  }

  /// Adjoints of every node given d(output)/d(output) = 1.
  std::vector<double> backward(int output) const {
    std::vector<double> adj(nodes_.size(), 0.0);
    if (output >= 0) adj[static_cast<std::size_t>(output)] = 1.0;
    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
      const Node& n = nodes_[static_cast<std::size_t>(i)];
      const double a = adj[static_cast<std::size_t>(i)];
      if (a == 0.0) continue;
      if (n.a0 >= 0) adj[static_cast<std::size_t>(n.a0)] += n.p0 * a;
      if (n.a1 >= 0) adj[static_cast<std::size_t>(n.a1)] += n.p1 * a;
    }
    return adj;
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<Node> nodes_;
};

/// Scalar recorded on a Tape. Constants carry a null tape and id -1;
/// mixing constants with recorded values is allowed.
class Rvar {
 public:
  Rvar() = default;
  Rvar(double v) : v_(v) {}
  Rvar(double v, Tape* tape) : v_(v), tape_(tape), id_(tape->leaf()) {}

  double value() const { return v_; }
  int id() const { return id_; }
  Tape* tape() const { return tape_; }

  friend Rvar operator+(const Rvar& x) { return x; }
  friend Rvar operator-(const Rvar& x) { return make(-x.v_, x, -1.0); }

  friend Rvar operator+(const Rvar& a, const Rvar& b) { return make(a.v_ + b.v_, a, 1.0, b, 1.0); }
  friend Rvar operator-(const Rvar& a, const Rvar& b) { return make(a.v_ - b.v_, a, 1.0, b, -1.0); }
  friend Rvar operator*(const Rvar& a, const Rvar& b) {
    return make(a.v_ * b.v_, a, b.v_, b, a.v_);
  }
  friend Rvar operator/(const Rvar& a, const Rvar& b) {
    const double q = a.v_ / b.v_;
    return make(q, a, 1.0 / b.v_, b, -q / b.v_);
  }

  Rvar& operator+=(const Rvar& b) { return *this = *this + b; }
  Rvar& operator-=(const Rvar& b) { return *this = *this - b; }
  Rvar& operator*=(const Rvar& b) { return *this = *this * b; }
  Rvar& operator/=(const Rvar& b) { return *this = *this / b; }

  friend bool operator<(const Rvar& a, const Rvar& b) { return a.v_ < b.v_; }
  friend bool operator>(const Rvar& a, const Rvar& b) { return a.v_ > b.v_; }
  friend bool operator<=(const Rvar& a, const Rvar& b) { return a.v_ <= b.v_; }
  friend bool operator>=(const Rvar& a, const Rvar& b) { return a.v_ >= b.v_; }

  friend Rvar sqrt(const Rvar& x) {
    const double r = std::sqrt(x.v_);
    return make(r, x, 0.5 / r);
  }
  friend Rvar sin(const Rvar& x) { return make(std::sin(x.v_), x, std::cos(x.v_)); }
  friend Rvar cos(const Rvar& x) { return make(std::cos(x.v_), x, -std::sin(x.v_)); }
  friend Rvar exp(const Rvar& x) {
    const double e = std::exp(x.v_);
    return make(e, x, e);
  }
  friend Rvar log(const Rvar& x) { return make(std::log(x.v_), x, 1.0 / x.v_); }
  friend Rvar tanh(const Rvar& x) {
    const double t = std::tanh(x.v_);
    return make(t, x, 1.0 - t * t);
  }

 private:
  static Rvar make(double v, const Rvar& a, double pa) {
    Rvar r(v);
    if (a.tape_) {
      r.tape_ = a.tape_;
      r.id_ = a.tape_->unary(a.id_, pa);
    }
    return r;
  }
  static Rvar make(double v, const Rvar& a, double pa, const Rvar& b, double pb) {
    Rvar r(v);
    Tape* t = a.tape_ ? a.tape_ : b.tape_;
    if (!t) return r;
    assert(!a.tape_ || !b.tape_ || a.tape_ == b.tape_);
    r.tape_ = t;
    if (a.tape_ && b.tape_) {
      r.id_ = t->binary(a.id_, pa, b.id_, pb);
    } else if (a.tape_) {
      r.id_ = t->unary(a.id_, pa);
    } else {
      r.id_ = t->unary(b.id_, pb);
    }
    return r;
  }

  double v_ = 0.0;
  Tape* tape_ = nullptr;
  int id_ = -1;
};

inline double primal(const Rvar& x) { return x.value(); }

}  // namespace lagdyn
