#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <vector>

#include "hyperco/common.hpp"

namespace hyperco::ad {

// Append-only record of scalar operations. Nodes have at most two parents and
// store the local partial derivative toward each; a gradient is one reverse
// sweep. Nodes are pushed in evaluation order, so the tape is already
// topologically sorted.
class Tape {
 public:
  struct Node {
    std::int32_t a, b;
    double da, db;
  };

  std::int32_t leaf() {
    nodes_.push_back(Node{-1, -1, 0.0, 0.0});
    return last();
  }

  std::int32_t unary(std::int32_t a, double da) {
    nodes_.push_back(Node{a, -1, da, 0.0});
    return last();
  }

  std::int32_t binary(std::int32_t a, std::int32_t b, double da, double db) {
    nodes_.push_back(Node{a, b, da, db});
    return last();
  }

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }
  void reserve(std::size_t n) { nodes_.reserve(n); }

  // Adjoints of every node with respect to `root`. Accumulation order is fixed
  // by node order, so results are reproducible.
  std::vector<double> gradient(std::int32_t root) const {
    std::vector<double> adjoint(nodes_.size(), 0.0);
    adjoint[static_cast<std::size_t>(root)] = 1.0;
    for (std::int32_t i = root; i >= 0; --i) {
      const Node& n = nodes_[static_cast<std::size_t>(i)];
      const double g = adjoint[static_cast<std::size_t>(i)];
      if (g == 0.0) continue;
      if (n.a >= 0) adjoint[static_cast<std::size_t>(n.a)] += n.da * g;
      if (n.b >= 0) adjoint[static_cast<std::size_t>(n.b)] += n.db * g;
    }
    return adjoint;
  }

 private:
  std::int32_t last() const { return static_cast<std::int32_t>(nodes_.size()) - 1; }
  std::vector<Node> nodes_;
};

// Value + node handle. Cheap to copy; all structure lives on the tape.
class Var {
 public:
  Var() = default;
  Var(Tape& tape, double value) : tape_(&tape), id_(tape.leaf()), v_(value) {}
  Var(Tape* tape, std::int32_t id, double value) : tape_(tape), id_(id), v_(value) {}

  double value() const { return v_; }
  std::int32_t id() const { return id_; }
  Tape* tape() const { return tape_; }

  Var& operator+=(const Var& o);
  Var& operator-=(const Var& o);
  Var& operator*=(const Var& o);
  Var& operator/=(const Var& o);

 private:
  Tape* tape_ = nullptr;
  std::int32_t id_ = -1;
  double v_ = 0.0;
};

inline double value_of(const Var& x) { return x.value(); }

inline Var make_like(const Var& exemplar, double v) {
  return Var(*exemplar.tape(), v);
}

inline Var operator+(const Var& x, const Var& y) {
  assert(x.tape() == y.tape());
  return Var(x.tape(), x.tape()->binary(x.id(), y.id(), 1.0, 1.0), x.value() + y.value());
}
inline Var operator+(const Var& x, double c) {
  return Var(x.tape(), x.tape()->unary(x.id(), 1.0), x.value() + c);
}
inline Var operator+(double c, const Var& x) { return x + c; }

inline Var operator-(const Var& x) {
  return Var(x.tape(), x.tape()->unary(x.id(), -1.0), -x.value());
}
inline Var operator-(const Var& x, const Var& y) {
  assert(x.tape() == y.tape());
  return Var(x.tape(), x.tape()->binary(x.id(), y.id(), 1.0, -1.0), x.value() - y.value());
}
inline Var operator-(const Var& x, double c) {
  return Var(x.tape(), x.tape()->unary(x.id(), 1.0), x.value() - c);
}
inline Var operator-(double c, const Var& x) {
  return Var(x.tape(), x.tape()->unary(x.id(), -1.0), c - x.value());
}

inline Var operator*(const Var& x, const Var& y) {
  assert(x.tape() == y.tape());
  return Var(x.tape(), x.tape()->binary(x.id(), y.id(), y.value(), x.value()),
             x.value() * y.value());
}
inline Var operator*(const Var& x, double c) {
  return Var(x.tape(), x.tape()->unary(x.id(), c), x.value() * c);
}
inline Var operator*(double c, const Var& x) { return x * c; }

inline Var operator/(const Var& x, const Var& y) {
  assert(x.tape() == y.tape());
  const double inv = 1.0 / y.value();
  return Var(x.tape(),
             x.tape()->binary(x.id(), y.id(), inv, -x.value() * inv * inv),
             x.value() * inv);
}
inline Var operator/(const Var& x, double c) { return x * (1.0 / c); }
inline Var operator/(double c, const Var& y) {
  const double inv = 1.0 / y.value();
  return Var(y.tape(), y.tape()->unary(y.id(), -c * inv * inv), c * inv);
}

inline Var& Var::operator+=(const Var& o) { return *this = *this + o; }
inline Var& Var::operator-=(const Var& o) { return *this = *this - o; }
inline Var& Var::operator*=(const Var& o) { return *this = *this * o; }
inline Var& Var::operator/=(const Var& o) { return *this = *this / o; }

inline Var exp(const Var& x) {
  const double e = std::exp(x.value());
  return Var(x.tape(), x.tape()->unary(x.id(), e), e);
}

inline Var log(const Var& x) {
  return Var(x.tape(), x.tape()->unary(x.id(), 1.0 / x.value()), std::log(x.value()));
}

inline Var sqrt(const Var& x) {
  const double s = std::sqrt(x.value());
  const double d = s > 0.0 ? 0.5 / s : 0.0;
  return Var(x.tape(), x.tape()->unary(x.id(), d), s);
}

inline Var sinh(const Var& x) {
  return Var(x.tape(), x.tape()->unary(x.id(), std::cosh(x.value())), std::sinh(x.value()));
}

inline Var cosh(const Var& x) {
  return Var(x.tape(), x.tape()->unary(x.id(), std::sinh(x.value())), std::cosh(x.value()));
}

inline Var tanh(const Var& x) {
  const double t = std::tanh(x.value());
  return Var(x.tape(), x.tape()->unary(x.id(), 1.0 - t * t), t);
}

inline Var asinh(const Var& x) {
  const double u = x.value();
  return Var(x.tape(), x.tape()->unary(x.id(), 1.0 / std::sqrt(1.0 + u * u)), std::asinh(u));
}

// Clamped inverse functions mirror the double versions in common.hpp: the
// clamped region is constant, derivative zero, including at the boundary.
inline Var acosh_clamped(const Var& x) {
  const double u = x.value();
  if (u <= 1.0) return Var(x.tape(), x.tape()->unary(x.id(), 0.0), 0.0);
  return Var(x.tape(), x.tape()->unary(x.id(), 1.0 / std::sqrt(u * u - 1.0)), std::acosh(u));
}

inline Var asin_clamped(const Var& x) {
  const double u = x.value();
  if (u >= 1.0) return Var(x.tape(), x.tape()->unary(x.id(), 0.0), std::asin(1.0));
  if (u <= -1.0) return Var(x.tape(), x.tape()->unary(x.id(), 0.0), std::asin(-1.0));
  return Var(x.tape(), x.tape()->unary(x.id(), 1.0 / std::sqrt(1.0 - u * u)), std::asin(u));
}

inline Var acos_clamped(const Var& x) {
  const double u = x.value();
  if (u >= 1.0) return Var(x.tape(), x.tape()->unary(x.id(), 0.0), 0.0);
  if (u <= -1.0) return Var(x.tape(), x.tape()->unary(x.id(), 0.0), std::acos(-1.0));
  return Var(x.tape(), x.tape()->unary(x.id(), -1.0 / std::sqrt(1.0 - u * u)), std::acos(u));
}

// max(x, lo) with derivative 0 on the clamped side and at the kink, matching
// the hinge convention used by the losses.
inline Var clamp_min(const Var& x, double lo) {
  if (x.value() > lo) return Var(x.tape(), x.tape()->unary(x.id(), 1.0), x.value());
  return Var(x.tape(), x.tape()->unary(x.id(), 0.0), lo);
}

inline Var clamp_max(const Var& x, double hi) {
  if (x.value() < hi) return Var(x.tape(), x.tape()->unary(x.id(), 1.0), x.value());
  return Var(x.tape(), x.tape()->unary(x.id(), 0.0), hi);
}

}  // namespace hyperco::ad
