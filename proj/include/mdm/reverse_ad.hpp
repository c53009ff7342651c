#pragma once

/// \file
/// Minimal tape-based reverse-mode differentiation for scalar programs with
/// many inputs and one output. One tape per thread.

#include <cstddef>
#include <vector>

namespace mdm::ad {

struct Node {
  int a = -1;
  int b = -1;
  double da = 0.0;
  double db = 0.0;
};

class Tape {
 public:
  int push(int a, double da, int b, double db) {
    nodes_.push_back({a, b, da, db});
    return static_cast<int>(nodes_.size()) - 1;
  }
  int input() { return push(-1, 0.0, -1, 0.0); }
  void clear() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }

  /// Adjoints of every node with respect to `output`.
  std::vector<double> adjoints(int output) const {
    std::vector<double> adj(nodes_.size(), 0.0);
    if (output < 0) return adj;
    adj[static_cast<std::size_t>(output)] = 1.0;
    for (int i = output; i >= 0; --i) {
      const Node& n = nodes_[static_cast<std::size_t>(i)];
      const double g = adj[static_cast<std::size_t>(i)];
      if (g == 0.0) continue;
      if (n.a >= 0) adj[static_cast<std::size_t>(n.a)] += g * n.da;
      if (n.b >= 0) adj[static_cast<std::size_t>(n.b)] += g * n.db;
    }
    return adj;
  }

  static Tape& local() {
    thread_local Tape tape;
    return tape;
  }

 private:
  std::vector<Node> nodes_;
};

/// Active scalar. Constants carry index -1 and never touch the tape.
struct Var {
  double val = 0.0;
  int idx = -1;

  Var() = default;
  Var(double v) : val(v) {}  // NOLINT: constants promote implicitly
  Var(double v, int i) : val(v), idx(i) {}

  static Var input(double v) { return {v, Tape::local().input()}; }
};

namespace detail {

inline Var unary(double val, const Var& x, double dx) {
  if (x.idx < 0) return Var(val);
  return {val, Tape::local().push(x.idx, dx, -1, 0.0)};
}

inline Var binary(double val, const Var& x, double dx, const Var& y, double dy) {
  if (x.idx < 0 && y.idx < 0) return Var(val);
  if (x.idx < 0) return unary(val, y, dy);
  if (y.idx < 0) return unary(val, x, dx);
  return {val, Tape::local().push(x.idx, dx, y.idx, dy)};
}

}  // namespace detail

inline Var operator+(const Var& x, const Var& y) { return detail::binary(x.val + y.val, x, 1.0, y, 1.0); }
inline Var operator-(const Var& x, const Var& y) { return detail::binary(x.val - y.val, x, 1.0, y, -1.0); }
inline Var operator*(const Var& x, const Var& y) { return detail::binary(x.val * y.val, x, y.val, y, x.val); }
inline Var operator/(const Var& x, const Var& y) {
  const double inv = 1.0 / y.val;
  return detail::binary(x.val * inv, x, inv, y, -x.val * inv * inv);
}
inline Var operator-(const Var& x) { return detail::unary(-x.val, x, -1.0); }

inline Var& operator+=(Var& x, const Var& y) { return x = x + y; }
inline Var& operator-=(Var& x, const Var& y) { return x = x - y; }
inline Var& operator*=(Var& x, const Var& y) { return x = x * y; }

inline double value(const Var& x) { return x.val; }
inline double value(double x) { return x; }

}  // namespace mdm::ad
