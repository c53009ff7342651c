#pragma once

/// \file
/// Small dense linear algebra generic over the scalar type, so the same
/// elimination runs on doubles, jets and taped reverse-mode variables.

#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mdm/jet.hpp"

namespace mdm {

struct SingularMatrix : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline double magnitude(double x) { return std::abs(x); }
inline double magnitude(const cplx& x) { return std::abs(x); }
template <typename T>
double magnitude(const Jet2<T>& x) {
  return magnitude(x.value);
}

inline bool is_exact_zero(double x) { return x == 0.0; }
inline bool is_exact_zero(const cplx& x) { return x == cplx(0.0); }
template <typename T>
bool is_exact_zero(const Jet2<T>& x) {
  if (!is_exact_zero(x.value)) return false;
  for (const auto& g : x.grad)
    if (!is_exact_zero(g)) return false;
  for (const auto& h : x.hess)
    if (!is_exact_zero(h)) return false;
  return true;
}

template <typename T>
using Mat4 = std::array<std::array<T, 4>, 4>;

/// Solves A x = b in place by Gaussian elimination with partial pivoting on
/// the magnitude of the leading value. `a` is row-major n x n.
template <typename T>
std::vector<T> solve_dense(std::vector<T> a, std::vector<T> b, int n, double pivot_floor = 0.0) {
  for (int col = 0; col < n; ++col) {
    int piv = col;
    double best = magnitude(a[static_cast<std::size_t>(col * n + col)]);
    for (int r = col + 1; r < n; ++r) {
      const double m = magnitude(a[static_cast<std::size_t>(r * n + col)]);
      if (m > best) {
        best = m;
        piv = r;
      }
    }
    if (!(best > pivot_floor)) throw SingularMatrix("solve_dense: matrix is singular to working precision");
    if (piv != col) {
      for (int c = 0; c < n; ++c) std::swap(a[static_cast<std::size_t>(col * n + c)], a[static_cast<std::size_t>(piv * n + c)]);
      std::swap(b[static_cast<std::size_t>(col)], b[static_cast<std::size_t>(piv)]);
    }
    const T inv = T(1.0) / a[static_cast<std::size_t>(col * n + col)];
    for (int r = col + 1; r < n; ++r) {
      const std::size_t rc = static_cast<std::size_t>(r * n + col);
      if (is_exact_zero(a[rc])) continue;
      const T f = a[rc] * inv;
      for (int c = col; c < n; ++c)
        a[static_cast<std::size_t>(r * n + c)] -= f * a[static_cast<std::size_t>(col * n + c)];
      b[static_cast<std::size_t>(r)] -= f * b[static_cast<std::size_t>(col)];
    }
  }
  std::vector<T> x(static_cast<std::size_t>(n));
  for (int r = n - 1; r >= 0; --r) {
    T acc = b[static_cast<std::size_t>(r)];
    for (int c = r + 1; c < n; ++c) acc -= a[static_cast<std::size_t>(r * n + c)] * x[static_cast<std::size_t>(c)];
    x[static_cast<std::size_t>(r)] = acc / a[static_cast<std::size_t>(r * n + r)];
  }
  return x;
}

template <typename T>
T determinant(Mat4<T> m) {
  T det = T(1.0);
  for (int col = 0; col < 4; ++col) {
    int piv = col;
    for (int r = col + 1; r < 4; ++r)
      if (magnitude(m[r][col]) > magnitude(m[piv][col])) piv = r;
    if (magnitude(m[piv][col]) == 0.0) return T(0.0);
    if (piv != col) {
      std::swap(m[piv], m[col]);
      det = -det;
    }
    det = det * m[col][col];
    const T inv = T(1.0) / m[col][col];
    for (int r = col + 1; r < 4; ++r) {
      const T f = m[r][col] * inv;
      for (int c = col; c < 4; ++c) m[r][c] -= f * m[col][c];
    }
  }
  return det;
}

template <typename T>
Mat4<T> inverse(const Mat4<T>& m) {
  Mat4<T> out{};
  std::vector<T> a(16);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) a[static_cast<std::size_t>(i * 4 + j)] = m[i][j];
  for (int col = 0; col < 4; ++col) {
    std::vector<T> e(4, T(0.0));
    e[static_cast<std::size_t>(col)] = T(1.0);
    const auto x = solve_dense(a, e, 4);
    for (int r = 0; r < 4; ++r) out[r][col] = x[static_cast<std::size_t>(r)];
  }
  return out;
}

template <typename T>
Mat4<T> matmul(const Mat4<T>& a, const Mat4<T>& b) {
  Mat4<T> r{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      T acc = T(0.0);
      for (int k = 0; k < 4; ++k) acc += a[i][k] * b[k][j];
      r[i][j] = acc;
    }
  return r;
}

template <typename T>
Mat4<T> transposed(const Mat4<T>& a) {
  Mat4<T> r{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) r[i][j] = a[j][i];
  return r;
}

}  // namespace mdm
