#pragma once

/// \file
/// Second-order jets on a four-dimensional chart: value, gradient and
/// symmetric Hessian of a smooth scalar, propagated exactly through
/// arithmetic and analytic primitives.

#include <array>
#include <cmath>
#include <complex>
#include <type_traits>
#include <utility>

namespace mdm {

inline constexpr int kDim = 4;
inline constexpr int kSymSize = 10;

/// Packed index of entry (i, j) of a symmetric 4x4 matrix.
constexpr int sym_index(int i, int j) noexcept {
  if (i > j) std::swap(i, j);
  return i * kDim - i * (i - 1) / 2 + (j - i);
}

template <typename T>
struct Jet2 {
  using scalar_type = T;

  T value{};
  std::array<T, kDim> grad{};
  std::array<T, kSymSize> hess{};

  constexpr Jet2() = default;
  constexpr Jet2(T v) : value(v) {}  // NOLINT: implicit constant promotion
  template <typename U>
    requires(std::is_arithmetic_v<U> && !std::is_same_v<U, T>)
  constexpr Jet2(U v) : value(static_cast<T>(v)) {}  // NOLINT

  /// Coordinate function x^axis evaluated at `at`.
  static constexpr Jet2 variable(T at, int axis) {
    Jet2 j(at);
    j.grad[axis] = T(1);
    return j;
  }

  constexpr T h(int i, int j) const { return hess[sym_index(i, j)]; }
  constexpr T& h(int i, int j) { return hess[sym_index(i, j)]; }

  constexpr Jet2& operator+=(const Jet2& o) {
    value += o.value;
    for (int i = 0; i < kDim; ++i) grad[i] += o.grad[i];
    for (int k = 0; k < kSymSize; ++k) hess[k] += o.hess[k];
    return *this;
  }
  constexpr Jet2& operator-=(const Jet2& o) {
    value -= o.value;
    for (int i = 0; i < kDim; ++i) grad[i] -= o.grad[i];
    for (int k = 0; k < kSymSize; ++k) hess[k] -= o.hess[k];
    return *this;
  }
  constexpr Jet2& operator*=(const T& s) {
    value *= s;
    for (auto& g : grad) g *= s;
    for (auto& x : hess) x *= s;
    return *this;
  }
  constexpr Jet2& operator*=(const Jet2& o) { return *this = *this * o; }

  friend constexpr Jet2 operator-(Jet2 a) {
    a *= T(-1);
    return a;
  }
  friend constexpr Jet2 operator+(Jet2 a, const Jet2& b) { return a += b; }
  friend constexpr Jet2 operator-(Jet2 a, const Jet2& b) { return a -= b; }

  friend constexpr Jet2 operator*(const Jet2& a, const Jet2& b) {
    Jet2 r;
    r.value = a.value * b.value;
    for (int i = 0; i < kDim; ++i) r.grad[i] = a.grad[i] * b.value + a.value * b.grad[i];
    for (int i = 0; i < kDim; ++i) {
      for (int j = i; j < kDim; ++j) {
        const int k = sym_index(i, j);
        r.hess[k] = a.hess[k] * b.value + a.grad[i] * b.grad[j] + a.grad[j] * b.grad[i] +
                    a.value * b.hess[k];
      }
    }
    return r;
  }
  friend constexpr Jet2 operator*(Jet2 a, const T& s) { return a *= s; }
  friend constexpr Jet2 operator*(const T& s, Jet2 a) { return a *= s; }

  template <typename U>
    requires(std::is_arithmetic_v<U> && !std::is_same_v<U, T>)
  friend constexpr Jet2 operator*(Jet2 a, U s) {
    return a *= T(s);
  }
  template <typename U>
    requires(std::is_arithmetic_v<U> && !std::is_same_v<U, T>)
  friend constexpr Jet2 operator*(U s, Jet2 a) {
    return a *= T(s);
  }

  friend constexpr Jet2 operator/(const Jet2& a, const Jet2& b) { return a * reciprocal(b); }
  friend constexpr Jet2 operator/(Jet2 a, const T& s) { return a *= (T(1) / s); }
  friend constexpr Jet2 operator/(const T& s, const Jet2& b) { return reciprocal(b) * s; }
};

/// f(a) given f, f', f'' evaluated at a.value (chain rule to second order).
template <typename T>
constexpr Jet2<T> compose(const Jet2<T>& a, T f0, T f1, T f2) {
  Jet2<T> r;
  r.value = f0;
  for (int i = 0; i < kDim; ++i) r.grad[i] = f1 * a.grad[i];
  for (int i = 0; i < kDim; ++i) {
    for (int j = i; j < kDim; ++j) {
      const int k = sym_index(i, j);
      r.hess[k] = f2 * a.grad[i] * a.grad[j] + f1 * a.hess[k];
    }
  }
  return r;
}

template <typename T>
constexpr Jet2<T> reciprocal(const Jet2<T>& a) {
  const T inv = T(1) / a.value;
  return compose(a, inv, -inv * inv, T(2) * inv * inv * inv);
}

template <typename T>
Jet2<T> sin(const Jet2<T>& a) {
  using std::cos;
  using std::sin;
  const T s = sin(a.value);
  return compose(a, s, cos(a.value), -s);
}

template <typename T>
Jet2<T> cos(const Jet2<T>& a) {
  using std::cos;
  using std::sin;
  const T c = cos(a.value);
  return compose(a, c, -sin(a.value), -c);
}

template <typename T>
Jet2<T> exp(const Jet2<T>& a) {
  using std::exp;
  const T e = exp(a.value);
  return compose(a, e, e, e);
}

template <typename T>
Jet2<T> log(const Jet2<T>& a) {
  using std::log;
  const T inv = T(1) / a.value;
  return compose(a, log(a.value), inv, -inv * inv);
}

template <typename T>
Jet2<T> sqrt(const Jet2<T>& a) {
  using std::sqrt;
  const T r = sqrt(a.value);
  const T d1 = T(0.5) / r;
  return compose(a, r, d1, -d1 / (T(2) * a.value));
}

template <typename T>
Jet2<T> pow(const Jet2<T>& a, double p) {
  using std::pow;
  const T v = pow(a.value, T(p));
  const T d1 = T(p) * pow(a.value, T(p - 1));
  const T d2 = T(p * (p - 1)) * pow(a.value, T(p - 2));
  return compose(a, v, d1, d2);
}

/// Entrywise complex conjugate; valid because chart coordinates are real.
template <typename T>
Jet2<std::complex<T>> conj(const Jet2<std::complex<T>>& a) {
  Jet2<std::complex<T>> r;
  r.value = std::conj(a.value);
  for (int i = 0; i < kDim; ++i) r.grad[i] = std::conj(a.grad[i]);
  for (int k = 0; k < kSymSize; ++k) r.hess[k] = std::conj(a.hess[k]);
  return r;
}

template <typename T>
Jet2<std::complex<T>> real_part(const Jet2<std::complex<T>>& a) {
  return (a + conj(a)) * std::complex<T>(0.5);
}

template <typename T>
Jet2<std::complex<T>> imag_part(const Jet2<std::complex<T>>& a) {
  return (a - conj(a)) * std::complex<T>(0.0, -0.5);
}

/// Promotes a real jet to a complex jet.
template <typename T>
Jet2<std::complex<T>> complexify(const Jet2<T>& a) {
  Jet2<std::complex<T>> r;
  r.value = a.value;
  for (int i = 0; i < kDim; ++i) r.grad[i] = a.grad[i];
  for (int k = 0; k < kSymSize; ++k) r.hess[k] = a.hess[k];
  return r;
}

/// Partial derivative along `axis`, as a jet one order shallower (Hessian
/// slot of the result is not known and left zero).
template <typename T>
constexpr Jet2<T> partial(const Jet2<T>& a, int axis) {
  Jet2<T> r;
  r.value = a.grad[axis];
  for (int j = 0; j < kDim; ++j) r.grad[j] = a.h(axis, j);
  return r;
}

using cplx = std::complex<double>;
using Jet = Jet2<cplx>;
using RealJet = Jet2<double>;

}  // namespace mdm
