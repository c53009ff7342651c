#pragma once

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "mdm/cartan_su3.hpp"
#include "mdm/fields.hpp"
#include "mdm/frame_geometry.hpp"

namespace mdm::test {

/// Random scalar function with exact jets at p.
inline Jet random_function(Rng& rng, const Point& p, double amp = 0.7) {
  const auto x = coordinates(p);
  const TrigPolynomial re = TrigPolynomial::random(rng, amp, 2, 3);
  const TrigPolynomial im = TrigPolynomial::random(rng, amp, 2, 3);
  return re(x) + im(x) * cplx(0.0, 1.0);
}

/// rows x cols matrix of random complex grade-p forms at p.
inline MatrixForm random_form(Rng& rng, const Point& p, int rows, int cols, int grade) {
  MatrixForm f(rows, cols, grade);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      for (int k = 0; k < f.basis_size(); ++k) f(r, c, k) = random_function(rng, p);
  return f;
}

/// Random traceless anti-Hermitian 2x2 matrix of 1-forms.
inline MatrixForm random_su2_form(Rng& rng, const Point& p) {
  const auto x = coordinates(p);
  std::array<MatrixForm, 3> c;
  for (auto& comp : c) comp = TrigOneForm::random(rng, 0.6, 2)(x);
  return su2_one_form(c[0], c[1], c[2]);
}

inline Point random_point(Rng& rng) { return sample_box(rng, 0.0, 2.0 * std::numbers::pi); }

/// Frobenius norm over every matrix entry and basis coefficient value.
inline double frobenius(const MatrixForm& f) {
  double acc = 0.0;
  for (const auto& j : f.coefficients()) acc += std::norm(j.value);
  return std::sqrt(acc);
}

/// Constant U(2) element exp(i phi) * SU(2) rotation.
inline std::array<std::array<cplx, 2>, 2> random_u2(Rng& rng) {
  const double a = rng.uniform(0, 2 * std::numbers::pi);
  const double b = rng.uniform(0, 2 * std::numbers::pi);
  const double t = rng.uniform(0, std::numbers::pi / 2);
  const double phi = rng.uniform(0, 2 * std::numbers::pi);
  const cplx ph = std::polar(1.0, phi);
  const cplx x = std::polar(std::cos(t), a);
  const cplx y = std::polar(std::sin(t), b);
  return {{{ph * x, ph * y}, {-ph * std::conj(y), ph * std::conj(x)}}};
}

inline MatrixForm as_matrix(const std::array<std::array<cplx, 2>, 2>& u) {
  return MatrixForm::constant_matrix(2, 2, {u[0][0], u[0][1], u[1][0], u[1][1]});
}

inline UnitaryCoframe rotate(const UnitaryCoframe& psi, const std::array<std::array<cplx, 2>, 2>& u) {
  UnitaryCoframe out;
  out.psi = wedge(as_matrix(u), psi.psi);
  return out;
}

}  // namespace mdm::test
