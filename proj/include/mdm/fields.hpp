#pragma once

/// \file
/// Smooth fields on a 4-dimensional chart built from a closed set of analytic
/// primitives, so that every jet they produce is exact. Includes the seeded
/// random test-data generator and the named background geometries.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "mdm/coframe.hpp"
#include "mdm/forms.hpp"

namespace mdm {

using Point = std::array<double, 4>;

/// Coordinate jets x^mu at `p`.
inline std::array<Jet, 4> coordinates(const Point& p) {
  std::array<Jet, 4> x;
  for (int mu = 0; mu < 4; ++mu) x[mu] = Jet::variable(cplx(p[mu]), mu);
  return x;
}

/// Portable seeded generator: a 64-bit Mersenne twister and hand-rolled
/// uniform draws so sequences do not depend on the standard library's
/// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int integer(int lo, int hi) { return lo + static_cast<int>(uniform() * (hi - lo + 1)); }

 private:
  std::mt19937_64 engine_;
};

/// sum_k amp_k cos(k . x + phase_k), with integer wave vectors.
struct TrigPolynomial {
  struct Term {
    double amp = 0.0;
    std::array<int, 4> k{};
    double phase = 0.0;
  };
  std::vector<Term> terms;
  double offset = 0.0;

  Jet operator()(const std::array<Jet, 4>& x) const {
    Jet acc(offset);
    for (const auto& t : terms) {
      Jet arg(t.phase);
      for (int mu = 0; mu < 4; ++mu)
        if (t.k[mu] != 0) arg += x[mu] * static_cast<double>(t.k[mu]);
      acc += cos(arg) * t.amp;
    }
    return acc;
  }

  double value(const Point& p) const {
    double acc = offset;
    for (const auto& t : terms) {
      double arg = t.phase;
      for (int mu = 0; mu < 4; ++mu) arg += t.k[mu] * p[mu];
      acc += t.amp * std::cos(arg);
    }
    return acc;
  }

  /// Random polynomial whose amplitudes sum to at most `amplitude`.
  static TrigPolynomial random(Rng& rng, double amplitude, int max_wavenumber, int n_terms = 2) {
    TrigPolynomial p;
    for (int t = 0; t < n_terms; ++t) {
      Term term;
      term.amp = amplitude / n_terms * rng.uniform(-1.0, 1.0);
      for (auto& k : term.k) k = rng.integer(-max_wavenumber, max_wavenumber);
      term.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      p.terms.push_back(term);
    }
    return p;
  }
};

/// Real 1-form field sum_mu c_mu(x) dx^mu with trig-polynomial coefficients.
struct TrigOneForm {
  std::array<TrigPolynomial, 4> c;

  MatrixForm operator()(const std::array<Jet, 4>& x) const {
    MatrixForm f(1, 1, 1);
    for (int mu = 0; mu < 4; ++mu) f(0, 0, mu) = c[mu](x);
    return f;
  }

  static TrigOneForm random(Rng& rng, double amplitude, int max_wavenumber) {
    TrigOneForm f;
    for (auto& p : f.c) p = TrigPolynomial::random(rng, amplitude, max_wavenumber);
    return f;
  }
};

/// Coframe field e^I_mu(x) = delta^I_mu + perturbation, trig-polynomial entries.
struct TrigCoframe {
  Mat4<double> base{};
  std::array<std::array<TrigPolynomial, 4>, 4> pert;

  Coframe operator()(const std::array<Jet, 4>& x) const {
    Mat4<Jet> m{};
    for (int i = 0; i < 4; ++i)
      for (int mu = 0; mu < 4; ++mu) m[i][mu] = Jet(base[i][mu]) + pert[i][mu](x);
    return Coframe::from_matrix(m);
  }

  static TrigCoframe flat() {
    TrigCoframe f;
    for (int i = 0; i < 4; ++i) f.base[i][i] = 1.0;
    return f;
  }

  /// Flat frame plus perturbations of amplitude <= `amplitude` (per entry) and
  /// wavenumber <= `max_wavenumber`; nondegenerate for amplitude < 0.25.
  static TrigCoframe random(Rng& rng, double amplitude = 0.1, int max_wavenumber = 2) {
    TrigCoframe f = flat();
    for (auto& row : f.pert)
      for (auto& p : row) p = TrigPolynomial::random(rng, amplitude, max_wavenumber);
    return f;
  }
};

/// Traceless anti-Hermitian 2x2 matrix of 1-forms
/// [[i A3, A1 + i A2], [-A1 + i A2, -i A3]] from three real 1-form fields.
inline MatrixForm su2_one_form(const MatrixForm& a1, const MatrixForm& a2, const MatrixForm& a3) {
  const cplx i(0.0, 1.0);
  return assemble({{i * a3, a1 + i * a2}, {-a1 + i * a2, -i * a3}});
}

enum class Domain { Periodic, Chart };

/// A named background: a unitary coframe field and (optionally) a U(1) field,
/// together with a sampler for evaluation points inside its chart.
struct Background {
  std::string name;
  Domain domain = Domain::Periodic;
  std::function<UnitaryCoframe(const Point&)> psi;
  std::function<Point(Rng&)> sample;

  Coframe coframe(const Point& p) const { return to_real(psi(p)); }
};

inline Point sample_box(Rng& rng, double lo, double hi) {
  Point p;
  for (auto& c : p) c = rng.uniform(lo, hi);
  return p;
}

inline Background flat_background() {
  Background b;
  b.name = "flat";
  b.psi = [](const Point&) { return to_unitary(Coframe::standard()); };
  b.sample = [](Rng& rng) { return sample_box(rng, 0.0, 2.0 * std::numbers::pi); };
  return b;
}

/// Flat torus with a constant, non-orthogonal-to-the-chart coframe.
inline Background t4_background() {
  Background b;
  b.name = "t4";
  b.psi = [](const Point&) {
    const Mat4<double> m = {{{1.0, 0.2, 0.0, 0.1}, {0.0, 0.9, 0.3, 0.0}, {0.1, 0.0, 1.1, -0.2}, {0.0, -0.1, 0.0, 0.8}}};
    Mat4<Jet> mj{};
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) mj[i][j] = Jet(m[i][j]);
    return to_unitary(Coframe::from_matrix(mj));
  };
  b.sample = [](Rng& rng) { return sample_box(rng, 0.0, 2.0 * std::numbers::pi); };
  return b;
}

/// Unit S^2 x R^2 in the chart (theta, phi, x3, x4): e = (dtheta, sin(theta) dphi, dx3, dx4).
inline Background s2xr2_background() {
  Background b;
  b.name = "s2xr2";
  b.domain = Domain::Chart;
  b.psi = [](const Point& p) {
    const auto x = coordinates(p);
    Mat4<Jet> m{};
    m[0][0] = Jet(1.0);
    m[1][1] = sin(x[0]);
    m[2][2] = Jet(1.0);
    m[3][3] = Jet(1.0);
    return to_unitary(Coframe::from_matrix(m));
  };
  b.sample = [](Rng& rng) {
    Point p = sample_box(rng, -2.0, 2.0);
    p[0] = rng.uniform(0.4, std::numbers::pi - 0.4);
    return p;
  };
  return b;
}

/// Hermitian metric h_{i jbar}(z) on C^2 given as jets of the chart
/// coordinates (x1, x2, x3, x4) = (Re z1, Im z1, Re z2, Im z2).
using HermitianMetric = std::function<std::array<std::array<Jet, 2>, 2>(const std::array<Jet, 4>&)>;

/// Unitary coframe of a Hermitian metric by Gram-Schmidt of (dz1, dz2):
/// alpha = c00 dz1, beta = c10 dz1 + c11 dz2 with h = alpha (x) alphabar + beta (x) betabar.
inline UnitaryCoframe unitary_coframe_from_hermitian(const std::array<std::array<Jet, 2>, 2>& h) {
  const cplx i(0.0, 1.0);
  const Jet c11 = sqrt(h[1][1]);
  const Jet c10 = h[0][1] / c11;
  const Jet c00 = sqrt(h[0][0] - c10 * conj(c10));
  // dz1 = dx1 + i dx2, dz2 = dx3 + i dx4
  UnitaryCoframe u;
  u.psi = MatrixForm(2, 1, 1);
  u.psi(0, 0, 0) = c00;
  u.psi(0, 0, 1) = c00 * i;
  u.psi(1, 0, 0) = c10;
  u.psi(1, 0, 1) = c10 * i;
  u.psi(1, 0, 2) = c11;
  u.psi(1, 0, 3) = c11 * i;
  return u;
}

/// Fubini-Study metric h = d dbar log(1 + |z1|^2 + |z2|^2).
inline std::array<std::array<Jet, 2>, 2> fubini_study_metric(const std::array<Jet, 4>& x) {
  const cplx i(0.0, 1.0);
  const std::array<Jet, 2> z = {x[0] + x[1] * i, x[2] + x[3] * i};
  const std::array<Jet, 2> zb = {conj(z[0]), conj(z[1])};
  const Jet q = Jet(1.0) + z[0] * zb[0] + z[1] * zb[1];
  const Jet inv_q = reciprocal(q);
  const Jet inv_q2 = inv_q * inv_q;
  std::array<std::array<Jet, 2>, 2> h{};
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      // d_a dbar_b log q = delta_ab / q - zbar_a z_b / q^2
      h[a][b] = -(zb[a] * z[b]) * inv_q2;
      if (a == b) h[a][b] += inv_q;
    }
  return h;
}

/// CP^2 with the Fubini-Study Kaehler potential log(1 + |z|^2), points |z| <= 2.
inline Background cp2_background() {
  Background b;
  b.name = "cp2";
  b.domain = Domain::Chart;
  b.psi = [](const Point& p) { return unitary_coframe_from_hermitian(fubini_study_metric(coordinates(p))); };
  b.sample = [](Rng& rng) {
    for (;;) {
      Point p = sample_box(rng, -1.2, 1.2);
      double r2 = 0.0;
      for (double c : p) r2 += c * c;
      if (r2 <= 4.0) return p;
    }
  };
  return b;
}

/// Kaehler metric of the potential |z|^2 + eps |z1|^4: Kaehler but with
/// non-constant scalar curvature.
inline Background kahler_bump_background(double eps = 0.2) {
  Background b;
  b.name = "kahler_bump";
  b.domain = Domain::Chart;
  b.psi = [eps](const Point& p) {
    const auto x = coordinates(p);
    std::array<std::array<Jet, 2>, 2> h{};
    h[0][0] = Jet(1.0) + (x[0] * x[0] + x[1] * x[1]) * (4.0 * eps);
    h[1][1] = Jet(1.0);
    return unitary_coframe_from_hermitian(h);
  };
  b.sample = [](Rng& rng) { return sample_box(rng, -1.0, 1.0); };
  return b;
}

/// Seeded random perturbed frame on the torus.
inline Background random_background(std::uint64_t seed, double amplitude = 0.1, int max_wavenumber = 2) {
  Rng rng(seed);
  const TrigCoframe field = TrigCoframe::random(rng, amplitude, max_wavenumber);
  Background b;
  b.name = "random";
  b.psi = [field](const Point& p) { return to_unitary(field(coordinates(p))); };
  b.sample = [](Rng& r) { return sample_box(r, 0.0, 2.0 * std::numbers::pi); };
  return b;
}

inline Background background_by_name(const std::string& name, std::uint64_t seed = 0) {
  if (name == "flat") return flat_background();
  if (name == "t4") return t4_background();
  if (name == "s2xr2") return s2xr2_background();
  if (name == "cp2") return cp2_background();
  if (name == "kahler_bump") return kahler_bump_background();
  if (name == "random") return random_background(seed);
  throw std::invalid_argument("unknown manifold '" + name + "'");
}

/// Seeded random gauge data: an su(2)-valued 1-form A and an imaginary 1-form a.
struct GaugeFieldSample {
  std::array<TrigOneForm, 3> su2;
  TrigOneForm u1;

  static GaugeFieldSample random(Rng& rng, double amplitude = 0.5, int max_wavenumber = 2) {
    GaugeFieldSample g;
    for (auto& f : g.su2) f = TrigOneForm::random(rng, amplitude, max_wavenumber);
    g.u1 = TrigOneForm::random(rng, amplitude, max_wavenumber);
    return g;
  }

  MatrixForm A(const Point& p) const {
    const auto x = coordinates(p);
    return su2_one_form(su2[0](x), su2[1](x), su2[2](x));
  }

  MatrixForm a(const Point& p) const { return u1(coordinates(p)) * cplx(0.0, 1.0); }
};

}  // namespace mdm
