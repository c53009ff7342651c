#pragma once

/// \file
/// Riemannian and U(2) data of an orthonormal coframe in four dimensions.
///
/// Conventions used throughout:
///   - orientation dV = e1^e2^e3^e4, omega = (i/2)(alpha^alphabar + beta^betabar),
///   - J on vectors is fixed by g(., J .) = omega, so in the frame J_ab = omega_ab,
///   - R^{IJ} = dw^{IJ} + w^I_K ^ w^{KJ} and s dV = (1/4) eps_{IJKL} R^{IJ} e^K e^L.
///     With this normalization s equals half the usual Riemannian scalar
///     curvature (the unit 2-sphere has s = 1), and Ric is normalized so that
///     tr Ric = s. `ScalarCurvature::riemannian` carries the usual value.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "mdm/coframe.hpp"
#include "mdm/forms.hpp"
#include "mdm/linalg.hpp"

namespace mdm {

/// The Levi-Civita connection as a 4x4 antisymmetric matrix of real 1-forms.
struct LeviCivitaConnection {
  MatrixForm w{4, 4, 1, 1};

  MatrixForm component(int i, int j) const { return w.entry(i, j); }
};

namespace detail {

inline int pair_index(int i, int j) {
  static constexpr int table[4][4] = {{-1, 0, 1, 2}, {0, -1, 3, 4}, {1, 3, -1, 5}, {2, 4, 5, -1}};
  return table[i][j];
}

}  // namespace detail

/// Solves de^I = -w^I_J ^ e^J for the antisymmetric w by a dense 24x24 solve
/// per point on jets. Unknown (pair p, axis mu) is the dx^mu coefficient of w^{IJ}, I < J.
inline LeviCivitaConnection solve_levi_civita(const Coframe& c, double threshold = kFrameDetThreshold) {
  c.require_nondegenerate(threshold);
  const MatrixForm de = exterior_d(c.e);
  const Mat4<Jet> e = c.matrix();
  constexpr int n = 24;
  std::vector<Jet> a(static_cast<std::size_t>(n * n));
  std::vector<Jet> b(static_cast<std::size_t>(n));
  int row = 0;
  for (int i = 0; i < 4; ++i) {
    for (int k = 0; k < 6; ++k) {
      const unsigned m = basis::mask(2, k);
      const auto ax = basis::axes(m);
      const int nu = ax[0];
      const int rho = ax[1];
      // (w^I_J ^ e^J)_{nu rho} = w^{IJ}_nu e^J_rho - w^{IJ}_rho e^J_nu
      for (int j = 0; j < 4; ++j) {
        if (j == i) continue;
        const int p = detail::pair_index(i, j);
        const double sgn = (i < j) ? 1.0 : -1.0;
        a[static_cast<std::size_t>(row * n + p * 4 + nu)] += e[j][rho] * sgn;
        a[static_cast<std::size_t>(row * n + p * 4 + rho)] -= e[j][nu] * sgn;
      }
      b[static_cast<std::size_t>(row)] = -de(i, 0, k);
      ++row;
    }
  }
  const auto x = solve_dense(std::move(a), std::move(b), n, 1e-14);
  LeviCivitaConnection lc;
  lc.w = MatrixForm(4, 4, 1, std::min(1, de.depth()));
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) {
      const int p = detail::pair_index(i, j);
      for (int mu = 0; mu < 4; ++mu) {
        const Jet v = x[static_cast<std::size_t>(p * 4 + mu)];
        lc.w(i, j, mu) = v;
        lc.w(j, i, mu) = -v;
      }
    }
  return lc;
}

/// de + w ^ e, which vanishes for the Levi-Civita connection.
inline MatrixForm torsion(const Coframe& c, const LeviCivitaConnection& lc) {
  return exterior_d(c.e) + wedge(lc.w, c.e);
}

/// R = dw + w ^ w as a 4x4 matrix of 2-forms.
inline MatrixForm curvature_so4(const LeviCivitaConnection& lc) { return exterior_d(lc.w) + wedge(lc.w, lc.w); }

/// First Bianchi identity R^I_J ^ e^J (a column of 3-forms).
inline MatrixForm bianchi_first(const MatrixForm& r, const Coframe& c) { return wedge(r, c.e); }

/// (1/2) R^{IJ} ^ e^I ^ e^J, the scalar 4-form that the algebraic Bianchi identity kills.
inline MatrixForm bianchi_scalar(const MatrixForm& r, const Coframe& c) {
  MatrixForm out(1, 1, 4, 0);
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) out += wedge(r.entry(i, j), c.component(i), c.component(j));
  return out;
}

struct ScalarCurvature {
  double s = 0.0;           // (1/4) eps R e e / dV
  double riemannian = 0.0;  // g^{ac} g^{bd} R_abcd, equal to 2 s
  double alternative = 0.0; // from the Bianchi-reduced expression
  MatrixForm s_dv{1, 1, 4, 0};
};

inline ScalarCurvature scalar_curvature(const MatrixForm& r, const Coframe& c) {
  const auto e = [&](int i, int j) { return wedge(c.component(i), c.component(j)); };
  const auto R = [&](int i, int j) { return r.entry(i, j); };
  ScalarCurvature out;
  out.s_dv = wedge(R(0, 1), e(2, 3)) - wedge(R(0, 2), e(1, 3)) + wedge(R(0, 3), e(1, 2)) +
             wedge(R(1, 2), e(0, 3)) - wedge(R(1, 3), e(0, 2)) + wedge(R(2, 3), e(0, 1));
  const MatrixForm alt = wedge(R(2, 3) - R(0, 1), e(0, 1) - e(2, 3)) - wedge(R(0, 2) + R(1, 3), e(1, 3) + e(0, 2)) +
                         wedge(R(0, 3) - R(1, 2), e(1, 2) - e(0, 3));
  const cplx dv = c.volume().top_coefficient();
  out.s = (out.s_dv.top_coefficient() / dv).real();
  out.alternative = (alt.top_coefficient() / dv).real();
  out.riemannian = 2.0 * out.s;
  return out;
}

/// Canonical U(2) data extracted from the Levi-Civita connection of an adapted coframe.
struct U2Data {
  MatrixForm w3;       // -w12 + w34
  MatrixForm wtilde3;  // -w12 - w34
  MatrixForm w;        // complex
  MatrixForm T;        // intrinsic torsion
  MatrixForm bw;       // su(2) part, 2x2
  MatrixForm h;        // u(1) part, imaginary
};

inline U2Data extract_u2(const LeviCivitaConnection& lc) {
  const cplx i(0.0, 1.0);
  const auto W = [&](int a, int b) { return lc.component(a - 1, b - 1); };
  U2Data u;
  u.w3 = -W(1, 2) + W(3, 4);
  u.wtilde3 = -W(1, 2) - W(3, 4);
  // Overall signs of w and T are those for which the U(2) structure equation
  // holds with every product read as an ordered wedge product.
  u.w = (W(2, 4) + i * W(2, 3)) - i * (W(1, 4) + i * W(1, 3));
  u.T = -(W(2, 4) - i * W(2, 3)) + i * (W(1, 4) - i * W(1, 3));
  u.bw = 0.5 * assemble({{i * u.w3, u.w}, {-conj(u.w), -i * u.w3}});
  u.h = (0.5 * i) * u.wtilde3;
  return u;
}

/// The constant matrix epsilon = [[0, 1], [-1, 0]].
inline MatrixForm epsilon2() { return MatrixForm::constant_matrix(2, 2, {0.0, 1.0, -1.0, 0.0}); }

/// dPsi + (bw + I h) Psi + (1/2) T eps Psibar, which vanishes identically.
inline MatrixForm u2_torsion(const UnitaryCoframe& u, const U2Data& d) {
  return exterior_d(u.psi) + wedge(d.bw + times_identity(d.h, 2), u.psi) +
         0.5 * wedge(d.T, wedge(epsilon2(), conj(u.psi)));
}

struct Su2Curvature {
  MatrixForm F3;      // dw3 + (i/2) w ^ wbar
  MatrixForm Fc;      // dw + i w3 ^ w
  MatrixForm F;       // d bw + bw ^ bw
  MatrixForm F_from_components;  // (1/2)[[i F3, Fc], [-Fcbar, -i F3]]
};

inline Su2Curvature curvature_su2(const U2Data& d) {
  const cplx i(0.0, 1.0);
  Su2Curvature c;
  c.F3 = exterior_d(d.w3) + (0.5 * i) * wedge(d.w, conj(d.w));
  c.Fc = exterior_d(d.w) + i * wedge(d.w3, d.w);
  c.F = exterior_d(d.bw) + wedge(d.bw, d.bw);
  c.F_from_components = 0.5 * assemble({{i * c.F3, c.Fc}, {-conj(c.Fc), -i * c.F3}});
  return c;
}

struct StructureForms {
  MatrixForm omega;  // real 2-form
  MatrixForm Sigma;  // 2x2 traceless anti-Hermitian 2-form
  MatrixForm Omega;  // alpha ^ beta
  MatrixForm dV;
};

inline StructureForms structure_forms(const UnitaryCoframe& u) {
  const cplx i(0.0, 1.0);
  const MatrixForm a = u.alpha();
  const MatrixForm b = u.beta();
  StructureForms s;
  s.omega = (0.5 * i) * (wedge(a, conj(a)) + wedge(b, conj(b)));
  const MatrixForm psidag_psi = wedge(dagger(u.psi), u.psi);
  s.Sigma = wedge(u.psi, dagger(u.psi)) + 0.5 * times_identity(psidag_psi, 2);
  s.Omega = wedge(a, b);
  const Coframe c = to_real(u);
  s.dV = c.volume();
  return s;
}

/// Frame components F_ab (antisymmetric) of a 1x1 chart 2-form.
inline Mat4<double> frame_components(const MatrixForm& f, const FrameBasis& fb) {
  if (f.grade() != 2 || f.rows() != 1 || f.cols() != 1) throw ShapeError("frame_components: expected a 1x1 2-form");
  const MatrixForm ff = fb.to_frame(f);
  Mat4<double> m{};
  for (int k = 0; k < 6; ++k) {
    const auto ax = basis::axes(basis::mask(2, k));
    const double v = ff(0, 0, k).value.real();
    m[ax[0]][ax[1]] = v;
    m[ax[1]][ax[0]] = -v;
  }
  return m;
}

/// Complex variant, for 2-forms that are not real.
inline Mat4<cplx> frame_components_complex(const MatrixForm& f, const FrameBasis& fb) {
  const MatrixForm ff = fb.to_frame(f);
  Mat4<cplx> m{};
  for (int k = 0; k < 6; ++k) {
    const auto ax = basis::axes(basis::mask(2, k));
    m[ax[0]][ax[1]] = ff(0, 0, k).value;
    m[ax[1]][ax[0]] = -ff(0, 0, k).value;
  }
  return m;
}

/// Chart 2-form (depth 0) with the given frame components.
inline MatrixForm two_form_from_frame(const Mat4<double>& m, const FrameBasis& fb) {
  MatrixForm ff(1, 1, 2, 0);
  for (int k = 0; k < 6; ++k) {
    const auto ax = basis::axes(basis::mask(2, k));
    ff(0, 0, k) = Jet(m[ax[0]][ax[1]]);
  }
  return fb.to_chart(ff);
}

inline double max_abs(const Mat4<double>& m) {
  double r = 0.0;
  for (const auto& row : m)
    for (double v : row) r = std::max(r, std::abs(v));
  return r;
}

inline Mat4<double> operator+(const Mat4<double>& a, const Mat4<double>& b) {
  Mat4<double> r{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) r[i][j] = a[i][j] + b[i][j];
  return r;
}

inline Mat4<double> operator-(const Mat4<double>& a, const Mat4<double>& b) {
  Mat4<double> r{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) r[i][j] = a[i][j] - b[i][j];
  return r;
}

inline Mat4<double> operator*(double s, const Mat4<double>& a) {
  Mat4<double> r{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) r[i][j] = s * a[i][j];
  return r;
}

/// Tensor pulled back by J: X(J., J.) has components (J^T X J)_ab.
inline Mat4<double> j_pullback(const Mat4<double>& x, const Mat4<double>& j) {
  return matmul(transposed(j), matmul(x, j));
}

struct TypeSplit {
  Mat4<double> part11;
  Mat4<double> part20;  // (2,0)+(0,2) part
};

/// Averaging projectors (X +- X(J., J.)) / 2 for 2-forms and symmetric tensors alike.
inline TypeSplit type_split_frame(const Mat4<double>& x, const Mat4<double>& j) {
  const Mat4<double> pulled = j_pullback(x, j);
  return {0.5 * (x + pulled), 0.5 * (x - pulled)};
}

struct FormTypeSplit {
  MatrixForm part11;
  MatrixForm part20plus02;
};

/// Type decomposition of a real chart 2-form with respect to the J fixed by omega.
inline FormTypeSplit type_split_2form(const MatrixForm& f, const MatrixForm& omega, const Coframe& c) {
  const FrameBasis fb(c);
  const TypeSplit t = type_split_frame(frame_components(f, fb), frame_components(omega, fb));
  return {two_form_from_frame(t.part11, fb), two_form_from_frame(t.part20, fb)};
}

/// Type decomposition of a symmetric tensor given by its frame components.
inline TypeSplit type_split_sym(const Mat4<double>& h, const MatrixForm& omega, const Coframe& c) {
  const FrameBasis fb(c);
  return type_split_frame(h, frame_components(omega, fb));
}

struct RicciData {
  Mat4<double> ric{};        // frame components, tr ric = s
  double s = 0.0;
  Mat4<double> J{};          // frame matrix of J, equal to omega_ab
  Mat4<double> rho{};        // antisymmetrized Ric(., J .)
  Mat4<double> rho_plus{};   // self-dual part
  Mat4<double> rho_minus{};  // anti-self-dual part
  double defect = 0.0;       // max |Ric - Ric(J., J.)|
};

/// Frame Hodge star on antisymmetric matrices.
inline Mat4<double> hodge_frame(const Mat4<double>& f) {
  Mat4<double> out{};
  for (int k = 0; k < 6; ++k) {
    const unsigned m = basis::mask(2, k);
    const unsigned comp = 0xFu & ~m;
    const auto a = basis::axes(m);
    const auto b = basis::axes(comp);
    const double v = basis::wedge_sign(m, comp) * f[a[0]][a[1]];
    out[b[0]][b[1]] += v;
    out[b[1]][b[0]] -= v;
  }
  return out;
}

/// Ricci tensor from the frame components of R^{IJ}: Ric_JL = (1/2) sum_I R^{IJ}_{IL}.
inline RicciData ricci_data(const MatrixForm& r, const Coframe& c, const MatrixForm& omega) {
  const FrameBasis fb(c);
  std::array<std::array<Mat4<double>, 4>, 4> rf{};
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) {
      rf[i][j] = frame_components(r.entry(i, j), fb);
      rf[j][i] = -1.0 * rf[i][j];
    }
  RicciData d;
  for (int j = 0; j < 4; ++j)
    for (int l = 0; l < 4; ++l) {
      double acc = 0.0;
      for (int i = 0; i < 4; ++i) acc += rf[i][j][i][l];
      d.ric[j][l] = 0.5 * acc;
    }
  for (int i = 0; i < 4; ++i) d.s += d.ric[i][i];
  d.J = frame_components(omega, fb);
  const Mat4<double> rj = matmul(d.ric, d.J);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) d.rho[a][b] = 0.5 * (rj[a][b] - rj[b][a]);
  const Mat4<double> star = hodge_frame(d.rho);
  d.rho_plus = 0.5 * (d.rho + star);
  d.rho_minus = 0.5 * (d.rho - star);
  d.defect = max_abs(d.ric - j_pullback(d.ric, d.J));
  return d;
}

/// Everything computable pointwise from a unitary coframe, computed once.
struct PointGeometry {
  UnitaryCoframe psi;
  Coframe coframe;
  LeviCivitaConnection lc;
  MatrixForm R;
  ScalarCurvature scalar;
  U2Data u2;
  Su2Curvature su2;
  StructureForms forms;
  RicciData ricci;

  explicit PointGeometry(const UnitaryCoframe& u)
      : psi(u), coframe(to_real(u)), lc(solve_levi_civita(coframe)), R(curvature_so4(lc)),
        scalar(scalar_curvature(R, coframe)), u2(extract_u2(lc)), su2(curvature_su2(u2)),
        forms(structure_forms(u)), ricci(ricci_data(R, coframe, forms.omega)) {}
};


/// Chart components of g = E^T E and omega = e1 ^ e2 + e3 ^ e4 for a constant
/// coframe matrix E^I_mu.
struct MetricPair {
  Mat4<double> g{};
  Mat4<double> omega{};
};

inline MetricPair metric_pair(const Mat4<double>& e) {
  MetricPair m;
  for (int mu = 0; mu < 4; ++mu)
    for (int nu = 0; nu < 4; ++nu) {
      for (int i = 0; i < 4; ++i) m.g[mu][nu] += e[i][mu] * e[i][nu];
      m.omega[mu][nu] = e[0][mu] * e[1][nu] - e[0][nu] * e[1][mu] + e[2][mu] * e[3][nu] - e[2][nu] * e[3][mu];
    }
  return m;
}

/// Defect of the linearized compatibility condition for a one-parameter
/// family of coframes: with J = g^{-1} omega (so g(., J.) = omega) and
/// X^{11} = (X + X(J., J.)) / 2, returns max |(d omega)^{11}(., J.) + (dg)^{11}|,
/// derivatives in t by fourth-order central differences.
inline double variation_defect(const std::function<Mat4<double>(double)>& family, double t = 0.0, double dt = 1e-3) {
  auto deriv = [&](auto pick) {
    const Mat4<double> p1 = pick(metric_pair(family(t + dt)));
    const Mat4<double> m1 = pick(metric_pair(family(t - dt)));
    const Mat4<double> p2 = pick(metric_pair(family(t + 2 * dt)));
    const Mat4<double> m2 = pick(metric_pair(family(t - 2 * dt)));
    return (1.0 / (12.0 * dt)) * (8.0 * (p1 - m1) - (p2 - m2));
  };
  const MetricPair here = metric_pair(family(t));
  const Mat4<double> j = matmul(inverse(here.g), here.omega);
  const Mat4<double> dg = deriv([](const MetricPair& m) { return m.g; });
  const Mat4<double> dw = deriv([](const MetricPair& m) { return m.omega; });
  const Mat4<double> dg11 = type_split_frame(dg, j).part11;
  const Mat4<double> dw11 = type_split_frame(dw, j).part11;
  return max_abs(matmul(dw11, j) + dg11);
}

}  // namespace mdm
