#pragma once

/// \file
/// The su(3) Cartan connection built from (A, a, Psi), its curvature, the
/// insertion action densities, and Euler-Lagrange residuals at the connection
/// level and at the metric level.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include "mdm/coframe.hpp"
#include "mdm/fields.hpp"
#include "mdm/forms.hpp"
#include "mdm/frame_geometry.hpp"

namespace mdm {

/// su(2) part A, imaginary u(1) part a, and the C^2-valued soldering form Psi.
struct Su3Connection {
  MatrixForm A{2, 2, 1};
  MatrixForm a{1, 1, 1};
  MatrixForm Psi{2, 1, 1};

  /// [[A + I a, Psi], [-Psi^dagger, -2a]].
  MatrixForm assembled() const {
    return assemble({{A + times_identity(a, 2), Psi}, {-dagger(Psi), -2.0 * a}});
  }
};

struct Su3Curvature {
  MatrixForm F;        // dA + A ^ A
  MatrixForm DPsi;     // dPsi + A ^ Psi
  MatrixForm block22;  // F + I da - Psi ^ Psi^dagger
  MatrixForm block12;  // DPsi + 3 a ^ Psi
  MatrixForm block11;  // -2 da - Psi^dagger ^ Psi

  MatrixForm assembled() const {
    return assemble({{block22, block12}, {-dagger(block12), block11}});
  }
};

inline MatrixForm covariant_d(const MatrixForm& psi, const MatrixForm& A) { return exterior_d(psi) + wedge(A, psi); }

inline Su3Curvature curvature_blocks(const Su3Connection& c) {
  Su3Curvature k;
  const MatrixForm da = exterior_d(c.a);
  k.F = exterior_d(c.A) + wedge(c.A, c.A);
  k.DPsi = covariant_d(c.Psi, c.A);
  k.block22 = k.F + times_identity(da, 2) - wedge(c.Psi, dagger(c.Psi));
  k.block12 = k.DPsi + 3.0 * wedge(c.a, c.Psi);
  k.block11 = -2.0 * da - wedge(dagger(c.Psi), c.Psi);
  return k;
}

/// d(calA) + calA ^ calA computed on the assembled 3x3 matrix.
inline MatrixForm curvature_direct(const Su3Connection& c) {
  const MatrixForm m = c.assembled();
  return exterior_d(m) + wedge(m, m);
}

inline MatrixForm gamma_matrix(double c) { return MatrixForm::constant_matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, c}); }

/// Tr(gamma F ^ F) with gamma = diag(1, 1, c).
inline MatrixForm gamma_action_density(const Su3Connection& conn, double c) {
  const MatrixForm f = curvature_blocks(conn).assembled();
  return trace(wedge(gamma_matrix(c), wedge(f, f)));
}

/// theta = (1/2) Psi^dagger ^ DPsi + (1/2) DPsi^dagger ^ Psi - 3 a ^ Psi^dagger ^ Psi.
inline MatrixForm boundary_three_form(const Su3Connection& c) {
  const MatrixForm dpsi = covariant_d(c.Psi, c.A);
  return 0.5 * wedge(dagger(c.Psi), dpsi) + 0.5 * wedge(dagger(dpsi), c.Psi) -
         3.0 * wedge(c.a, dagger(c.Psi), c.Psi);
}

/// Tr(gamma F F) minus its expansion into topological terms, an exact form and
/// the (c - 1) model terms. Vanishes identically.
inline MatrixForm expansion_identity_defect(const Su3Connection& conn, double c) {
  const Su3Curvature k = curvature_blocks(conn);
  const MatrixForm da = exterior_d(conn.a);
  const MatrixForm pdp = wedge(dagger(conn.Psi), conn.Psi);
  const MatrixForm ppd = wedge(conn.Psi, dagger(conn.Psi));
  const MatrixForm lhs = gamma_action_density(conn, c);
  const MatrixForm model = trace(wedge(k.F, ppd)) + wedge(da, pdp) + wedge(pdp, pdp);
  const MatrixForm rhs = trace(wedge(k.F, k.F)) + (2.0 + 4.0 * c) * wedge(da, da) -
                         (1.0 + c) * exterior_d(boundary_three_form(conn)) + (c - 1.0) * model;
  return lhs - rhs;
}

inline double expansion_identity_residual(const Su3Connection& conn, double c) {
  return expansion_identity_defect(conn, c).max_norm();
}

struct InsertionParams {
  double p = 1.0;
  double q = 1.0;
  double r = 1.0;
  double s = 1.0;

  /// The single-insertion case gamma = diag(1, 1, c).
  static InsertionParams single(double c) { return {1.0, 1.0, 1.0, c}; }
};

struct ModelCoefficients {
  double lambda = 0.0;
  double mu = 0.0;
  double nu = 0.0;

  /// 3 lambda - mu + 4 nu, identically zero for coefficients from insertions.
  double relation() const { return 3.0 * lambda - mu + 4.0 * nu; }
};

inline ModelCoefficients coeffs_from_pqrs(double p, double q, double r, double s) {
  return {2.0 * p * r - p * s - q * r, 2.0 * p * r + 4.0 * q * s - 3.0 * (p * s + q * r), q * s - p * r};
}

inline ModelCoefficients coeffs_from_pqrs(const InsertionParams& ip) { return coeffs_from_pqrs(ip.p, ip.q, ip.r, ip.s); }

struct RescaledCoefficients {
  double mu_tilde = 0.0;
  double nu_tilde = 0.0;
};

inline RescaledCoefficients rescaled(const ModelCoefficients& m) {
  if (m.lambda == 0.0) throw std::domain_error("rescaled coefficients need lambda != 0");
  return {m.mu / m.lambda, m.nu / m.lambda};
}

/// Tr((pP + qQ) F (rP + sQ) F).
inline MatrixForm general_action_density(const Su3Connection& conn, const InsertionParams& ip) {
  const MatrixForm f = curvature_blocks(conn).assembled();
  const MatrixForm left = MatrixForm::constant_matrix(3, 3, {ip.p, 0, 0, 0, ip.p, 0, 0, 0, ip.q});
  const MatrixForm right = MatrixForm::constant_matrix(3, 3, {ip.r, 0, 0, 0, ip.r, 0, 0, 0, ip.s});
  return trace(wedge(left, f, right, f));
}

/// pr Tr(F ^ F) + (2pr + 4qs) da ^ da - (ps + qr) d(theta): the part of the
/// general density that integrates to a boundary or characteristic term.
inline MatrixForm general_topological_part(const Su3Connection& conn, const InsertionParams& ip) {
  const MatrixForm F = exterior_d(conn.A) + wedge(conn.A, conn.A);
  const MatrixForm da = exterior_d(conn.a);
  return ip.p * ip.r * trace(wedge(F, F)) + (2.0 * ip.p * ip.r + 4.0 * ip.q * ip.s) * wedge(da, da) -
         (ip.p * ip.s + ip.q * ip.r) * exterior_d(boundary_three_form(conn));
}

/// lambda Psi^dagger F Psi + mu da ^ Psi^dagger Psi + nu (Psi^dagger Psi)^2.
inline MatrixForm model_lagrangian(const Su3Connection& conn, const ModelCoefficients& m) {
  const MatrixForm F = exterior_d(conn.A) + wedge(conn.A, conn.A);
  const MatrixForm pdp = wedge(dagger(conn.Psi), conn.Psi);
  return m.lambda * wedge(dagger(conn.Psi), F, conn.Psi) + m.mu * wedge(exterior_d(conn.a), pdp) +
         m.nu * wedge(pdp, pdp);
}

/// -lambda [(s + 2 mu~ - 6) dV - 2 mu~ omega ^ (i da)], the metric form of the
/// model Lagrangian once A is the su(2) part of the Levi-Civita connection.
inline MatrixForm metric_lagrangian_density(double lambda, double mu_tilde, double s, const StructureForms& forms,
                                            const MatrixForm& a) {
  const cplx i(0.0, 1.0);
  const MatrixForm ida = i * exterior_d(a);
  return -lambda * ((s + 2.0 * mu_tilde - 6.0) * forms.dV - 2.0 * mu_tilde * wedge(forms.omega, ida));
}

struct ConnectionResiduals {
  double r1 = 0.0;  // |D(Psi ^ Psi^dagger)|
  double r2 = 0.0;  // |(lambda F + mu I da + 2 nu Psi ^ Psi^dagger) ^ Psi|
};

inline MatrixForm covariant_d_adjoint(const MatrixForm& x, const MatrixForm& A) {
  return exterior_d(x) + graded_commutator(A, x);
}

inline ConnectionResiduals el_residuals_connection(const Su3Connection& c, const ModelCoefficients& m) {
  const MatrixForm ppd = wedge(c.Psi, dagger(c.Psi));
  const MatrixForm F = exterior_d(c.A) + wedge(c.A, c.A);
  const MatrixForm da = exterior_d(c.a);
  const MatrixForm op = m.lambda * F + m.mu * times_identity(da, 2) + 2.0 * m.nu * ppd;
  return {covariant_d_adjoint(ppd, c.A).max_norm(), wedge(op, c.Psi).max_norm()};
}

/// d_calA(gamma F + F gamma) by differentiating the assembled curvature. Needs
/// one jet order beyond the curvature, so connection data must be depth 2.
inline MatrixForm direct_el_matrix(const Su3Connection& conn, double c) {
  const MatrixForm f = curvature_direct(conn);
  const MatrixForm g = gamma_matrix(c);
  const MatrixForm x = wedge(g, f) + wedge(f, g);
  const MatrixForm m = conn.assembled();
  return exterior_d(x) + wedge(m, x) - wedge(x, m);
}

/// The same 3-form via the Bianchi identity d_calA F = 0:
/// d_calA(gamma F + F gamma) = [calA, gamma] F + F [calA, gamma].
/// Usable when the connection data only carries one jet order.
inline MatrixForm direct_el_matrix_bianchi(const Su3Connection& conn, double c) {
  const MatrixForm f = curvature_blocks(conn).assembled();
  const MatrixForm m = conn.assembled();
  const MatrixForm g = gamma_matrix(c);
  const MatrixForm comm = wedge(m, g) - wedge(g, m);
  return wedge(comm, f) + wedge(f, comm);
}

/// (c - 1) [[D(Psi Psi^dagger), (F - I da - 2 Psi Psi^dagger) Psi],
///          [Psi^dagger (F - I da - 2 Psi Psi^dagger), -d(Psi^dagger Psi)]].
inline MatrixForm el_matrix_blocks(const Su3Connection& conn, double c) {
  const MatrixForm ppd = wedge(conn.Psi, dagger(conn.Psi));
  const MatrixForm F = exterior_d(conn.A) + wedge(conn.A, conn.A);
  const MatrixForm da = exterior_d(conn.a);
  const MatrixForm op = F - times_identity(da, 2) - 2.0 * ppd;
  const MatrixForm blocks =
      assemble({{covariant_d_adjoint(ppd, conn.A), wedge(op, conn.Psi)},
                {wedge(dagger(conn.Psi), op), -exterior_d(wedge(dagger(conn.Psi), conn.Psi))}});
  return (c - 1.0) * blocks;
}

/// Canonical Cartan data of a coframe: A = bw, a = h / 3.
inline Su3Connection canonical_connection(const PointGeometry& g) {
  Su3Connection c;
  c.Psi = g.psi.psi;
  c.A = g.u2.bw;
  c.a = (1.0 / 3.0) * g.u2.h;
  return c;
}

struct KahlerEinsteinResiduals {
  double ida_omega = 0.0;  // |i da - omega|
  double F_Sigma = 0.0;    // |F(bw) - Sigma|
  double T = 0.0;          // |T|
};

inline KahlerEinsteinResiduals kahler_einstein_check(const PointGeometry& g, const MatrixForm& a) {
  const cplx i(0.0, 1.0);
  return {(i * exterior_d(a) - g.forms.omega).max_norm(), (g.su2.F - g.forms.Sigma).max_norm(), g.u2.T.max_norm()};
}

/// Residuals of the critical-point equations of the metric functional.
struct GeometricResiduals {
  double r_ric20 = 0.0;
  double r_da20 = 0.0;
  double r_domega = 0.0;
  double r_mainfeq = 0.0;
  double grad_s = 0.0;
  double j_defect = 0.0;
  bool mainfeq_conditional = false;  // Ric not J-invariant within tolerance
};

/// Frame-basis components of the main-equation defect
/// rho - (1/2) omega (s - 6) - mu~ (omega - i da), using rho built from the
/// J-invariant part of Ric.
inline Mat4<double> mainfeq_defect(const PointGeometry& g, const Mat4<double>& ida_frame, double mu_tilde) {
  const RicciData& rd = g.ricci;
  const TypeSplit ric = type_split_frame(rd.ric, rd.J);
  const Mat4<double> rj = matmul(ric.part11, rd.J);
  Mat4<double> rho{};
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) rho[a][b] = 0.5 * (rj[a][b] - rj[b][a]);
  return rho - (0.5 * (rd.s - 6.0)) * rd.J - mu_tilde * (rd.J - ida_frame);
}

/// Pointwise residuals (everything except grad_s) in the orthonormal frame,
/// max-abs component norms.
inline GeometricResiduals el_residuals_pointwise(const PointGeometry& g, const MatrixForm& a, double mu_tilde,
                                                 double tol = 1e-8) {
  const cplx i(0.0, 1.0);
  const FrameBasis fb(g.coframe);
  GeometricResiduals r;
  const RicciData& rd = g.ricci;
  r.r_ric20 = max_abs(type_split_frame(rd.ric, rd.J).part20);
  const Mat4<double> ida = frame_components(i * exterior_d(a), fb);
  r.r_da20 = max_abs(type_split_frame(ida, rd.J).part20);
  r.r_domega = fb.to_frame(exterior_d(g.forms.omega)).max_norm();
  r.j_defect = rd.defect;
  r.mainfeq_conditional = rd.defect > tol;
  r.r_mainfeq = max_abs(mainfeq_defect(g, ida, mu_tilde));
  return r;
}

/// A unitary-coframe field and an imaginary 1-form field on a chart.
struct GeometricField {
  std::function<UnitaryCoframe(const Point&)> psi;
  std::function<MatrixForm(const Point&)> a;
};

inline constexpr double kFieldStep = 1e-3;

/// Fourth-order central difference of a scalar field along `axis`.
inline double central_derivative(const std::function<double(const Point&)>& f, const Point& p, int axis,
                                 double h = kFieldStep) {
  auto at = [&](double t) {
    Point q = p;
    q[axis] += t;
    return f(q);
  };
  return (8.0 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12.0 * h);
}

/// Scalar curvature field s(x) of a coframe field.
inline std::function<double(const Point&)> scalar_field(const std::function<UnitaryCoframe(const Point&)>& psi) {
  return [psi](const Point& p) { return PointGeometry(psi(p)).scalar.s; };
}

/// Chart components of ds.
inline std::array<double, 4> scalar_gradient(const std::function<UnitaryCoframe(const Point&)>& psi, const Point& p,
                                             double h = kFieldStep) {
  const auto s = scalar_field(psi);
  std::array<double, 4> g{};
  for (int mu = 0; mu < 4; ++mu) g[mu] = central_derivative(s, p, mu, h);
  return g;
}

/// Full residual set including |ds| (chart components).
inline GeometricResiduals el_residuals_geometric(const GeometricField& f, const Point& p, double mu_tilde,
                                                 double tol = 1e-8) {
  const PointGeometry g(f.psi(p));
  GeometricResiduals r = el_residuals_pointwise(g, f.a(p), mu_tilde, tol);
  const auto ds = scalar_gradient(f.psi, p);
  double acc = 0.0;
  for (double v : ds) acc += v * v;
  r.grad_s = std::sqrt(acc);
  return r;
}

/// Chart-component 2-form rho (antisymmetrized Ric(., J .)) as a field.
inline Mat4<double> rho_chart(const PointGeometry& g) {
  const FrameBasis fb(g.coframe);
  // rho_{mu nu} = E^a_mu E^b_nu rho_ab
  Mat4<double> e{};
  for (int a = 0; a < 4; ++a)
    for (int mu = 0; mu < 4; ++mu) e[a][mu] = fb.e[a][mu].value.real();
  return matmul(transposed(e), matmul(g.ricci.rho, e));
}

/// Frame max-abs of d(rho) - (1/2) ds ^ omega, with d by central differences.
inline double drho_defect(const std::function<UnitaryCoframe(const Point&)>& psi, const Point& p,
                          double h = kFieldStep) {
  std::array<Mat4<double>, 4> drho{};
  for (int mu = 0; mu < 4; ++mu) {
    auto at = [&](double t) {
      Point q = p;
      q[mu] += t;
      return rho_chart(PointGeometry(psi(q)));
    };
    const Mat4<double> p1 = at(h), m1 = at(-h), p2 = at(2 * h), m2 = at(-2 * h);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        drho[mu][a][b] = (8.0 * (p1[a][b] - m1[a][b]) - (p2[a][b] - m2[a][b])) / (12.0 * h);
  }
  const PointGeometry g(psi(p));
  const auto ds = scalar_gradient(psi, p, h);
  const MatrixForm& omega = g.forms.omega;
  double worst = 0.0;
  // (d rho)_{lmn} = d_l rho_mn - d_m rho_ln + d_n rho_lm, same for ds ^ omega
  for (int k = 0; k < 4; ++k) {
    const auto ax = basis::axes(basis::mask(3, k));
    const int l = ax[0];
    const int m = ax[1];
    const int n = ax[2];
    auto om = [&](int x, int y) {
      if (x == y) return 0.0;
      const unsigned mask = (1u << x) | (1u << y);
      const double v = omega.at_mask(0, 0, mask).value.real();
      return x < y ? v : -v;
    };
    const double dr = drho[l][m][n] - drho[m][l][n] + drho[n][l][m];
    const double dso = ds[l] * om(m, n) - ds[m] * om(l, n) + ds[n] * om(l, m);
    worst = std::max(worst, std::abs(dr - 0.5 * dso));
  }
  return worst;
}

}  // namespace mdm
