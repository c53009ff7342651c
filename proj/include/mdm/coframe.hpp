#pragma once

/// \file
/// Orthonormal coframes, their unitary packaging Psi = (alpha, beta), and the
/// frame-basis algebra built on them: change of basis between dx and e,
/// the Hodge star, and the self-dual / anti-self-dual split.

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "mdm/forms.hpp"
#include "mdm/linalg.hpp"

namespace mdm {

struct DegenerateFrame : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr double kFrameDetThreshold = 1e-8;

/// Four real orthonormal 1-forms e^1..e^4, stored as a 4x1 one-form matrix.
struct Coframe {
  MatrixForm e{4, 1, 1};

  MatrixForm component(int i) const { return e.entry(i, 0); }

  /// Coefficient matrix E[I][mu] with e^I = E[I][mu] dx^mu.
  Mat4<Jet> matrix() const {
    Mat4<Jet> m{};
    for (int i = 0; i < 4; ++i)
      for (int mu = 0; mu < 4; ++mu) m[i][mu] = e(i, 0, mu);
    return m;
  }

  /// e^1 ^ e^2 ^ e^3 ^ e^4.
  MatrixForm volume() const { return wedge(component(0), component(1), component(2), component(3)); }

  double determinant_value() const { return determinant(matrix()).value.real(); }

  void require_nondegenerate(double threshold = kFrameDetThreshold) const {
    const double d = determinant_value();
    if (!(std::abs(d) >= threshold))
      throw DegenerateFrame("coframe is degenerate: |det| = " + std::to_string(std::abs(d)));
  }

  static Coframe from_matrix(const Mat4<Jet>& m, int depth = 2) {
    Coframe c;
    c.e = MatrixForm(4, 1, 1, depth);
    for (int i = 0; i < 4; ++i)
      for (int mu = 0; mu < 4; ++mu) c.e(i, 0, mu) = m[i][mu];
    return c;
  }

  static Coframe standard() {
    Mat4<Jet> m{};
    for (int i = 0; i < 4; ++i) m[i][i] = Jet(1.0);
    return from_matrix(m);
  }
};

/// The C^2-valued 1-form Psi = (alpha, beta) with alpha = e1 + i e2, beta = e3 + i e4.
struct UnitaryCoframe {
  MatrixForm psi{2, 1, 1};

  MatrixForm alpha() const { return psi.entry(0, 0); }
  MatrixForm beta() const { return psi.entry(1, 0); }
};

inline UnitaryCoframe to_unitary(const Coframe& c) {
  const cplx i(0.0, 1.0);
  UnitaryCoframe u;
  u.psi = assemble({{c.component(0) + i * c.component(1)}, {c.component(2) + i * c.component(3)}});
  return u;
}

inline Coframe to_real(const UnitaryCoframe& u) {
  Coframe c;
  c.e = assemble({{real_part(u.alpha())}, {imag_part(u.alpha())}, {real_part(u.beta())}, {imag_part(u.beta())}});
  return c;
}

/// Expresses a 1x1 p-form given in the basis {dx} in a new basis {f}, where
/// dx^mu = m[mu][I] f^I. The coefficient on f^{I1..Ip} is the p x p minor of m.
inline MatrixForm change_basis(const MatrixForm& form, const Mat4<Jet>& m, int m_depth) {
  MatrixForm out(form.rows(), form.cols(), form.grade(), std::min(form.depth(), m_depth));
  const int p = form.grade();
  if (out.is_zero_grade()) return out;
  for (int k = 0; k < form.basis_size(); ++k) {
    const auto rows = basis::axes(basis::mask(p, k));
    for (int l = 0; l < form.basis_size(); ++l) {
      const auto cols = basis::axes(basis::mask(p, l));
      Jet minor;
      if (p == 0) {
        minor = Jet(1.0);
      } else {
        // Leibniz expansion over permutations of the column list
        std::array<int, 4> perm{0, 1, 2, 3};
        do {
          bool ok = true;
          for (int a = p; a < 4; ++a)
            if (perm[a] != a) ok = false;
          if (!ok) continue;
          int inversions = 0;
          for (int a = 0; a < p; ++a)
            for (int b = a + 1; b < p; ++b)
              if (perm[a] > perm[b]) ++inversions;
          Jet term(1.0);
          for (int a = 0; a < p; ++a) term = term * m[rows[a]][cols[perm[a]]];
          minor += (inversions % 2) ? -term : term;
        } while (std::next_permutation(perm.begin(), perm.end()));
      }
      for (int r = 0; r < form.rows(); ++r)
        for (int c = 0; c < form.cols(); ++c) out(r, c, l) += form(r, c, k) * minor;
    }
  }
  return out;
}

/// Frame data needed to move forms between the chart basis and the e basis.
struct FrameBasis {
  Mat4<Jet> e;      // e^I = e[I][mu] dx^mu
  Mat4<Jet> e_inv;  // dx^mu = e_inv[mu][I] e^I
  int depth = 2;

  explicit FrameBasis(const Coframe& c, double threshold = kFrameDetThreshold) : depth(c.e.depth()) {
    c.require_nondegenerate(threshold);
    e = c.matrix();
    e_inv = inverse(e);
  }

  /// Chart-basis form -> coefficients in the e basis.
  MatrixForm to_frame(const MatrixForm& f) const { return change_basis(f, e_inv, depth); }

  /// e-basis coefficients -> chart-basis form.
  MatrixForm to_chart(const MatrixForm& f) const {
    // e^I = e[I][mu] dx^mu, so the substitution matrix is e itself
    return change_basis(f, e, depth);
  }
};

/// Hodge star of a form whose coefficients are in an orthonormal frame basis,
/// orientation e^1^e^2^e^3^e^4.
inline MatrixForm hodge_frame(const MatrixForm& f) {
  const int p = f.grade();
  if (p > 4) throw ShapeError("hodge_frame: grade out of range");
  MatrixForm out(f.rows(), f.cols(), 4 - p, f.depth());
  for (int k = 0; k < f.basis_size(); ++k) {
    const unsigned m = basis::mask(p, k);
    const unsigned comp = 0xFu & ~m;
    const int s = basis::wedge_sign(m, comp);
    for (int r = 0; r < f.rows(); ++r)
      for (int c = 0; c < f.cols(); ++c) {
        const Jet v = f(r, c, k);
        out.at_mask(r, c, comp) += (s < 0) ? -v : v;
      }
  }
  return out;
}

/// Hodge star of a chart-basis form with respect to the metric of `c`.
inline MatrixForm hodge(const MatrixForm& f, const FrameBasis& fb) {
  return fb.to_chart(hodge_frame(fb.to_frame(f)));
}

struct DualitySplit {
  MatrixForm selfdual;
  MatrixForm antiselfdual;
};

/// F = F+ + F- with *F+ = F+ and *F- = -F- in the metric of `c`.
inline DualitySplit sd_asd_split(const MatrixForm& f, const Coframe& c, double threshold = kFrameDetThreshold) {
  if (f.grade() != 2) throw ShapeError("sd_asd_split: expected a 2-form");
  const FrameBasis fb(c, threshold);
  const MatrixForm star = hodge(f, fb);
  return {(f + star) * 0.5, (f - star) * 0.5};
}

}  // namespace mdm
