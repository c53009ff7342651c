#pragma once

/// \file
/// Periodic N^4 lattice discretization of the metric functional
///   S = -lambda * int [(s + 2 mu~ - 6) dV - 2 mu~ omega ^ (i da)]
/// parametrized by the coframe E^I_mu (equivalently Psi) and the real
/// components a_mu of the imaginary 1-form a = i a_mu dx^mu. Derivatives are
/// second-order central finite differences, the exact gradient of the discrete
/// action comes from reverse-mode differentiation of the per-site density
/// followed by an adjoint scatter through the stencils.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "mdm/cartan_su3.hpp"
#include "mdm/fields.hpp"
#include "mdm/frame_geometry.hpp"
#include "mdm/reverse_ad.hpp"

namespace mdm {

struct DegenerateSite : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TopologyError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

inline constexpr double kSiteDetThreshold = 1e-6;

/// Worker count from MDM_THREADS, else the hardware concurrency.
inline unsigned thread_count() {
  if (const char* env = std::getenv("MDM_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, n) on contiguous chunks, one per worker.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(thread_count(), std::max<std::size_t>(n, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        for (std::size_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct LatticeState {
  int n = 4;
  std::vector<double> psi;  // site * 16 + I * 4 + mu : E^I_mu
  std::vector<double> a;    // site * 4 + mu : a_mu

  LatticeState() = default;
  explicit LatticeState(int n_) : n(n_), psi(static_cast<std::size_t>(sites_of(n_)) * 16), a(static_cast<std::size_t>(sites_of(n_)) * 4) {
    if (n_ < 3) throw std::invalid_argument("lattice needs at least 3 sites per axis");
  }

  static std::size_t sites_of(int n_) { return static_cast<std::size_t>(n_) * n_ * n_ * n_; }
  std::size_t sites() const { return sites_of(n); }
  double spacing() const { return 2.0 * std::numbers::pi / n; }
  std::size_t size() const { return psi.size() + a.size(); }

  std::size_t site_index(const std::array<int, 4>& c) const {
    std::size_t s = 0;
    for (int k = 0; k < 4; ++k) s = s * static_cast<std::size_t>(n) + static_cast<std::size_t>(((c[k] % n) + n) % n);
    return s;
  }
  std::array<int, 4> coords(std::size_t s) const {
    std::array<int, 4> c{};
    for (int k = 3; k >= 0; --k) {
      c[k] = static_cast<int>(s % static_cast<std::size_t>(n));
      s /= static_cast<std::size_t>(n);
    }
    return c;
  }
  Point position(std::size_t s) const {
    const auto c = coords(s);
    return {c[0] * spacing(), c[1] * spacing(), c[2] * spacing(), c[3] * spacing()};
  }
  /// Neighbour of site `s` displaced by `d` (per-axis offsets).
  std::size_t shifted(std::size_t s, const std::array<int, 4>& d) const {
    auto c = coords(s);
    for (int k = 0; k < 4; ++k) c[k] += d[k];
    return site_index(c);
  }

  double& E(std::size_t s, int i, int mu) { return psi[s * 16 + static_cast<std::size_t>(i * 4 + mu)]; }
  double E(std::size_t s, int i, int mu) const { return psi[s * 16 + static_cast<std::size_t>(i * 4 + mu)]; }
  double& A(std::size_t s, int mu) { return a[s * 4 + static_cast<std::size_t>(mu)]; }
  double A(std::size_t s, int mu) const { return a[s * 4 + static_cast<std::size_t>(mu)]; }

  /// Flat view: psi entries first, then a entries.
  double flat(std::size_t k) const { return k < psi.size() ? psi[k] : a[k - psi.size()]; }
  double& flat(std::size_t k) { return k < psi.size() ? psi[k] : a[k - psi.size()]; }
};

/// Standard flat coframe, a = 0.
inline LatticeState flat_state(int n) {
  LatticeState st(n);
  for (std::size_t s = 0; s < st.sites(); ++s)
    for (int i = 0; i < 4; ++i) st.E(s, i, i) = 1.0;
  return st;
}

/// Samples a periodic background (and optional u(1) field) onto the lattice.
inline LatticeState sample_background(const Background& bg, int n, const TrigOneForm* u1 = nullptr) {
  if (bg.domain != Domain::Periodic)
    throw TopologyError("manifold '" + bg.name + "' is not a flat 4-torus chart and cannot be put on the periodic lattice");
  LatticeState st(n);
  for (std::size_t s = 0; s < st.sites(); ++s) {
    const Point p = st.position(s);
    const Coframe c = bg.coframe(p);
    for (int i = 0; i < 4; ++i)
      for (int mu = 0; mu < 4; ++mu) st.E(s, i, mu) = c.e(i, 0, mu).value.real();
    if (u1)
      for (int mu = 0; mu < 4; ++mu) st.A(s, mu) = u1->c[mu].value(p);
  }
  return st;
}

/// Flat state plus smooth seeded perturbations of the given amplitude on both
/// the coframe and a (wavenumbers <= max_wavenumber).
inline LatticeState perturbed_state(int n, double amplitude, std::uint64_t seed, int max_wavenumber = 1) {
  Rng rng(seed);
  const TrigCoframe frame = TrigCoframe::random(rng, amplitude, max_wavenumber);
  const TrigOneForm u1 = TrigOneForm::random(rng, amplitude, max_wavenumber);
  LatticeState st(n);
  for (std::size_t s = 0; s < st.sites(); ++s) {
    const Point p = st.position(s);
    for (int i = 0; i < 4; ++i)
      for (int mu = 0; mu < 4; ++mu) st.E(s, i, mu) = (i == mu ? 1.0 : 0.0) + frame.pert[i][mu].value(p);
    for (int mu = 0; mu < 4; ++mu) st.A(s, mu) = u1.c[mu].value(p);
  }
  return st;
}

/// Left-multiplies Psi by a constant u in U(2) at every site.
inline LatticeState rotate_state(const LatticeState& st, const std::array<std::array<cplx, 2>, 2>& u) {
  LatticeState out = st;
  for (std::size_t s = 0; s < st.sites(); ++s)
    for (int mu = 0; mu < 4; ++mu) {
      const cplx alpha(st.E(s, 0, mu), st.E(s, 1, mu));
      const cplx beta(st.E(s, 2, mu), st.E(s, 3, mu));
      const cplx na = u[0][0] * alpha + u[0][1] * beta;
      const cplx nb = u[1][0] * alpha + u[1][1] * beta;
      out.E(s, 0, mu) = na.real();
      out.E(s, 1, mu) = na.imag();
      out.E(s, 2, mu) = nb.real();
      out.E(s, 3, mu) = nb.imag();
    }
  return out;
}

/// Translates the state by `d` lattice sites.
inline LatticeState translate_state(const LatticeState& st, const std::array<int, 4>& d) {
  LatticeState out = st;
  for (std::size_t s = 0; s < st.sites(); ++s) {
    const std::size_t from = st.shifted(s, d);
    for (int k = 0; k < 16; ++k) out.psi[s * 16 + static_cast<std::size_t>(k)] = st.psi[from * 16 + static_cast<std::size_t>(k)];
    for (int k = 0; k < 4; ++k) out.a[s * 4 + static_cast<std::size_t>(k)] = st.a[from * 4 + static_cast<std::size_t>(k)];
  }
  return out;
}

/// Layout of the 256 per-site inputs of the local density.
namespace site_layout {
inline constexpr int kCount = 256;
constexpr int E(int i, int mu) { return i * 4 + mu; }
constexpr int dE(int i, int mu, int nu) { return 16 + (i * 4 + mu) * 4 + nu; }             // d_nu E^I_mu
constexpr int ddE(int i, int mu, int k) { return 80 + (i * 4 + mu) * kSymSize + k; }        // k = sym_index
constexpr int dA(int mu, int nu) { return 240 + mu * 4 + nu; }                               // d_mu a_nu
}  // namespace site_layout

/// Enumerates (input slot, flat state entry, weight) for every stencil term
/// feeding the local density at site `s`. The same enumeration gathers inputs
/// and scatters adjoints, so the two stay consistent.
template <typename Visit>
void visit_stencil(const LatticeState& st, std::size_t s, Visit&& visit) {
  using namespace site_layout;
  const double h = st.spacing();
  const double i2h = 1.0 / (2.0 * h);
  const double ih2 = 1.0 / (h * h);
  const double i4h2 = 1.0 / (4.0 * h * h);
  const std::size_t a_off = st.psi.size();
  auto unit = [](int axis, int sign) {
    std::array<int, 4> d{};
    d[axis] = sign;
    return d;
  };
  std::array<std::array<std::size_t, 2>, 4> nb{};
  for (int ax = 0; ax < 4; ++ax) {
    nb[ax][0] = st.shifted(s, unit(ax, -1));
    nb[ax][1] = st.shifted(s, unit(ax, +1));
  }
  for (int i = 0; i < 4; ++i)
    for (int mu = 0; mu < 4; ++mu) {
      const std::size_t off = static_cast<std::size_t>(i * 4 + mu);
      auto entry = [&](std::size_t site) { return site * 16 + off; };
      visit(E(i, mu), entry(s), 1.0);
      for (int nu = 0; nu < 4; ++nu) {
        visit(dE(i, mu, nu), entry(nb[nu][1]), i2h);
        visit(dE(i, mu, nu), entry(nb[nu][0]), -i2h);
        const int kk = sym_index(nu, nu);
        visit(ddE(i, mu, kk), entry(nb[nu][1]), ih2);
        visit(ddE(i, mu, kk), entry(s), -2.0 * ih2);
        visit(ddE(i, mu, kk), entry(nb[nu][0]), ih2);
        for (int rho = nu + 1; rho < 4; ++rho) {
          const int k = sym_index(nu, rho);
          for (int sn : {-1, 1})
            for (int sr : {-1, 1}) {
              std::array<int, 4> d{};
              d[nu] = sn;
              d[rho] = sr;
              visit(ddE(i, mu, k), entry(st.shifted(s, d)), sn * sr * i4h2);
            }
        }
      }
    }
  for (int mu = 0; mu < 4; ++mu)
    for (int nu = 0; nu < 4; ++nu) {
      visit(dA(mu, nu), a_off + nb[mu][1] * 4 + static_cast<std::size_t>(nu), i2h);
      visit(dA(mu, nu), a_off + nb[mu][0] * 4 + static_cast<std::size_t>(nu), -i2h);
    }
}

inline std::array<double, site_layout::kCount> gather_inputs(const LatticeState& st, std::size_t s) {
  std::array<double, site_layout::kCount> in{};
  visit_stencil(st, s, [&](int k, std::size_t entry, double w) { in[static_cast<std::size_t>(k)] += w * st.flat(entry); });
  return in;
}

namespace detail {

/// Determinant and inverse of a 4x4 matrix through 2x2 minors (no pivoting,
/// so it differentiates cleanly).
template <typename T>
T det_inverse4(const std::array<std::array<T, 4>, 4>& m, std::array<std::array<T, 4>, 4>& inv) {
  const T s0 = m[0][0] * m[1][1] - m[1][0] * m[0][1];
  const T s1 = m[0][0] * m[1][2] - m[1][0] * m[0][2];
  const T s2 = m[0][0] * m[1][3] - m[1][0] * m[0][3];
  const T s3 = m[0][1] * m[1][2] - m[1][1] * m[0][2];
  const T s4 = m[0][1] * m[1][3] - m[1][1] * m[0][3];
  const T s5 = m[0][2] * m[1][3] - m[1][2] * m[0][3];
  const T c5 = m[2][2] * m[3][3] - m[3][2] * m[2][3];
  const T c4 = m[2][1] * m[3][3] - m[3][1] * m[2][3];
  const T c3 = m[2][1] * m[3][2] - m[3][1] * m[2][2];
  const T c2 = m[2][0] * m[3][3] - m[3][0] * m[2][3];
  const T c1 = m[2][0] * m[3][2] - m[3][0] * m[2][2];
  const T c0 = m[2][0] * m[3][1] - m[3][0] * m[2][1];
  const T det = s0 * c5 - s1 * c4 + s2 * c3 + s3 * c2 - s4 * c1 + s5 * c0;
  const T id = T(1.0) / det;
  inv[0][0] = (m[1][1] * c5 - m[1][2] * c4 + m[1][3] * c3) * id;
  inv[0][1] = (-m[0][1] * c5 + m[0][2] * c4 - m[0][3] * c3) * id;
  inv[0][2] = (m[3][1] * s5 - m[3][2] * s4 + m[3][3] * s3) * id;
  inv[0][3] = (-m[2][1] * s5 + m[2][2] * s4 - m[2][3] * s3) * id;
  inv[1][0] = (-m[1][0] * c5 + m[1][2] * c2 - m[1][3] * c1) * id;
  inv[1][1] = (m[0][0] * c5 - m[0][2] * c2 + m[0][3] * c1) * id;
  inv[1][2] = (-m[3][0] * s5 + m[3][2] * s2 - m[3][3] * s1) * id;
  inv[1][3] = (m[2][0] * s5 - m[2][2] * s2 + m[2][3] * s1) * id;
  inv[2][0] = (m[1][0] * c4 - m[1][1] * c2 + m[1][3] * c0) * id;
  inv[2][1] = (-m[0][0] * c4 + m[0][1] * c2 - m[0][3] * c0) * id;
  inv[2][2] = (m[3][0] * s4 - m[3][1] * s2 + m[3][3] * s0) * id;
  inv[2][3] = (-m[2][0] * s4 + m[2][1] * s2 - m[2][3] * s0) * id;
  inv[3][0] = (-m[1][0] * c3 + m[1][1] * c1 - m[1][2] * c0) * id;
  inv[3][1] = (m[0][0] * c3 - m[0][1] * c1 + m[0][2] * c0) * id;
  inv[3][2] = (-m[3][0] * s3 + m[3][1] * s1 - m[3][2] * s0) * id;
  inv[3][3] = (m[2][0] * s3 - m[2][1] * s1 + m[2][2] * s0) * id;
  return det;
}

}  // namespace detail

/// Pieces of the local density, exposed for testing.
template <typename T>
struct SiteDensity {
  T density{};
  T s{};          // half the Riemannian scalar curvature
  T det{};        // det E, the dV coefficient
  T omega_ida{};  // (omega ^ i da)_{1234}
};

/// Local density at one site from its 256 stencil inputs. The scalar
/// curvature is computed through Christoffel symbols of g = E^T E.
template <typename T>
SiteDensity<T> local_density(const std::array<T, site_layout::kCount>& in, double lambda, double mu_tilde) {
  using namespace site_layout;
  using M4 = std::array<std::array<T, 4>, 4>;
  M4 e{};
  for (int i = 0; i < 4; ++i)
    for (int mu = 0; mu < 4; ++mu) e[i][mu] = in[E(i, mu)];
  M4 einv{};
  const T det = detail::det_inverse4(e, einv);

  // g, first and second derivatives of g
  M4 g{};
  M4 ginv{};
  std::array<M4, 4> dg{};
  std::array<M4, kSymSize> ddg{};
  for (int mu = 0; mu < 4; ++mu)
    for (int nu = mu; nu < 4; ++nu) {
      T acc(0.0);
      T acc_inv(0.0);
      for (int i = 0; i < 4; ++i) {
        acc += e[i][mu] * e[i][nu];
        acc_inv += einv[mu][i] * einv[nu][i];
      }
      g[mu][nu] = g[nu][mu] = acc;
      ginv[mu][nu] = ginv[nu][mu] = acc_inv;
      for (int r = 0; r < 4; ++r) {
        T d(0.0);
        for (int i = 0; i < 4; ++i) d += in[dE(i, mu, r)] * e[i][nu] + e[i][mu] * in[dE(i, nu, r)];
        dg[r][mu][nu] = dg[r][nu][mu] = d;
      }
      for (int r = 0; r < 4; ++r)
        for (int q = r; q < 4; ++q) {
          const int k = sym_index(r, q);
          T d(0.0);
          for (int i = 0; i < 4; ++i)
            d += in[ddE(i, mu, k)] * e[i][nu] + in[dE(i, mu, r)] * in[dE(i, nu, q)] +
                 in[dE(i, mu, q)] * in[dE(i, nu, r)] + e[i][mu] * in[ddE(i, nu, k)];
          ddg[k][mu][nu] = ddg[k][nu][mu] = d;
        }
    }

  // Gamma_{k mu nu} lowered, Gamma^l_{mu nu}, and their derivatives
  std::array<M4, 4> gl{};
  for (int k = 0; k < 4; ++k)
    for (int mu = 0; mu < 4; ++mu)
      for (int nu = mu; nu < 4; ++nu)
        gl[k][mu][nu] = gl[k][nu][mu] = T(0.5) * (dg[mu][k][nu] + dg[nu][k][mu] - dg[k][mu][nu]);
  std::array<M4, 4> gu{};
  for (int l = 0; l < 4; ++l)
    for (int mu = 0; mu < 4; ++mu)
      for (int nu = mu; nu < 4; ++nu) {
        T acc(0.0);
        for (int k = 0; k < 4; ++k) acc += ginv[l][k] * gl[k][mu][nu];
        gu[l][mu][nu] = gu[l][nu][mu] = acc;
      }
  // d_s g^{lk} = -g^{la} d_s g_ab g^{bk}
  std::array<M4, 4> dginv{};
  for (int sgm = 0; sgm < 4; ++sgm) {
    M4 tmp{};
    for (int l = 0; l < 4; ++l)
      for (int b = 0; b < 4; ++b) {
        T acc(0.0);
        for (int a = 0; a < 4; ++a) acc += ginv[l][a] * dg[sgm][a][b];
        tmp[l][b] = acc;
      }
    for (int l = 0; l < 4; ++l)
      for (int k = l; k < 4; ++k) {
        T acc(0.0);
        for (int b = 0; b < 4; ++b) acc += tmp[l][b] * ginv[b][k];
        dginv[sgm][l][k] = dginv[sgm][k][l] = -acc;
      }
  }
  // Contracted derivatives needed by the Ricci scalar:
  //   R = g^{mu nu} (d_l G^l_{mu nu} - d_nu G^l_{mu l} + G^l_{l k} G^k_{mu nu} - G^l_{nu k} G^k_{mu l})
  auto dgu = [&](int sgm, int l, int mu, int nu) {
    T acc(0.0);
    for (int k = 0; k < 4; ++k) {
      const T dgl = T(0.5) * (ddg[sym_index(sgm, mu)][k][nu] + ddg[sym_index(sgm, nu)][k][mu] - ddg[sym_index(sgm, k)][mu][nu]);
      acc += dginv[sgm][l][k] * gl[k][mu][nu] + ginv[l][k] * dgl;
    }
    return acc;
  };
  T ricci_scalar(0.0);
  for (int mu = 0; mu < 4; ++mu)
    for (int nu = 0; nu < 4; ++nu) {
      T r(0.0);
      for (int l = 0; l < 4; ++l) {
        r += dgu(l, l, mu, nu) - dgu(nu, l, mu, l);
        for (int k = 0; k < 4; ++k) r += gu[l][l][k] * gu[k][mu][nu] - gu[l][nu][k] * gu[k][mu][l];
      }
      ricci_scalar += ginv[mu][nu] * r;
    }
  const T s = T(0.5) * ricci_scalar;

  // omega_{mu nu} and (i da)_{mu nu}
  auto om = [&](int mu, int nu) { return e[0][mu] * e[1][nu] - e[0][nu] * e[1][mu] + e[2][mu] * e[3][nu] - e[2][nu] * e[3][mu]; };
  auto ida = [&](int mu, int nu) { return in[dA(nu, mu)] - in[dA(mu, nu)]; };
  const T wedge4 = om(0, 1) * ida(2, 3) - om(0, 2) * ida(1, 3) + om(0, 3) * ida(1, 2) + om(1, 2) * ida(0, 3) -
                   om(1, 3) * ida(0, 2) + om(2, 3) * ida(0, 1);

  SiteDensity<T> out;
  out.s = s;
  out.det = det;
  out.omega_ida = wedge4;
  out.density = T(-lambda) * ((s + T(2.0 * mu_tilde - 6.0)) * det - T(2.0 * mu_tilde) * wedge4);
  return out;
}

struct FlowConfig {
  double mu_tilde = 3.0;
  double lambda_overall = 1.0;
  double step = 1e-2;         // initial (and maximal) step size
  int max_iters = 200;
  double grad_tol = 1e-10;
  double backtrack = 0.5;
  double armijo = 1e-4;
  int max_backtracks = 60;
  int residual_every = 1;     // geometric residuals logged every k iterations (0: never)
  double residual_tol = 1e-8; // J-invariance tolerance for the main equation

  void validate() const {
    if (!(step > 0.0)) throw std::invalid_argument("FlowConfig: step must be positive");
    if (!(grad_tol > 0.0)) throw std::invalid_argument("FlowConfig: grad_tol must be positive");
    if (!(backtrack > 0.0 && backtrack < 1.0)) throw std::invalid_argument("FlowConfig: backtrack must lie in (0, 1)");
    if (max_iters < 0) throw std::invalid_argument("FlowConfig: max_iters must be non-negative");
  }
};

inline std::string site_label(const LatticeState& st, std::size_t s) {
  const auto c = st.coords(s);
  return "(" + std::to_string(c[0]) + "," + std::to_string(c[1]) + "," + std::to_string(c[2]) + "," + std::to_string(c[3]) + ")";
}

inline void check_site(const LatticeState& st, std::size_t s, double det) {
  if (!(std::abs(det) >= kSiteDetThreshold))
    throw DegenerateSite("degenerate coframe at site " + site_label(st, s) + ": |det| = " + std::to_string(std::abs(det)));
}

inline double lattice_action(const LatticeState& st, const FlowConfig& cfg) {
  std::vector<double> dens(st.sites());
  parallel_for(st.sites(), [&](std::size_t s) {
    const auto r = local_density(gather_inputs(st, s), cfg.lambda_overall, cfg.mu_tilde);
    check_site(st, s, r.det);
    dens[s] = r.density;
  });
  double sum = 0.0;
  for (double d : dens) sum += d;
  const double h = st.spacing();
  return h * h * h * h * sum;
}

struct LatticeGradient {
  double action = 0.0;
  std::vector<double> g;  // flat layout, psi entries then a entries

  double norm() const {
    double acc = 0.0;
    for (double v : g) acc += v * v;
    return std::sqrt(acc);
  }
};

/// Action and its exact gradient with respect to every state entry.
inline LatticeGradient lattice_gradient(const LatticeState& st, const FlowConfig& cfg) {
  constexpr std::size_t kBlock = 4096;
  LatticeGradient out;
  out.g.assign(st.size(), 0.0);
  const double h = st.spacing();
  const double h4 = h * h * h * h;
  double sum = 0.0;
  std::vector<std::array<double, site_layout::kCount>> adj;
  std::vector<double> dens;
  for (std::size_t lo = 0; lo < st.sites(); lo += kBlock) {
    const std::size_t hi = std::min(st.sites(), lo + kBlock);
    adj.assign(hi - lo, {});
    dens.assign(hi - lo, 0.0);
    parallel_for(hi - lo, [&](std::size_t k) {
      const std::size_t s = lo + k;
      const auto raw = gather_inputs(st, s);
      ad::Tape& tape = ad::Tape::local();
      tape.clear();
      std::array<ad::Var, site_layout::kCount> in;
      for (std::size_t j = 0; j < in.size(); ++j) in[j] = ad::Var::input(raw[j]);
      const auto r = local_density(in, cfg.lambda_overall, cfg.mu_tilde);
      check_site(st, s, r.det.val);
      dens[k] = r.density.val;
      const auto a = tape.adjoints(r.density.idx);
      for (std::size_t j = 0; j < in.size(); ++j) adj[k][j] = a[static_cast<std::size_t>(in[j].idx)];
    });
    // ordered scatter keeps the result independent of the worker count
    for (std::size_t k = 0; k < hi - lo; ++k) {
      sum += dens[k];
      visit_stencil(st, lo + k, [&](int slot, std::size_t entry, double w) {
        out.g[entry] += h4 * w * adj[k][static_cast<std::size_t>(slot)];
      });
    }
  }
  out.action = h4 * sum;
  return out;
}

/// Coframe and u(1) field at one site with finite-difference jets.
struct SiteFields {
  UnitaryCoframe psi;
  MatrixForm a;  // depth 1
};

inline SiteFields site_fields(const LatticeState& st, std::size_t s) {
  using namespace site_layout;
  const auto in = gather_inputs(st, s);
  Mat4<Jet> m{};
  for (int i = 0; i < 4; ++i)
    for (int mu = 0; mu < 4; ++mu) {
      Jet j(in[static_cast<std::size_t>(E(i, mu))]);
      for (int nu = 0; nu < 4; ++nu) j.grad[nu] = in[static_cast<std::size_t>(dE(i, mu, nu))];
      for (int k = 0; k < kSymSize; ++k) j.hess[k] = in[static_cast<std::size_t>(ddE(i, mu, k))];
      m[i][mu] = j;
    }
  SiteFields f;
  f.psi = to_unitary(Coframe::from_matrix(m));
  f.a = MatrixForm(1, 1, 1, 1);
  for (int nu = 0; nu < 4; ++nu) {
    Jet j(cplx(0.0, st.A(s, nu)));
    for (int mu = 0; mu < 4; ++mu) j.grad[mu] = cplx(0.0, in[static_cast<std::size_t>(dA(mu, nu))]);
    f.a(0, 0, nu) = j;
  }
  return f;
}

struct LatticeResiduals {
  double r_ric20 = 0.0;
  double r_da20 = 0.0;
  double r_domega = 0.0;
  double r_mainfeq = 0.0;
  double grad_s = 0.0;         // L2 norm of ds (central differences of per-site s)
  double max_j_defect = 0.0;
  bool mainfeq_conditional = false;
};

namespace detail {

inline double frob_sym(const Mat4<double>& m) {
  double acc = 0.0;
  for (const auto& row : m)
    for (double v : row) acc += v * v;
  return acc;
}

inline double frob_form(const Mat4<double>& m) { return 0.5 * frob_sym(m); }

}  // namespace detail

/// L2 lattice norms sqrt(h^4 sum_sites |X|^2) of the critical-point residuals,
/// using orthonormal-frame components at each site.
inline LatticeResiduals lattice_residuals(const LatticeState& st, double mu_tilde, double tol = 1e-8) {
  const cplx i(0.0, 1.0);
  struct Site {
    double ric20 = 0, da20 = 0, domega = 0, mainfeq = 0, s = 0, defect = 0;
  };
  std::vector<Site> per(st.sites());
  parallel_for(st.sites(), [&](std::size_t s) {
    const SiteFields f = site_fields(st, s);
    const Coframe c = to_real(f.psi);
    const double det = c.determinant_value();
    check_site(st, s, det);
    const PointGeometry g(f.psi);
    const FrameBasis fb(g.coframe);
    const RicciData& rd = g.ricci;
    const Mat4<double> ida = frame_components(i * exterior_d(f.a), fb);
    Site out;
    out.ric20 = detail::frob_sym(type_split_frame(rd.ric, rd.J).part20);
    out.da20 = detail::frob_form(type_split_frame(ida, rd.J).part20);
    const MatrixForm dom = fb.to_frame(exterior_d(g.forms.omega));
    for (const auto& j : dom.coefficients()) out.domega += std::norm(j.value);
    out.mainfeq = detail::frob_form(mainfeq_defect(g, ida, mu_tilde));
    out.s = g.scalar.s;
    out.defect = rd.defect;
    per[s] = out;
  });
  const double h = st.spacing();
  const double h4 = h * h * h * h;
  LatticeResiduals r;
  double gs = 0.0;
  for (std::size_t s = 0; s < st.sites(); ++s) {
    r.r_ric20 += per[s].ric20;
    r.r_da20 += per[s].da20;
    r.r_domega += per[s].domega;
    r.r_mainfeq += per[s].mainfeq;
    r.max_j_defect = std::max(r.max_j_defect, per[s].defect);
    for (int mu = 0; mu < 4; ++mu) {
      std::array<int, 4> up{};
      std::array<int, 4> dn{};
      up[mu] = 1;
      dn[mu] = -1;
      const double d = (per[st.shifted(s, up)].s - per[st.shifted(s, dn)].s) / (2.0 * h);
      gs += d * d;
    }
  }
  r.r_ric20 = std::sqrt(h4 * r.r_ric20);
  r.r_da20 = std::sqrt(h4 * r.r_da20);
  r.r_domega = std::sqrt(h4 * r.r_domega);
  r.r_mainfeq = std::sqrt(h4 * r.r_mainfeq);
  r.grad_s = std::sqrt(h4 * gs);
  r.mainfeq_conditional = r.max_j_defect > tol;
  return r;
}

struct FlowEntry {
  int iter = 0;
  double action = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;  // step accepted to reach this state (0 for the initial state)
  std::optional<LatticeResiduals> residuals;
};

struct FlowLog {
  std::vector<FlowEntry> entries;
  std::string termination;  // converged | max_iters | line_search_failed | degenerate
  std::string message;
  LatticeResiduals initial_residuals;
  LatticeResiduals final_residuals;
};

/// Gradient descent with Armijo backtracking. `st` is updated in place; the
/// optional observer sees every log entry as it is produced.
inline FlowLog descend(LatticeState& st, const FlowConfig& cfg,
                       const std::function<void(const FlowEntry&)>& observer = {}) {
  cfg.validate();
  FlowLog log;
  auto residuals_due = [&](int it) { return cfg.residual_every > 0 && it % cfg.residual_every == 0; };
  auto emit = [&](FlowEntry e) {
    if (observer) observer(e);
    log.entries.push_back(std::move(e));
  };
  try {
    log.initial_residuals = lattice_residuals(st, cfg.mu_tilde, cfg.residual_tol);
    LatticeGradient cur = lattice_gradient(st, cfg);
    FlowEntry first{0, cur.action, cur.norm(), 0.0, {}};
    if (residuals_due(0)) first.residuals = log.initial_residuals;
    emit(first);
    double t = cfg.step;
    int it = 0;
    for (;;) {
      const double gn = cur.norm();
      if (gn <= cfg.grad_tol) {
        log.termination = "converged";
        break;
      }
      if (it >= cfg.max_iters) {
        log.termination = "max_iters";
        break;
      }
      const double g2 = gn * gn;
      t = std::min(cfg.step, 2.0 * t);
      bool accepted = false;
      LatticeState trial = st;
      double trial_action = 0.0;
      for (int b = 0; b <= cfg.max_backtracks; ++b) {
        for (std::size_t k = 0; k < st.size(); ++k) trial.flat(k) = st.flat(k) - t * cur.g[k];
        try {
          trial_action = lattice_action(trial, cfg);
          if (std::isfinite(trial_action) && trial_action <= cur.action - cfg.armijo * t * g2) {
            accepted = true;
            break;
          }
        } catch (const DegenerateSite&) {
          // too long a step left the nondegenerate region; shorten it
        }
        t *= cfg.backtrack;
      }
      if (!accepted) {
        log.termination = "line_search_failed";
        log.message = "no step satisfied the sufficient-decrease condition";
        break;
      }
      st = std::move(trial);
      ++it;
      cur = lattice_gradient(st, cfg);
      if (!std::isfinite(cur.norm())) {
        log.termination = "degenerate";
        log.message = "gradient overflowed at iteration " + std::to_string(it);
        break;
      }
      FlowEntry e{it, cur.action, cur.norm(), t, {}};
      if (residuals_due(it)) e.residuals = lattice_residuals(st, cfg.mu_tilde, cfg.residual_tol);
      emit(e);
    }
  } catch (const DegenerateSite& e) {
    log.termination = "degenerate";
    log.message = e.what();
    return log;
  }
  log.final_residuals = lattice_residuals(st, cfg.mu_tilde, cfg.residual_tol);
  return log;
}

}  // namespace mdm
