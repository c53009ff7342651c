#pragma once

// Batch commands behind the mdm CLI. Each returns a RunReport; the CLI only
// parses flags, prints and maps the verdict to an exit code.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mdm/cartan_su3.hpp"
#include "mdm/fields.hpp"
#include "mdm/frame_geometry.hpp"
#include "mdm/lattice.hpp"
#include "mdm/lattice_io.hpp"

namespace mdm {

inline constexpr const char* kReportVersion = "1";

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct Check {
  std::string name;
  std::string identity;
  double residual = 0.0;
  double tol = 0.0;
  bool pass = false;
};

inline Check make_check(std::string name, std::string identity, double residual, double tol) {
  const bool ok = std::isfinite(residual) && residual <= tol;
  return {std::move(name), std::move(identity), residual, tol, ok};
}

struct RunReport {
  std::string command;
  nlohmann::json params = nlohmann::json::object();
  std::uint64_t seed = 0;
  double tol = 0.0;
  std::vector<Check> checks;
  nlohmann::json info = nlohmann::json::object();
  std::optional<double> wall_time_s;

  bool passed() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
  int exit_code() const { return passed() ? 0 : 1; }

  nlohmann::json to_json() const {
    nlohmann::json cs = nlohmann::json::array();
    for (const auto& c : checks)
      cs.push_back({{"name", c.name}, {"identity", c.identity}, {"residual", c.residual}, {"tol", c.tol}, {"pass", c.pass}});
    nlohmann::json j{{"command", command}, {"version", kReportVersion}, {"params", params}, {"seed", seed},
                     {"tol", tol},         {"checks", cs},             {"info", info},     {"pass", passed()}};
    if (wall_time_s) j["wall_time_s"] = *wall_time_s;
    return j;
  }

  void write_json(std::ostream& out) const { out << to_json().dump(2) << '\n'; }

  void write_csv(std::ostream& out) const {
    std::ostringstream num;
    num.precision(17);
    out << "name,residual,tol,pass\n";
    for (const auto& c : checks) {
      num.str("");
      num << c.residual << ',' << c.tol;
      out << c.name << ',' << num.str() << ',' << (c.pass ? "true" : "false") << '\n';
    }
  }
};

/// Running maximum of a residual over sample points.
struct MaxResidual {
  std::string name;
  std::string identity;
  double value = 0.0;
  void add(double r) { value = std::isnan(r) ? r : std::max(value, r); }
};

inline const std::vector<double>& insertion_values() {
  static const std::vector<double> cs = {-2.0, 0.0, 0.5, 2.0};
  return cs;
}

/// Pointwise identity residuals that hold for any coframe.
struct FrameIdentityResiduals {
  double u2_torsion = 0.0;
  double d_sigma = 0.0;
  double d_omega = 0.0;
  double d_Omega = 0.0;
  double pfp_R = 0.0;
  double omega_sq = 0.0;
  double bianchi = 0.0;
  double dd = 0.0;
};

inline FrameIdentityResiduals frame_identities(const PointGeometry& g) {
  const cplx i(0.0, 1.0);
  FrameIdentityResiduals r;
  const MatrixForm& psi = g.psi.psi;
  const MatrixForm& T = g.u2.T;
  const MatrixForm& Om = g.forms.Omega;
  const MatrixForm om_a = (-i) * g.forms.omega;
  r.u2_torsion = u2_torsion(g.psi, g.u2).max_norm();
  r.d_sigma = covariant_d_adjoint(g.forms.Sigma, g.u2.bw).max_norm();
  r.d_omega = (exterior_d(om_a) + 0.5 * wedge(conj(T), Om) - 0.5 * wedge(T, conj(Om))).max_norm();
  r.d_Omega = (exterior_d(Om) + 2.0 * wedge(g.u2.h, Om) - wedge(T, om_a)).max_norm();
  r.pfp_R = (wedge(dagger(psi), g.su2.F, psi) + g.scalar.s * g.forms.dV).max_norm();
  const MatrixForm pdp = wedge(dagger(psi), psi);
  r.omega_sq = (wedge(pdp, pdp) + 8.0 * g.forms.dV).max_norm();
  r.bianchi = bianchi_first(g.R, g.coframe).max_norm();
  r.dd = exterior_d(exterior_d(psi)).max_norm();
  return r;
}

/// The full identity suite at `points` sample points of a background.
/// Gauge data for the su(3) identities is drawn from a second stream.
inline std::vector<Check> identity_suite(const Background& bg, std::uint64_t seed, int points, double tol) {
  Rng point_rng(seed);
  Rng gauge_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  MaxResidual ut{"u2-torsion", "dPsi + (bw + I h) Psi + (1/2) T eps Psibar = 0"};
  MaxResidual ds{"d-Sigma-LC", "d Sigma + [bw, Sigma] = 0"};
  MaxResidual dw{"d-omega", "d omega_a = -(1/2) Tbar Omega + (1/2) T Omegabar"};
  MaxResidual dO{"d-Omega", "(d + 2h) Omega = T omega_a"};
  MaxResidual pf{"relation-pfp-R", "Psi^dagger F(bw) Psi + s dV = 0"};
  MaxResidual o2{"omega-2", "(Psi^dagger Psi)^2 + 8 dV = 0"};
  MaxResidual bi{"bianchi", "R^IJ e^J = 0"};
  MaxResidual dd{"d-squared", "d d Psi = 0"};
  MaxResidual ex{"expansion-identity", "Tr(gamma F F) = topological + exact + (c - 1) model terms"};
  MaxResidual el{"direct-el", "D(gamma F + F gamma) = (c - 1) x block equations"};
  MaxResidual cr{"coefficient-relation", "3 lambda - mu + 4 nu = 0"};
  for (int k = 0; k < points; ++k) {
    const Point p = bg.sample(point_rng);
    const PointGeometry g(bg.psi(p));
    const FrameIdentityResiduals r = frame_identities(g);
    ut.add(r.u2_torsion);
    ds.add(r.d_sigma);
    dw.add(r.d_omega);
    dO.add(r.d_Omega);
    pf.add(r.pfp_R);
    o2.add(r.omega_sq);
    bi.add(r.bianchi);
    dd.add(r.dd);
    const GaugeFieldSample gs = GaugeFieldSample::random(gauge_rng);
    Su3Connection conn;
    conn.Psi = g.psi.psi;
    conn.A = gs.A(p);
    conn.a = gs.a(p);
    for (double c : insertion_values()) {
      ex.add(expansion_identity_residual(conn, c));
      el.add((direct_el_matrix(conn, c) - el_matrix_blocks(conn, c)).max_norm());
    }
    const double pq[4] = {gauge_rng.uniform(-2, 2), gauge_rng.uniform(-2, 2), gauge_rng.uniform(-2, 2),
                          gauge_rng.uniform(-2, 2)};
    cr.add(std::abs(coeffs_from_pqrs(pq[0], pq[1], pq[2], pq[3]).relation()));
  }
  std::vector<Check> out;
  for (const MaxResidual* m : {&ut, &ds, &dw, &dO, &pf, &o2, &bi, &dd, &ex, &el, &cr})
    out.push_back(make_check(m->name, m->identity, m->value, tol));
  return out;
}

/// Half-Riemannian scalar curvature expected on the named model spaces.
inline std::optional<double> expected_scalar(const std::string& manifold) {
  if (manifold == "flat" || manifold == "t4") return 0.0;
  if (manifold == "s2xr2") return 1.0;
  if (manifold == "cp2") return 12.0;
  return std::nullopt;
}

inline double scalar_tolerance(const std::string& manifold) { return manifold == "cp2" ? 1e-6 : 1e-8; }

inline void require_manifold(const std::string& manifold) {
  for (const char* m : {"flat", "t4", "s2xr2", "cp2", "random"})
    if (manifold == m) return;
  throw UsageError("unknown manifold '" + manifold + "' (expected flat|t4|s2xr2|cp2|random)");
}

struct Stopwatch {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

inline RunReport cmd_verify(const std::string& manifold, std::uint64_t seed, double tol, int points = 20) {
  require_manifold(manifold);
  const Background bg = background_by_name(manifold, seed);
  RunReport rep;
  rep.command = "verify";
  rep.params = {{"manifold", manifold}, {"points", points}};
  rep.seed = seed;
  rep.tol = tol;
  rep.checks = identity_suite(bg, seed, points, tol);

  Rng rng(seed);
  double s_min = INFINITY, s_max = -INFINITY, s_err = 0.0;
  double ke_max = 0.0;
  const auto expected = expected_scalar(manifold);
  for (int k = 0; k < points; ++k) {
    const PointGeometry g(bg.psi(bg.sample(rng)));
    s_min = std::min(s_min, g.scalar.s);
    s_max = std::max(s_max, g.scalar.s);
    if (expected) s_err = std::max(s_err, std::abs(g.scalar.s - *expected));
    if (manifold == "cp2") {
      const auto ke = kahler_einstein_check(g, canonical_connection(g).a);
      ke_max = std::max({ke_max, ke.ida_omega, ke.F_Sigma, ke.T});
    }
  }
  rep.info["s_min"] = s_min;
  rep.info["s_max"] = s_max;
  if (expected) {
    rep.info["s_expected"] = *expected;
    rep.checks.push_back(make_check("scalar-curvature", "s = " + nlohmann::json(*expected).dump(), s_err,
                                    std::max(tol, scalar_tolerance(manifold))));
  }
  if (manifold == "cp2")
    rep.checks.push_back(make_check("kahler-einstein", "i da = omega, F(bw) = Sigma, T = 0", ke_max, tol));
  return rep;
}

inline RunReport cmd_params(double p, double q, double r, double s, double tol = 1e-12) {
  RunReport rep;
  rep.command = "params";
  rep.params = {{"p", p}, {"q", q}, {"r", r}, {"s", s}};
  rep.tol = tol;
  const ModelCoefficients m = coeffs_from_pqrs(p, q, r, s);
  rep.info["lambda"] = m.lambda;
  rep.info["mu"] = m.mu;
  rep.info["nu"] = m.nu;
  if (m.lambda != 0.0) {
    const RescaledCoefficients rc = rescaled(m);
    rep.info["mu_tilde"] = rc.mu_tilde;
    rep.info["nu_tilde"] = rc.nu_tilde;
  } else {
    rep.info["mu_tilde"] = nullptr;
    rep.info["nu_tilde"] = nullptr;
    rep.info["flags"] = {"lambda_zero: rescaled coefficients undefined"};
  }
  rep.checks.push_back(make_check("coefficient-relation", "3 lambda - mu + 4 nu = 0", std::abs(m.relation()), tol));
  return rep;
}

inline nlohmann::json mat_json(const Mat4<double>& m) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& row : m) j.push_back(row);
  return j;
}

inline RunReport cmd_curvature(const std::string& manifold, int points, std::uint64_t seed, double mu_tilde = 3.0,
                               double tol = 1e-8) {
  require_manifold(manifold);
  if (points < 1) throw UsageError("--points must be positive");
  const Background bg = background_by_name(manifold, seed);
  RunReport rep;
  rep.command = "curvature";
  rep.params = {{"manifold", manifold}, {"points", points}, {"mu_tilde", mu_tilde}};
  rep.seed = seed;
  rep.tol = tol;
  Rng rng(seed);
  const auto expected = expected_scalar(manifold);
  double s_err = 0.0;
  double rho_plus_err = 0.0;
  nlohmann::json pts = nlohmann::json::array();
  for (int k = 0; k < points; ++k) {
    const Point p = bg.sample(rng);
    const PointGeometry g(bg.psi(p));
    const Su3Connection conn = canonical_connection(g);
    const GeometricResiduals el = el_residuals_pointwise(g, conn.a, mu_tilde, tol);
    const RicciData& rd = g.ricci;
    const double rp = max_abs(rd.rho_plus - (0.25 * rd.s) * rd.J);
    rho_plus_err = std::max(rho_plus_err, rp);
    if (expected) s_err = std::max(s_err, std::abs(g.scalar.s - *expected));
    pts.push_back({{"x", p},
                   {"s", g.scalar.s},
                   {"s_riemannian", g.scalar.riemannian},
                   {"T_norm", g.u2.T.max_norm()},
                   {"rho_plus", mat_json(rd.rho_plus)},
                   {"rho_minus", mat_json(rd.rho_minus)},
                   {"rho_plus_minus_s_omega_over_4", rp},
                   {"el",
                    {{"r_ric20", el.r_ric20},
                     {"r_da20", el.r_da20},
                     {"r_domega", el.r_domega},
                     {"r_mainfeq", el.r_mainfeq},
                     {"j_defect", el.j_defect},
                     {"mainfeq_conditional", el.mainfeq_conditional}}}});
  }
  rep.info["points"] = pts;
  if (expected)
    rep.checks.push_back(make_check("scalar-curvature", "s = " + nlohmann::json(*expected).dump(), s_err,
                                    std::max(tol, scalar_tolerance(manifold))));
  if (manifold == "cp2")
    rep.checks.push_back(make_check("rho-plus", "rho+ = (s/4) omega", rho_plus_err, std::max(tol, 1e-6)));
  return rep;
}

struct FlowRequest {
  int n = 4;
  double mu_tilde = 3.0;
  std::string init = "perturbed";  // flat | perturbed | t4 | random | s2xr2 | cp2 | checkpoint
  std::string checkpoint_in;
  std::string checkpoint_out;
  int steps = 200;
  double step = 1e-2;
  double amplitude = 1e-2;
  double lambda_overall = 1.0;
  double grad_tol = 1e-10;
  int residual_every = 10;
  std::uint64_t seed = 0;
};

inline LatticeState initial_state(const FlowRequest& req) {
  if (req.n != 4 && req.n != 8 && req.n != 16) throw UsageError("--n must be 4, 8 or 16");
  if (req.init == "flat") return flat_state(req.n);
  if (req.init == "perturbed") return perturbed_state(req.n, req.amplitude, req.seed);
  if (req.init == "checkpoint") {
    if (req.checkpoint_in.empty()) throw UsageError("--init checkpoint needs --checkpoint-in");
    LatticeState st = load_checkpoint(req.checkpoint_in);
    if (st.n != req.n) throw UsageError("checkpoint has n = " + std::to_string(st.n));
    return st;
  }
  require_manifold(req.init);
  try {
    return sample_background(background_by_name(req.init, req.seed), req.n);
  } catch (const TopologyError& e) {
    throw UsageError(e.what());
  }
}

inline FlowConfig flow_config(const FlowRequest& req) {
  FlowConfig cfg;
  cfg.mu_tilde = req.mu_tilde;
  cfg.lambda_overall = req.lambda_overall;
  cfg.step = req.step;
  cfg.max_iters = req.steps;
  cfg.grad_tol = req.grad_tol;
  cfg.residual_every = req.residual_every;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

inline nlohmann::json request_json(const FlowRequest& req) {
  return {{"n", req.n},         {"mu_tilde", req.mu_tilde},       {"init", req.init},
          {"steps", req.steps}, {"step", req.step},               {"amplitude", req.amplitude},
          {"lambda", req.lambda_overall}, {"grad_tol", req.grad_tol}};
}

/// Runs the flow. Log entries are streamed to `log_out` as JSON lines (or
/// CSV rows) while the descent runs.
inline RunReport cmd_flow(const FlowRequest& req, std::ostream* log_out = nullptr, bool csv_log = false,
                          FlowLog* log_sink = nullptr) {
  const FlowConfig cfg = flow_config(req);
  LatticeState st = initial_state(req);
  RunReport rep;
  rep.command = "flow";
  rep.params = request_json(req);
  rep.seed = req.seed;
  rep.tol = req.grad_tol;
  if (log_out && csv_log) *log_out << "iter,action,grad_norm,step,r_ric20,r_da20,r_domega,r_mainfeq\n";
  auto observer = [&](const FlowEntry& e) {
    if (!log_out) return;
    if (csv_log) {
      FlowLog one;
      one.entries.push_back(e);
      std::ostringstream tmp;
      write_csv(one, tmp);
      const std::string s = tmp.str();
      *log_out << s.substr(s.find('\n') + 1);
    } else {
      *log_out << to_json(e).dump() << '\n';
    }
    log_out->flush();
  };
  FlowLog log = descend(st, cfg, observer);
  double max_increase = 0.0;
  for (std::size_t k = 1; k < log.entries.size(); ++k)
    max_increase = std::max(max_increase, log.entries[k].action - log.entries[k - 1].action);
  const bool normal = log.termination == "converged" || log.termination == "max_iters";
  rep.checks.push_back(make_check("action-monotone", "S(k+1) <= S(k)", max_increase, 0.0));
  rep.checks.push_back(make_check("flow-completed", "termination in {converged, max_iters}", normal ? 0.0 : 1.0, 0.0));
  rep.info["termination"] = log.termination;
  if (!log.message.empty()) rep.info["message"] = log.message;
  rep.info["iterations"] = log.entries.empty() ? 0 : log.entries.back().iter;
  if (!log.entries.empty()) {
    rep.info["initial_action"] = log.entries.front().action;
    rep.info["final_action"] = log.entries.back().action;
    rep.info["initial_grad_norm"] = log.entries.front().grad_norm;
    rep.info["final_grad_norm"] = log.entries.back().grad_norm;
  }
  rep.info["initial_residuals"] = to_json(log.initial_residuals);
  if (log.termination != "degenerate") rep.info["final_residuals"] = to_json(log.final_residuals);
  if (!req.checkpoint_out.empty()) save_checkpoint(st, req.checkpoint_out);
  if (log_sink) *log_sink = std::move(log);
  return rep;
}

/// Lattice action and gradient norm of an initial state, with the
/// finite-difference gradient agreement at a few entries.
inline RunReport cmd_action(const FlowRequest& req, double tol = 1e-6) {
  const FlowConfig cfg = flow_config(req);
  const LatticeState st = initial_state(req);
  RunReport rep;
  rep.command = "action";
  rep.params = request_json(req);
  rep.seed = req.seed;
  rep.tol = tol;
  const LatticeGradient g = lattice_gradient(st, cfg);
  rep.info["action"] = g.action;
  rep.info["grad_norm"] = g.norm();
  Rng rng(req.seed);
  double worst = 0.0;
  for (int k = 0; k < 8; ++k) {
    const auto idx = static_cast<std::size_t>(rng.uniform() * static_cast<double>(st.size()));
    LatticeState up = st, dn = st;
    const double h = 1e-5;
    up.flat(idx) += h;
    dn.flat(idx) -= h;
    const double fd = (lattice_action(up, cfg) - lattice_action(dn, cfg)) / (2.0 * h);
    const double scale = std::max({std::abs(fd), std::abs(g.g[idx]), 1e-3});
    worst = std::max(worst, std::abs(fd - g.g[idx]) / scale);
  }
  rep.checks.push_back(make_check("gradient-fd", "dS/dx = central difference", worst, tol));
  return rep;
}

}  // namespace mdm
