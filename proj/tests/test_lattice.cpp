#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>

#include "mdm/lattice.hpp"
#include "mdm/lattice_io.hpp"
#include "support.hpp"

using namespace mdm;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

FlowConfig config(double mu_tilde, double lambda = 1.0) {
  FlowConfig c;
  c.mu_tilde = mu_tilde;
  c.lambda_overall = lambda;
  return c;
}

double fd_entry(LatticeState st, const FlowConfig& cfg, std::size_t k, double h = 1e-5) {
  const double x = st.flat(k);
  st.flat(k) = x + h;
  const double up = lattice_action(st, cfg);
  st.flat(k) = x - h;
  const double dn = lattice_action(st, cfg);
  return (up - dn) / (2 * h);
}

// Smooth fields depending on x0, x1 only, with exact jets.
struct PlaneFields {
  Mat4<Jet> e;
  std::array<Jet, 4> a;
};

PlaneFields plane_fields(const Point& p) {
  const auto x = coordinates(p);
  const Jet u = sin(x[0]) * cos(x[1]);
  const Jet v = cos(x[0] + x[1]);
  PlaneFields f;
  for (int i = 0; i < 4; ++i)
    for (int mu = 0; mu < 4; ++mu) {
      const double c1 = 0.05 * std::sin(1.0 + 3 * i + mu);
      const double c2 = 0.04 * std::cos(2.0 + i - 2 * mu);
      f.e[i][mu] = Jet(i == mu ? 1.0 : 0.0) + c1 * u + c2 * v;
    }
  for (int mu = 0; mu < 4; ++mu) f.a[mu] = (0.1 + 0.03 * mu) * v + 0.07 * u;
  return f;
}

std::array<double, site_layout::kCount> exact_inputs(const Point& p) {
  using namespace site_layout;
  const PlaneFields f = plane_fields(p);
  std::array<double, kCount> in{};
  for (int i = 0; i < 4; ++i)
    for (int mu = 0; mu < 4; ++mu) {
      in[E(i, mu)] = f.e[i][mu].value.real();
      for (int nu = 0; nu < 4; ++nu) in[dE(i, mu, nu)] = f.e[i][mu].grad[nu].real();
      for (int k = 0; k < kSymSize; ++k) in[ddE(i, mu, k)] = f.e[i][mu].hess[k].real();
    }
  for (int mu = 0; mu < 4; ++mu)
    for (int nu = 0; nu < 4; ++nu) in[dA(mu, nu)] = f.a[nu].grad[mu].real();
  return in;
}

LatticeState plane_state(int n) {
  LatticeState st(n);
  for (std::size_t s = 0; s < st.sites(); ++s) {
    const PlaneFields f = plane_fields(st.position(s));
    for (int i = 0; i < 4; ++i)
      for (int mu = 0; mu < 4; ++mu) st.E(s, i, mu) = f.e[i][mu].value.real();
    for (int mu = 0; mu < 4; ++mu) st.A(s, mu) = f.a[mu].value.real();
  }
  return st;
}

class ThreadsEnv {
 public:
  explicit ThreadsEnv(const char* value) {
    if (const char* old = std::getenv("MDM_THREADS")) saved_ = old;
    setenv("MDM_THREADS", value, 1);
  }
  ~ThreadsEnv() {
    if (saved_.empty())
      unsetenv("MDM_THREADS");
    else
      setenv("MDM_THREADS", saved_.c_str(), 1);
  }

 private:
  std::string saved_;
};

}  // namespace

TEST(LatticeAction, FlatValues) {
  const LatticeState st = flat_state(4);
  EXPECT_NEAR(lattice_action(st, config(3.0)), 0.0, 1e-12);
  const double expect = -2.0 * std::pow(kTwoPi, 4);
  EXPECT_NEAR(lattice_action(st, config(4.0)), expect, 1e-9 * std::abs(expect));
}

TEST(LatticeAction, LinearInOverallScale) {
  const LatticeState st = perturbed_state(4, 0.05, 3);
  const double one = lattice_action(st, config(2.0, 1.0));
  EXPECT_NEAR(lattice_action(st, config(2.0, -2.5)), -2.5 * one, 1e-12 * std::abs(one));
}

TEST(LatticeAction, TranslationInvariant) {
  const LatticeState st = perturbed_state(4, 0.05, 4);
  const double base = lattice_action(st, config(3.0));
  EXPECT_NEAR(lattice_action(translate_state(st, {1, 0, 2, 3}), config(3.0)), base, 1e-11);
}

TEST(LatticeAction, ConstantU2Invariant) {
  const LatticeState st = perturbed_state(4, 0.05, 5);
  Rng rng(5);
  const double base = lattice_action(st, config(2.5));
  for (int trial = 0; trial < 3; ++trial)
    EXPECT_NEAR(lattice_action(rotate_state(st, mdm::test::random_u2(rng)), config(2.5)), base, 1e-10);
}

TEST(LatticeAction, SecondOrderConvergenceToTheContinuum) {
  // Exact integral by trapezoid quadrature in the (x0, x1) plane, which is
  // spectrally accurate for these trigonometric fields.
  const int m = 48;
  const double w = kTwoPi / m;
  double exact = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      exact += local_density(exact_inputs({i * w, j * w, 0.0, 0.0}), 1.0, 2.0).density;
  exact *= w * w * kTwoPi * kTwoPi;
  std::array<double, 3> err{};
  const std::array<int, 3> ns{4, 8, 16};
  for (int k = 0; k < 3; ++k) err[k] = std::abs(lattice_action(plane_state(ns[k]), config(2.0)) - exact);
  EXPECT_GT(err[1], 0.0);
  EXPECT_LT(err[2], err[1]);
  const double ratio = err[1] / err[2];
  EXPECT_GT(ratio, 3.0) << err[0] << " " << err[1] << " " << err[2];
  EXPECT_LT(ratio, 5.5) << err[0] << " " << err[1] << " " << err[2];
}

TEST(LatticeGradient, MatchesFiniteDifferences) {
  const LatticeState st = perturbed_state(4, 0.05, 6);
  const FlowConfig cfg = config(2.0);
  const LatticeGradient g = lattice_gradient(st, cfg);
  EXPECT_NEAR(g.action, lattice_action(st, cfg), 1e-12 * std::max(1.0, std::abs(g.action)));
  Rng rng(6);
  for (int k = 0; k < 12; ++k) {
    const auto entry = static_cast<std::size_t>(rng.integer(0, static_cast<int>(st.size()) - 1));
    const double fd = fd_entry(st, cfg, entry);
    EXPECT_NEAR(g.g[entry], fd, 1e-6 * std::max(1.0, std::abs(fd))) << "entry " << entry;
  }
}

TEST(LatticeGradient, FlatIsStationaryOnlyAtMuTildeThree) {
  const LatticeState st = flat_state(4);
  EXPECT_LE(lattice_gradient(st, config(3.0)).norm(), 1e-10);
  EXPECT_GT(lattice_gradient(st, config(4.0)).norm(), 1.0);
}

TEST(LatticeGradient, NegatingLambdaNegatesTheGradient) {
  const LatticeState st = perturbed_state(4, 0.05, 7);
  const LatticeGradient a = lattice_gradient(st, config(2.0, 1.0));
  const LatticeGradient b = lattice_gradient(st, config(2.0, -1.0));
  double worst = 0.0;
  for (std::size_t k = 0; k < a.g.size(); ++k) worst = std::max(worst, std::abs(a.g[k] + b.g[k]));
  EXPECT_LE(worst, 1e-12 * a.norm());
}

TEST(LatticeGradient, IndependentOfThreadCount) {
  const LatticeState st = perturbed_state(4, 0.05, 8);
  std::vector<double> one, four;
  {
    ThreadsEnv env("1");
    one = lattice_gradient(st, config(2.0)).g;
  }
  {
    ThreadsEnv env("4");
    four = lattice_gradient(st, config(2.0)).g;
  }
  EXPECT_EQ(one, four);
}

TEST(LatticeResidualsTest, FlatValues) {
  const LatticeState st = flat_state(4);
  const LatticeResiduals r3 = lattice_residuals(st, 3.0);
  EXPECT_LE(r3.r_ric20 + r3.r_da20 + r3.r_domega + r3.r_mainfeq + r3.grad_s, 1e-12);
  // defect omega has |omega|^2 = 2 per site in the form norm
  EXPECT_NEAR(lattice_residuals(st, 4.0).r_mainfeq, std::sqrt(2.0) * kTwoPi * kTwoPi, 1e-9);
}

TEST(LatticeState, ChartManifoldsAreRejected) {
  EXPECT_THROW(sample_background(cp2_background(), 4), TopologyError);
  EXPECT_THROW(sample_background(s2xr2_background(), 4), TopologyError);
  EXPECT_NO_THROW(sample_background(t4_background(), 4));
}

TEST(LatticeState, DegenerateSiteIsReported) {
  LatticeState st = flat_state(4);
  for (int mu = 0; mu < 4; ++mu) st.E(5, 3, mu) = 0.0;
  try {
    lattice_action(st, config(3.0));
    FAIL() << "expected DegenerateSite";
  } catch (const DegenerateSite& e) {
    EXPECT_NE(std::string(e.what()).find("(0,0,1,1)"), std::string::npos) << e.what();
  }
}

TEST(Checkpoint, RoundTripIsExact) {
  const LatticeState st = perturbed_state(4, 0.05, 9);
  const auto path = std::filesystem::temp_directory_path() / "mdm_checkpoint_test.json";
  save_checkpoint(st, path.string());
  const LatticeState back = load_checkpoint(path.string());
  std::filesystem::remove(path);
  EXPECT_EQ(back.n, st.n);
  EXPECT_EQ(back.psi, st.psi);
  EXPECT_EQ(back.a, st.a);
}

TEST(Checkpoint, RejectsForeignFormat) {
  nlohmann::json j = to_json(flat_state(3));
  j["format"] = "something-else";
  EXPECT_ANY_THROW(state_from_json(j));
}

TEST(Descend, FlatCriticalPointConvergesImmediately) {
  LatticeState st = flat_state(4);
  const FlowLog log = descend(st, config(3.0));
  EXPECT_EQ(log.termination, "converged");
  ASSERT_EQ(log.entries.size(), 1u);
  EXPECT_LE(log.final_residuals.r_mainfeq, 1e-12);
}

TEST(Descend, AcceptedStepsNeverIncreaseTheAction) {
  LatticeState st = perturbed_state(4, 1e-2, 10);
  FlowConfig cfg = config(3.0);
  cfg.max_iters = 5;
  cfg.step = 1e-3;
  cfg.residual_every = 0;
  const FlowLog log = descend(st, cfg);
  ASSERT_GE(log.entries.size(), 2u);
  for (std::size_t k = 1; k < log.entries.size(); ++k)
    EXPECT_LE(log.entries[k].action, log.entries[k - 1].action);
}

TEST(Descend, CsvLogHasTheDocumentedHeader) {
  LatticeState st = flat_state(3);
  const FlowLog log = descend(st, config(3.0));
  std::ostringstream os;
  write_csv(log, os);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "iter,action,grad_norm,step,r_ric20,r_da20,r_domega,r_mainfeq");
}
