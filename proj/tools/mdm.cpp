// mdm: verification suites, curvature reports, coefficient algebra and lattice
// flows. Exit codes: 0 all checks pass, 1 some check failed, 2 usage error.

#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "mdm/commands.hpp"

namespace {

struct OutputOptions {
  bool csv = false;
  bool timing = false;
};

int emit(mdm::RunReport rep, const OutputOptions& out, const mdm::Stopwatch& clock) {
  if (out.timing) rep.wall_time_s = clock.seconds();
  if (out.csv)
    rep.write_csv(std::cout);
  else
    rep.write_json(std::cout);
  return rep.exit_code();
}

void add_flow_options(CLI::App* cmd, mdm::FlowRequest& req) {
  cmd->add_option("--n", req.n, "Sites per axis (4, 8 or 16)")->capture_default_str();
  cmd->add_option("--mu-tilde", req.mu_tilde, "Rescaled coupling mu~")->capture_default_str();
  cmd->add_option("--init", req.init, "flat | perturbed | t4 | random | checkpoint")->capture_default_str();
  cmd->add_option("--checkpoint-in", req.checkpoint_in, "State file for --init checkpoint");
  cmd->add_option("--amplitude", req.amplitude, "Perturbation amplitude for --init perturbed")->capture_default_str();
  cmd->add_option("--lambda", req.lambda_overall, "Overall coupling lambda")->capture_default_str();
  cmd->add_option("--seed", req.seed, "Random seed")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical (SU(3), U(2)) Cartan geometry toolkit"};
  app.require_subcommand(1);
  OutputOptions out;
  app.add_flag("--csv", out.csv, "Tabular output instead of JSON");
  app.add_flag("--timing", out.timing, "Include wall time in the report (breaks byte stability)");

  std::string manifold = "flat";
  std::uint64_t seed = 0;
  double tol = -1.0;
  int points = 20;
  double mu_tilde = 3.0;

  auto* verify = app.add_subcommand("verify", "Run the identity suite on a background");
  verify->add_option("--manifold", manifold, "flat | t4 | s2xr2 | cp2 | random")->capture_default_str();
  verify->add_option("--seed", seed, "Random seed")->capture_default_str();
  verify->add_option("--tol", tol, "Residual tolerance (default 1e-8)");
  verify->add_option("--points", points, "Sample points")->capture_default_str();

  double p = 1, q = 1, r = 1, s = 1;
  auto* params = app.add_subcommand("params", "Model coefficients from the insertion parameters");
  params->add_option("p", p)->required();
  params->add_option("q", q)->required();
  params->add_option("r", r)->required();
  params->add_option("s", s)->required();
  params->add_option("--tol", tol, "Relation tolerance (default 1e-12)");

  auto* curvature = app.add_subcommand("curvature", "Pointwise curvature report");
  curvature->add_option("--manifold", manifold, "flat | t4 | s2xr2 | cp2 | random")->capture_default_str();
  curvature->add_option("--points", points, "Sample points")->capture_default_str();
  curvature->add_option("--seed", seed, "Random seed")->capture_default_str();
  curvature->add_option("--mu-tilde", mu_tilde, "mu~ for the main-equation residual")->capture_default_str();
  curvature->add_option("--tol", tol, "Residual tolerance (default 1e-8)");

  mdm::FlowRequest flow_req;
  std::string log_path;
  auto* flow = app.add_subcommand("flow", "Gradient descent of the lattice action");
  add_flow_options(flow, flow_req);
  flow->add_option("--steps", flow_req.steps, "Maximum iterations")->capture_default_str();
  flow->add_option("--step", flow_req.step, "Initial step size")->capture_default_str();
  flow->add_option("--grad-tol", flow_req.grad_tol, "Stop when the gradient norm falls below")->capture_default_str();
  flow->add_option("--residual-every", flow_req.residual_every, "Log geometric residuals every k iterations")
      ->capture_default_str();
  flow->add_option("--log", log_path, "Write the per-iteration log here (JSON lines, CSV with --csv)");
  flow->add_option("--checkpoint-out", flow_req.checkpoint_out, "Write the final state here");

  mdm::FlowRequest action_req;
  auto* action = app.add_subcommand("action", "Lattice action and gradient check for a state");
  add_flow_options(action, action_req);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const mdm::Stopwatch clock;
  try {
    if (*verify) return emit(mdm::cmd_verify(manifold, seed, tol > 0 ? tol : 1e-8, points), out, clock);
    if (*params) return emit(mdm::cmd_params(p, q, r, s, tol > 0 ? tol : 1e-12), out, clock);
    if (*curvature)
      return emit(mdm::cmd_curvature(manifold, points, seed, mu_tilde, tol > 0 ? tol : 1e-8), out, clock);
    if (*action) return emit(mdm::cmd_action(action_req), out, clock);
    if (*flow) {
      std::unique_ptr<std::ofstream> log_file;
      if (!log_path.empty()) {
        log_file = std::make_unique<std::ofstream>(log_path);
        if (!*log_file) throw mdm::UsageError("cannot open log file " + log_path);
      }
      return emit(mdm::cmd_flow(flow_req, log_file.get(), out.csv), out, clock);
    }
  } catch (const mdm::UsageError& e) {
    std::cerr << "mdm: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "mdm: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
