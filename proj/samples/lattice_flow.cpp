// Runs a short gradient flow from a perturbed flat torus and prints the log.

#include <cstdio>
#include <cstdlib>

#include "mdm/lattice.hpp"

int main(int argc, char** argv) {
  using namespace mdm;
  FlowConfig cfg;
  cfg.mu_tilde = argc > 1 ? std::atof(argv[1]) : 3.0;
  cfg.step = 1e-3;
  cfg.max_iters = 10;
  cfg.residual_every = 5;
  LatticeState st = perturbed_state(4, 1e-2, 1);
  const FlowLog log = descend(st, cfg, [](const FlowEntry& e) {
    std::printf("%3d  S = %+.8e  |grad| = %.3e  step = %.1e", e.iter, e.action, e.grad_norm, e.step);
    if (e.residuals) std::printf("  mainfeq = %.3e", e.residuals->r_mainfeq);
    std::printf("\n");
  });
  std::printf("termination: %s\n", log.termination.c_str());
}
