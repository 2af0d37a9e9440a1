#pragma once

#include <cstdint>

namespace hierloss {

// Central-difference audit of the analytic gradients: randomized loss
// configurations checked coordinate-by-coordinate against finite differences,
// plus full adapter-chain checks (loss -> cosine scores -> low-rank factors).
struct GradAuditResult {
  int loss_checks = 0;
  int adapter_checks = 0;
  double max_rel_loss = 0.0;
  double max_rel_adapter = 0.0;

  bool ok(double loss_tol = 1e-6, double adapter_tol = 1e-5) const {
    return max_rel_loss < loss_tol && max_rel_adapter < adapter_tol;
  }
};

// `instances` randomized loss configurations and `instances / 2` adapter
// configurations, deterministic per seed.
GradAuditResult run_gradient_audit(std::uint64_t seed, int instances);

}  // namespace hierloss
