#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace cetn {

struct CheckResult {
  std::string name;
  bool ok = false;
  double worst = 0.0;   // worst error observed, when meaningful
  std::string detail;
};

struct SelfCheckReport {
  std::vector<CheckResult> checks;
  bool ok = true;
  double seconds = 0.0;
};

/// Release gate: finite-difference verification of every tape operation and
/// of the full model loss, the contrastive-loss identities, the product and
/// perturbation identities, and the AUC oracle equivalence. Prints one line
/// per check to `out` when given.
SelfCheckReport run_selfcheck(std::ostream* out = nullptr);

}  // namespace cetn
