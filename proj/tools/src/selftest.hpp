#pragma once

#include <string>
#include <vector>

namespace sego::cli {

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Finite-difference checks of every autodiff primitive plus the full
// objective on a three-graph batch.
std::vector<Check> gradient_checks();
// Closed-form entropies, the bridge partition and the brute-force bracket.
std::vector<Check> entropy_checks();
std::vector<Check> infonce_checks();
std::vector<Check> auc_checks();

}  // namespace sego::cli
