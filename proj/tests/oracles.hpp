#pragma once

// Closed-form and brute-force references for the equation-level examples.
// Each case rebuilds its inputs from a fixed seed, runs the library routine
// and an independent scalar-loop evaluation, and reports the worst absolute
// disagreement. The unit suites and the acceptance binary share this list.

#include <functional>
#include <string>
#include <vector>

namespace mcnet::oracle {

struct Case {
  std::string name;
  double tolerance;
  std::function<double()> error;
};

std::vector<Case> equation_cases();

/// Worst violation of min(h_prev, z) <= h <= max(h_prev, z) and of
/// |h| <= max(|h_prev|, 1) over `n` random cell steps.
double cell_bound_violation(int n, unsigned seed);

/// Worst |row sum - 1| or negative entry over every attention weight row of
/// `n` random attention blocks (mixed token counts and head splits).
double attention_row_violation(int n, unsigned seed);

}  // namespace mcnet::oracle
