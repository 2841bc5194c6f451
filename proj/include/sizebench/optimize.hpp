#pragma once

#include <functional>
#include <vector>

namespace sizebench {

struct SimplexOptions {
  double initial_step = 0.5;
  double value_tolerance = 1e-10;  // objective spread across the simplex
  double point_tolerance = 1e-8;   // simplex diameter, infinity norm
  int max_iterations = 2000;
};

struct SimplexResult {
  std::vector<double> x;
  double value = 0.0;  // minimized objective at x
  int iterations = 0;
  bool converged = false;
};

// Deterministic Nelder-Mead minimizer. No randomness: the initial simplex
// is x0 plus one axis-aligned step per coordinate.
SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& objective,
                          const std::vector<double>& x0, const SimplexOptions& options = {});

}  // namespace sizebench
