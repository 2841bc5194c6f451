#include "sizebench/optimize.hpp"

#include <algorithm>
#include <cmath>

namespace sizebench {

SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& objective,
                          const std::vector<double>& x0, const SimplexOptions& options) {
  const std::size_t dim = x0.size();
  const double alpha = 1.0, gamma = 2.0, rho = 0.5, sigma = 0.5;

  std::vector<std::vector<double>> simplex(dim + 1, x0);
  for (std::size_t i = 0; i < dim; ++i) simplex[i + 1][i] += options.initial_step;

  std::vector<double> values(dim + 1);
  for (std::size_t i = 0; i <= dim; ++i) values[i] = objective(simplex[i]);

  SimplexResult result;
  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    // Order vertices by objective value.
    std::vector<std::size_t> order(dim + 1);
    for (std::size_t i = 0; i <= dim; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second_worst = order[dim > 0 ? dim - 1 : 0];

    // A small value spread alone is not enough: a simplex straddling the
    // optimum symmetrically has equal values at distant vertices, so also
    // require the simplex itself to have collapsed.
    if (values[worst] - values[best] < options.value_tolerance) {
      double diameter = 0.0;
      for (std::size_t i = 0; i <= dim; ++i) {
        for (std::size_t k = 0; k < dim; ++k) {
          diameter = std::max(diameter, std::fabs(simplex[i][k] - simplex[best][k]));
        }
      }
      if (diameter < options.point_tolerance) {
        result.converged = true;
        break;
      }
    }

    // Centroid of all vertices except the worst.
    std::vector<double> centroid(dim, 0.0);
    for (std::size_t i = 0; i <= dim; ++i) {
      if (i == worst) continue;
      for (std::size_t k = 0; k < dim; ++k) centroid[k] += simplex[i][k];
    }
    for (double& c : centroid) c /= static_cast<double>(dim);

    auto blend = [&](double t) {
      std::vector<double> p(dim);
      for (std::size_t k = 0; k < dim; ++k) {
        p[k] = centroid[k] + t * (simplex[worst][k] - centroid[k]);
      }
      return p;
    };

    const auto reflected = blend(-alpha);
    const double f_reflected = objective(reflected);

    if (f_reflected < values[best]) {
      const auto expanded = blend(-gamma);
      const double f_expanded = objective(expanded);
      if (f_expanded < f_reflected) {
        simplex[worst] = expanded;
        values[worst] = f_expanded;
      } else {
        simplex[worst] = reflected;
        values[worst] = f_reflected;
      }
    } else if (f_reflected < values[second_worst]) {
      simplex[worst] = reflected;
      values[worst] = f_reflected;
    } else {
      const auto contracted = blend(f_reflected < values[worst] ? -rho : rho);
      const double f_contracted = objective(contracted);
      if (f_contracted < std::min(values[worst], f_reflected)) {
        simplex[worst] = contracted;
        values[worst] = f_contracted;
      } else {
        // Shrink toward the best vertex.
        for (std::size_t i = 0; i <= dim; ++i) {
          if (i == best) continue;
          for (std::size_t k = 0; k < dim; ++k) {
            simplex[i][k] = simplex[best][k] + sigma * (simplex[i][k] - simplex[best][k]);
          }
          values[i] = objective(simplex[i]);
        }
      }
    }
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i <= dim; ++i) {
    if (values[i] < values[best]) best = i;
  }
  result.x = simplex[best];
  result.value = values[best];
  result.iterations = iter;
  return result;
}

}  // namespace sizebench
