#pragma once

#include <vector>

namespace cltsls {

/// Gauss-Hermite rule for a standard normal weight:
/// E[f(Z)] ~= sum_k weights[k] * f(nodes[k]), Z ~ N(0, 1).
struct NormalQuadrature {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// n-point rule from the Golub-Welsch eigenproblem (cached per n).
const NormalQuadrature& normal_quadrature(int n);

}  // namespace cltsls
