#include "cltsls/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <map>
#include <mutex>

#include "cltsls/error.hpp"

namespace cltsls {
namespace {

NormalQuadrature build(int n) {
  // Jacobi matrix of the probabilists' Hermite recurrence: off-diagonal sqrt(k).
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    jacobi(k, k - 1) = std::sqrt(static_cast<double>(k));
    jacobi(k - 1, k) = jacobi(k, k - 1);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  NormalQuadrature rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    rule.nodes[static_cast<std::size_t>(k)] = eig.eigenvalues()[k];
    const double v = eig.eigenvectors()(0, k);
    rule.weights[static_cast<std::size_t>(k)] = v * v;
  }
  return rule;
}

}  // namespace

const NormalQuadrature& normal_quadrature(int n) {
  if (n < 1 || n > 200) fail(ErrorCode::InvalidOptions, "quadrature order must be in [1, 200]");
  static std::mutex mutex;
  static std::map<int, NormalQuadrature> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, build(n)).first;
  return it->second;
}

}  // namespace cltsls
