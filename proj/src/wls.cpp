#include "cltsls/wls.hpp"

#include <cmath>
#include <string>

#include "cltsls/error.hpp"
#include "cltsls/kernels.hpp"

namespace cltsls {
namespace {

constexpr double kRankTolerance = 1e-10;
constexpr double kMinWeight = 1e-12;

std::span<const double> column(const Eigen::MatrixXd& m, Eigen::Index k) {
  return {m.col(k).data(), static_cast<std::size_t>(m.rows())};
}

std::span<const double> view(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace

double DesignFit::se_model(int k) const { return std::sqrt(std::max(0.0, cov_model(k, k))); }
double DesignFit::se_robust(int k) const { return std::sqrt(std::max(0.0, cov_robust(k, k))); }

Eigen::MatrixXd model_covariance(const Eigen::VectorXd& weights, const Eigen::VectorXd& residuals,
                                 const Eigen::MatrixXd& xtwx_inv) {
  const auto n = residuals.size();
  const auto p = xtwx_inv.rows();
  if (n <= p) fail(ErrorCode::InsufficientObservations, "need n > p to estimate sigma^2");
  const double rss = kernels::wdot(view(weights), view(residuals), view(residuals));
  return (rss / static_cast<double>(n - p)) * xtwx_inv;
}

Eigen::MatrixXd sandwich_covariance(const Eigen::MatrixXd& design, const Eigen::VectorXd& weights,
                                    const Eigen::VectorXd& residuals,
                                    const Eigen::MatrixXd& xtwx_inv) {
  const auto p = design.cols();
  const Eigen::VectorXd v = (weights.array() * residuals.array()).square().matrix();
  Eigen::MatrixXd meat(p, p);
  for (Eigen::Index a = 0; a < p; ++a) {
    for (Eigen::Index b = 0; b <= a; ++b) {
      meat(a, b) = kernels::wdot(view(v), column(design, a), column(design, b));
      meat(b, a) = meat(a, b);
    }
  }
  Eigen::MatrixXd cov = xtwx_inv * meat * xtwx_inv;
  return 0.5 * (cov + cov.transpose());
}

DesignFit fit_wls(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                  const Eigen::VectorXd& weights) {
  const auto n = design.rows();
  const auto p = design.cols();
  if (response.size() != n || weights.size() != n) {
    fail(ErrorCode::InvalidOptions, "design, response and weights must have matching lengths");
  }
  if (p == 0) fail(ErrorCode::InvalidOptions, "design has no columns");
  if (n <= p) {
    fail(ErrorCode::InsufficientObservations,
         "need more observations than parameters (n=" + std::to_string(n) + ", p=" + std::to_string(p) + ")");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(weights[i] >= kMinWeight) || !std::isfinite(weights[i])) {
      fail(ErrorCode::NonPositiveWeight, "weight " + std::to_string(i) + " is not positive");
    }
  }

  const Eigen::VectorXd sqrt_w = weights.array().sqrt().matrix();
  const Eigen::MatrixXd scaled = sqrt_w.asDiagonal() * design;
  const Eigen::VectorXd scaled_y = sqrt_w.cwiseProduct(response);

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled);
  const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  const double r_max = std::abs(r(0, 0));
  for (Eigen::Index k = 0; k < p; ++k) {
    if (!(std::abs(r(k, k)) > kRankTolerance * r_max)) {
      fail(ErrorCode::RankDeficient, "weighted design is rank deficient");
    }
  }

  DesignFit fit;
  fit.n_obs = static_cast<int>(n);
  fit.n_params = static_cast<int>(p);
  fit.weights_used = weights;
  fit.coefficients = qr.solve(scaled_y);
  fit.residuals = response - design * fit.coefficients;

  // (X'WX)^-1 = P R^-1 R^-T P'
  const Eigen::MatrixXd r_inv =
      r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  const auto& perm = qr.colsPermutation();
  Eigen::MatrixXd inv = perm * (r_inv * r_inv.transpose()) * perm.transpose();
  fit.xtwx_inv = 0.5 * (inv + inv.transpose());

  fit.cov_model = model_covariance(weights, fit.residuals, fit.xtwx_inv);
  fit.cov_robust = sandwich_covariance(design, weights, fit.residuals, fit.xtwx_inv);
  return fit;
}

std::vector<double> mv_weights(std::span<const int> cluster_sizes, double rho) {
  std::vector<double> out;
  out.reserve(cluster_sizes.size());
  for (int n : cluster_sizes) {
    out.push_back(static_cast<double>(n) / (1.0 + rho * static_cast<double>(n - 1)));
  }
  return out;
}

}  // namespace cltsls
