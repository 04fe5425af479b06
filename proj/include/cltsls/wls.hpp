#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "cltsls/model.hpp"

namespace cltsls {

struct DesignFit {
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd cov_model;   // sigma^2 (X'WX)^-1, sigma^2 = sum w r^2 / (n - p)
  Eigen::MatrixXd cov_robust;  // HC0 sandwich
  Eigen::VectorXd residuals;
  Eigen::MatrixXd xtwx_inv;
  int n_obs = 0;
  int n_params = 0;
  Eigen::VectorXd weights_used;

  double se_model(int k) const;
  double se_robust(int k) const;
};

/// Weighted least squares by column-pivoted QR of the sqrt(w)-scaled design.
/// Throws RankDeficient when the smallest |R_kk| falls below 1e-10 of the
/// largest, NonPositiveWeight for weights below 1e-12 and
/// InsufficientObservations unless n > p.
DesignFit fit_wls(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                  const Eigen::VectorXd& weights);

/// sigma^2 (X'WX)^-1 from arbitrary residuals (TSLS uses structural residuals).
Eigen::MatrixXd model_covariance(const Eigen::VectorXd& weights, const Eigen::VectorXd& residuals,
                                 const Eigen::MatrixXd& xtwx_inv);

/// (X'WX)^-1 (sum_i w_i^2 r_i^2 x_i x_i') (X'WX)^-1.
Eigen::MatrixXd sandwich_covariance(const Eigen::MatrixXd& design, const Eigen::VectorXd& weights,
                                    const Eigen::VectorXd& residuals,
                                    const Eigen::MatrixXd& xtwx_inv);

/// omega_j = n_j / (1 + rho (n_j - 1)).
std::vector<double> mv_weights(std::span<const int> cluster_sizes, double rho);

struct Inference {
  double ci_low = 0.0;
  double ci_high = 0.0;
  double p = 1.0;
  double df = 0.0;  // +inf for the normal approximation
  double critical_value = 0.0;
};

/// Two-sided CI and p-value. SmallSample uses Student t with J - p degrees
/// of freedom and throws DfNonPositive when J <= p.
Inference inference(double coef, double se, DfMode df_mode, int n_clusters, int n_params,
                    double level = 0.95);

/// Two-sided critical value for the given df (+inf gives the normal quantile).
double critical_value(double df, double level = 0.95);

}  // namespace cltsls
