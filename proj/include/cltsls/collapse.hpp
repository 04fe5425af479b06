#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "cltsls/model.hpp"

namespace cltsls {

enum class IccVariable { Outcome, TreatmentReceived };

/// Unadjusted cluster means of y and d, one per cluster in index order.
/// outcome_icc is the one-way ANOVA ICC of the individual outcomes.
ClusterSummaries cluster_means(const TrialDataset& dataset);

/// Replaces y_bar by the cluster mean of residuals from an individual-level OLS
/// of y on intercept + the selected x columns (clustering and z ignored).
ClusterSummaries adjust_continuous(const TrialDataset& dataset, std::span<const std::size_t> x_columns);

/// Replaces y_bar by the difference-residual (M_j - Mhat_j) / n_j from a
/// logistic model of y on intercept + the selected x columns (none selected:
/// intercept only).
ClusterSummaries adjust_binary(const TrialDataset& dataset, std::span<const std::size_t> x_columns);

/// Difference residuals for given fitted probabilities (record order).
std::vector<double> difference_residuals(const TrialDataset& dataset, std::span<const double> fitted);

/// One-way ANOVA moment estimator with negative truncation.
IccEstimate icc_oneway_anova(const TrialDataset& dataset, IccVariable variable);

/// Same estimator for arbitrary per-record values (record order).
IccEstimate icc_oneway_anova(const ClusterIndex& index, std::span<const double> values);

struct LogisticFit {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd fitted;  // expit(X b)
  int iterations = 0;
  double max_abs_score = 0.0;
};

/// Maximum-likelihood logistic regression by damped Newton. Converges when
/// max |score| < 1e-10 (at most 100 iterations); any |coefficient| > 30 is
/// reported as SeparationDetected.
LogisticFit fit_logistic(const Eigen::MatrixXd& design, std::span<const double> y);

}  // namespace cltsls
