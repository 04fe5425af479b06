#pragma once

#include <Eigen/Dense>

#include "cltsls/model.hpp"

namespace cltsls {

/// Point estimate with both standard-error flavours, before inference is
/// applied. One core serves every (SeMode, DfMode) combination.
struct EstimateCore {
  double estimate = 0.0;
  double se_model = 0.0;
  double se_robust = 0.0;
  int n_params = 0;  // second-stage (or ITT regression) parameters
  int n_clusters = 0;
  double first_stage_f = 0.0;
  double icc_used = 0.0;
};

struct TslsInternals {
  double gamma0 = 0.0;
  double gamma_z = 0.0;
  Eigen::VectorXd gamma_w;
  double beta0 = 0.0;
  double beta_iv = 0.0;
  Eigen::VectorXd beta_w;
  Eigen::VectorXd first_stage_fitted;
  Eigen::VectorXd structural_residuals;  // y - b0 - b_iv * d_bar - b_w' w (actual d_bar)
  Eigen::VectorXd weights;
  EstimateCore core;
};

/// Cluster weights for the options; icc_used receives the rho behind MV
/// weights (NaN otherwise).
Eigen::VectorXd cluster_weights(const ClusterSummaries& summaries, const AnalysisOptions& options,
                                double* icc_used = nullptr);

/// Ratio of unweighted arm-mean differences of y_bar and d_bar.
double wald_late(const ClusterSummaries& summaries);

/// Screening F = t^2 of gamma_Z from the unadjusted, unweighted first stage.
/// +inf when the first-stage residuals vanish and gamma_Z != 0.
double first_stage_f(const ClusterSummaries& summaries);

TslsInternals tsls_internals(const ClusterSummaries& summaries, const AnalysisOptions& options);
EstimateCore itt_core(const ClusterSummaries& summaries, const AnalysisOptions& options);

/// Applies the options' SE mode and DF mode to a core estimate.
LateFit finish(const EstimateCore& core, const AnalysisOptions& options);

LateFit tsls(const ClusterSummaries& summaries, const AnalysisOptions& options);
LateFit itt(const ClusterSummaries& summaries, const AnalysisOptions& options);

}  // namespace cltsls
