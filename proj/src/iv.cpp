#include "cltsls/iv.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "cltsls/error.hpp"
#include "cltsls/wls.hpp"

namespace cltsls {
namespace {

constexpr double kWeakInstrument = 1e-12;

void require_both_arms(const ClusterSummaries& s) {
  bool treated = false;
  bool control = false;
  for (const auto& c : s.clusters) (c.z == 1 ? treated : control) = true;
  if (!treated || !control) fail(ErrorCode::EmptyArm, "both arms must contain at least one cluster");
}

Eigen::Index w_width(const ClusterSummaries& s, bool adjust_w) {
  if (!adjust_w) return 0;
  const std::size_t width = s.clusters.front().w.size();
  if (width == 0) fail(ErrorCode::MissingClusterCovariate, "adjust_w requested but clusters carry no W");
  for (const auto& c : s.clusters) {
    if (c.w.size() != width) {
      fail(ErrorCode::MissingClusterCovariate, "cluster '" + c.cluster_id + "' has a different W length");
    }
  }
  return static_cast<Eigen::Index>(width);
}

// [1, lead, W...]
Eigen::MatrixXd design_with(const ClusterSummaries& s, const Eigen::VectorXd& lead, Eigen::Index n_w) {
  const auto n = static_cast<Eigen::Index>(s.size());
  Eigen::MatrixXd x(n, 2 + n_w);
  x.col(0).setOnes();
  x.col(1) = lead;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index k = 0; k < n_w; ++k) x(j, 2 + k) = s.clusters[static_cast<std::size_t>(j)].w[static_cast<std::size_t>(k)];
  }
  return x;
}

Eigen::VectorXd column_of(const ClusterSummaries& s, double ClusterSummary::*field) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(s.size()));
  for (std::size_t j = 0; j < s.size(); ++j) v[static_cast<Eigen::Index>(j)] = s.clusters[j].*field;
  return v;
}

Eigen::VectorXd assignment_of(const ClusterSummaries& s) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(s.size()));
  for (std::size_t j = 0; j < s.size(); ++j) v[static_cast<Eigen::Index>(j)] = s.clusters[j].z;
  return v;
}

}  // namespace

Eigen::VectorXd cluster_weights(const ClusterSummaries& summaries, const AnalysisOptions& options,
                                double* icc_used) {
  const auto n = static_cast<Eigen::Index>(summaries.size());
  if (icc_used) *icc_used = std::numeric_limits<double>::quiet_NaN();
  Eigen::VectorXd w(n);
  switch (options.weights) {
    case Weighting::None:
      w.setOnes();
      break;
    case Weighting::ClusterSize:
      for (Eigen::Index j = 0; j < n; ++j) w[j] = summaries.clusters[static_cast<std::size_t>(j)].n;
      break;
    case Weighting::MinVariance: {
      double rho = 0.0;
      if (options.icc.kind == IccSource::Kind::Fixed) {
        rho = options.icc.value;
      } else if (summaries.outcome_icc) {
        rho = summaries.outcome_icc->rho;
      } else {
        fail(ErrorCode::IccUnavailable, "minimum-variance weights need an ICC; none attached to summaries");
      }
      if (!(rho >= 0.0 && rho <= 1.0)) fail(ErrorCode::InvalidOptions, "ICC must lie in [0,1]");
      std::vector<int> sizes;
      sizes.reserve(summaries.size());
      for (const auto& c : summaries.clusters) sizes.push_back(c.n);
      const std::vector<double> mv = mv_weights(sizes, rho);
      for (Eigen::Index j = 0; j < n; ++j) w[j] = mv[static_cast<std::size_t>(j)];
      if (icc_used) *icc_used = rho;
      break;
    }
  }
  return w;
}

double wald_late(const ClusterSummaries& summaries) {
  require_both_arms(summaries);
  double y1 = 0, y0 = 0, d1 = 0, d0 = 0;
  int n1 = 0, n0 = 0;
  for (const auto& c : summaries.clusters) {
    if (c.z == 1) {
      y1 += c.y_bar;
      d1 += c.d_bar;
      ++n1;
    } else {
      y0 += c.y_bar;
      d0 += c.d_bar;
      ++n0;
    }
  }
  const double denom = d1 / n1 - d0 / n0;
  if (std::abs(denom) < kWeakInstrument) {
    fail(ErrorCode::ZeroDenominator, "arm means of d_bar are equal");
  }
  return (y1 / n1 - y0 / n0) / denom;
}

double first_stage_f(const ClusterSummaries& summaries) {
  require_both_arms(summaries);
  // Two-group OLS of d_bar on intercept + z in closed form.
  double sum1 = 0, sum0 = 0;
  int n1 = 0, n0 = 0;
  for (const auto& c : summaries.clusters) {
    if (c.z == 1) {
      sum1 += c.d_bar;
      ++n1;
    } else {
      sum0 += c.d_bar;
      ++n0;
    }
  }
  const double m1 = sum1 / n1;
  const double m0 = sum0 / n0;
  double rss = 0.0;
  double scale = 0.0;
  for (const auto& c : summaries.clusters) {
    const double r = c.d_bar - (c.z == 1 ? m1 : m0);
    rss += r * r;
    scale += c.d_bar * c.d_bar;
  }
  const double gamma = m1 - m0;
  const int j = n1 + n0;
  if (rss <= 1e-28 * (1.0 + scale) || j <= 2) {
    return gamma == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  const double var = rss / (j - 2) * (1.0 / n1 + 1.0 / n0);
  return gamma * gamma / var;
}

TslsInternals tsls_internals(const ClusterSummaries& summaries, const AnalysisOptions& options) {
  require_both_arms(summaries);
  const Eigen::Index n_w = w_width(summaries, options.adjust_w);

  TslsInternals out;
  out.weights = cluster_weights(summaries, options, &out.core.icc_used);
  const Eigen::VectorXd d = column_of(summaries, &ClusterSummary::d_bar);
  const Eigen::VectorXd y = column_of(summaries, &ClusterSummary::y_bar);

  const Eigen::MatrixXd stage1_x = design_with(summaries, assignment_of(summaries), n_w);
  const DesignFit stage1 = fit_wls(stage1_x, d, out.weights);
  out.gamma0 = stage1.coefficients[0];
  out.gamma_z = stage1.coefficients[1];
  out.gamma_w = stage1.coefficients.tail(n_w);
  if (std::abs(out.gamma_z) < kWeakInstrument) {
    fail(ErrorCode::WeakDenominator, "first-stage coefficient of z is numerically zero");
  }
  out.first_stage_fitted = stage1_x * stage1.coefficients;

  const Eigen::MatrixXd stage2_x = design_with(summaries, out.first_stage_fitted, n_w);
  const DesignFit stage2 = fit_wls(stage2_x, y, out.weights);
  out.beta0 = stage2.coefficients[0];
  out.beta_iv = stage2.coefficients[1];
  out.beta_w = stage2.coefficients.tail(n_w);

  const Eigen::MatrixXd structural_x = design_with(summaries, d, n_w);
  out.structural_residuals = y - structural_x * stage2.coefficients;
  const Eigen::MatrixXd cov_model = model_covariance(out.weights, out.structural_residuals, stage2.xtwx_inv);
  const Eigen::MatrixXd cov_robust =
      sandwich_covariance(stage2_x, out.weights, out.structural_residuals, stage2.xtwx_inv);

  out.core.estimate = out.beta_iv;
  out.core.se_model = std::sqrt(std::max(0.0, cov_model(1, 1)));
  out.core.se_robust = std::sqrt(std::max(0.0, cov_robust(1, 1)));
  out.core.n_params = static_cast<int>(stage2_x.cols());
  out.core.n_clusters = static_cast<int>(summaries.size());
  out.core.first_stage_f = first_stage_f(summaries);
  return out;
}

EstimateCore itt_core(const ClusterSummaries& summaries, const AnalysisOptions& options) {
  require_both_arms(summaries);
  const Eigen::Index n_w = w_width(summaries, options.adjust_w);
  EstimateCore core;
  const Eigen::VectorXd w = cluster_weights(summaries, options, &core.icc_used);
  const Eigen::MatrixXd x = design_with(summaries, assignment_of(summaries), n_w);
  const DesignFit fit = fit_wls(x, column_of(summaries, &ClusterSummary::y_bar), w);
  core.estimate = fit.coefficients[1];
  core.se_model = fit.se_model(1);
  core.se_robust = fit.se_robust(1);
  core.n_params = static_cast<int>(x.cols());
  core.n_clusters = static_cast<int>(summaries.size());
  core.first_stage_f = first_stage_f(summaries);
  return core;
}

LateFit finish(const EstimateCore& core, const AnalysisOptions& options) {
  LateFit fit;
  fit.estimate = core.estimate;
  fit.se = options.se_mode == SeMode::HuberWhite ? core.se_robust : core.se_model;
  const Inference inf = inference(fit.estimate, fit.se, options.df_mode, core.n_clusters, core.n_params, options.level);
  fit.ci_low = inf.ci_low;
  fit.ci_high = inf.ci_high;
  fit.p = inf.p;
  fit.df = inf.df;
  fit.critical_value = inf.critical_value;
  fit.first_stage_f = core.first_stage_f;
  fit.n_clusters = core.n_clusters;
  fit.icc_used = core.icc_used;
  fit.options_used = options;
  return fit;
}

LateFit tsls(const ClusterSummaries& summaries, const AnalysisOptions& options) {
  return finish(tsls_internals(summaries, options).core, options);
}

LateFit itt(const ClusterSummaries& summaries, const AnalysisOptions& options) {
  return finish(itt_core(summaries, options), options);
}

}  // namespace cltsls
