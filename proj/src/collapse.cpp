#include "cltsls/collapse.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cltsls/error.hpp"
#include "cltsls/kernels.hpp"
#include "cltsls/wls.hpp"

namespace cltsls {
namespace {

constexpr double kScoreTolerance = 1e-10;
constexpr double kStepTolerance = 1e-8;
constexpr int kMaxNewtonIterations = 100;
constexpr double kSeparationBound = 30.0;

// Values gathered so that each cluster occupies a contiguous segment.
std::vector<double> gather(const ClusterIndex& index, std::span<const double> values) {
  std::vector<double> out(index.order.size());
  for (std::size_t pos = 0; pos < index.order.size(); ++pos) out[pos] = values[index.order[pos]];
  return out;
}

std::vector<double> segment_means(const ClusterIndex& index, std::span<const double> values) {
  const std::vector<double> grouped = gather(index, values);
  std::vector<double> means(index.n_clusters());
  for (std::size_t k = 0; k < index.n_clusters(); ++k) {
    const std::span<const double> seg(grouped.data() + index.offsets[k], index.size_of(k));
    means[k] = kernels::sum(seg) / static_cast<double>(seg.size());
  }
  return means;
}

std::vector<double> outcome_values(const TrialDataset& dataset) {
  std::vector<double> y(dataset.records.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = dataset.records[i].y;
  return y;
}

std::vector<double> treatment_values(const TrialDataset& dataset) {
  std::vector<double> d(dataset.records.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<double>(dataset.records[i].d);
  return d;
}

Eigen::MatrixXd covariate_design(const TrialDataset& dataset, std::span<const std::size_t> x_columns,
                                 bool intercept_only_ok) {
  if (x_columns.empty() && !intercept_only_ok) fail(ErrorCode::NoCovariatesSelected, "select at least one individual-level covariate");
  const std::size_t n_x = dataset.records.front().x.size();
  for (std::size_t c : x_columns) {
    if (c >= n_x) fail(ErrorCode::InvalidOptions, "covariate column " + std::to_string(c) + " out of range");
  }
  const auto n = static_cast<Eigen::Index>(dataset.records.size());
  Eigen::MatrixXd design(n, static_cast<Eigen::Index>(x_columns.size() + 1));
  design.col(0).setOnes();
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& x = dataset.records[static_cast<std::size_t>(i)].x;
    for (std::size_t c = 0; c < x_columns.size(); ++c) design(i, static_cast<Eigen::Index>(c + 1)) = x[x_columns[c]];
  }
  return design;
}

ClusterSummaries with_outcome(const TrialDataset& dataset, std::span<const double> per_record) {
  const ClusterIndex& index = cluster_index(dataset);
  ClusterSummaries out;
  out.w_names = dataset.w_names;
  const std::vector<double> y_means = segment_means(index, per_record);
  const std::vector<double> d_means = segment_means(index, treatment_values(dataset));
  out.clusters.reserve(index.n_clusters());
  for (std::size_t k = 0; k < index.n_clusters(); ++k) {
    ClusterSummary s;
    s.cluster_id = index.ids[k];
    s.n = static_cast<int>(index.size_of(k));
    s.z = index.assignment[k];
    s.d_bar = d_means[k];
    s.y_bar = y_means[k];
    if (auto it = dataset.cluster_covariates.find(s.cluster_id); it != dataset.cluster_covariates.end()) {
      s.w = it->second;
    }
    out.clusters.push_back(std::move(s));
  }
  out.outcome_icc = icc_oneway_anova(index, per_record);
  return out;
}

double expit(double eta) {
  if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

double log_likelihood(std::span<const double> y, const Eigen::VectorXd& eta) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    // log(1 + exp(eta)) without overflow
    const double e = eta[i];
    const double log1pexp = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
    ll += y[static_cast<std::size_t>(i)] * e - log1pexp;
  }
  return ll;
}

}  // namespace

ClusterSummaries cluster_means(const TrialDataset& dataset) {
  return with_outcome(dataset, outcome_values(dataset));
}

ClusterSummaries adjust_continuous(const TrialDataset& dataset, std::span<const std::size_t> x_columns) {
  cluster_index(dataset);
  if (dataset.outcome_kind != OutcomeKind::Continuous) {
    fail(ErrorCode::InvalidOptions, "adjust_continuous requires a continuous outcome");
  }
  const Eigen::MatrixXd design = covariate_design(dataset, x_columns, false);
  const std::vector<double> y = outcome_values(dataset);
  const Eigen::Map<const Eigen::VectorXd> response(y.data(), static_cast<Eigen::Index>(y.size()));
  const DesignFit fit = fit_wls(design, response, Eigen::VectorXd::Ones(design.rows()));
  return with_outcome(dataset, {fit.residuals.data(), static_cast<std::size_t>(fit.residuals.size())});
}

std::vector<double> difference_residuals(const TrialDataset& dataset, std::span<const double> fitted) {
  const ClusterIndex& index = cluster_index(dataset);
  if (fitted.size() != dataset.records.size()) fail(ErrorCode::InvalidOptions, "one fitted value per record");
  std::vector<double> resid(fitted.size());
  for (std::size_t i = 0; i < resid.size(); ++i) resid[i] = dataset.records[i].y - fitted[i];
  // (M_j - Mhat_j) / n_j is the cluster mean of y - pihat.
  return segment_means(index, resid);
}

ClusterSummaries adjust_binary(const TrialDataset& dataset, std::span<const std::size_t> x_columns) {
  cluster_index(dataset);
  if (dataset.outcome_kind != OutcomeKind::Binary) {
    fail(ErrorCode::InvalidOptions, "adjust_binary requires a binary outcome");
  }
  // An empty selection is the intercept-only model.
  const Eigen::MatrixXd design = covariate_design(dataset, x_columns, true);
  const std::vector<double> y = outcome_values(dataset);
  const LogisticFit fit = fit_logistic(design, y);
  std::vector<double> resid(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) resid[i] = y[i] - fit.fitted[static_cast<Eigen::Index>(i)];
  return with_outcome(dataset, resid);
}

LogisticFit fit_logistic(const Eigen::MatrixXd& design, std::span<const double> y) {
  const auto n = design.rows();
  const auto p = design.cols();
  if (static_cast<std::size_t>(n) != y.size()) fail(ErrorCode::InvalidOptions, "design/outcome length mismatch");
  if (n <= p) fail(ErrorCode::InsufficientObservations, "need more observations than parameters");

  auto col = [&](Eigen::Index k) { return std::span<const double>(design.col(k).data(), static_cast<std::size_t>(n)); };

  LogisticFit fit;
  fit.coefficients = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
  double ll = log_likelihood(y, eta);
  Eigen::VectorXd resid(n), var(n);

  for (int iter = 0; iter <= kMaxNewtonIterations; ++iter) {
    fit.fitted.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double pi = expit(eta[i]);
      fit.fitted[i] = pi;
      resid[i] = y[static_cast<std::size_t>(i)] - pi;
      var[i] = pi * (1.0 - pi);
    }
    const std::span<const double> resid_view(resid.data(), static_cast<std::size_t>(n));
    const std::span<const double> var_view(var.data(), static_cast<std::size_t>(n));

    Eigen::VectorXd score(p);
    for (Eigen::Index a = 0; a < p; ++a) score[a] = kernels::dot(col(a), resid_view);
    fit.max_abs_score = score.cwiseAbs().maxCoeff();
    fit.iterations = iter;
    if (iter == kMaxNewtonIterations) break;

    Eigen::MatrixXd info(p, p);
    for (Eigen::Index a = 0; a < p; ++a) {
      for (Eigen::Index b = 0; b <= a; ++b) {
        info(a, b) = kernels::wdot(var_view, col(a), col(b));
        info(b, a) = info(a, b);
      }
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(info);
    const double r_max = std::abs(qr.matrixR()(0, 0));
    if (!(r_max > 0.0) || std::abs(qr.matrixR()(p - 1, p - 1)) <= 1e-12 * r_max) {
      if (fit.coefficients.cwiseAbs().maxCoeff() > 0.5 * kSeparationBound) {
        fail(ErrorCode::SeparationDetected, "information matrix degenerate; fitted probabilities at 0/1");
      }
      fail(ErrorCode::RankDeficient, "logistic design is rank deficient");
    }
    const Eigen::VectorXd step = qr.solve(score);
    // Under separation the score vanishes while Newton steps stay large, so
    // both must be small.
    if (fit.max_abs_score < kScoreTolerance && step.cwiseAbs().maxCoeff() < kStepTolerance) return fit;

    // Step-halving until the log-likelihood does not decrease beyond rounding.
    const double ll_floor = ll - 1e-12 * (1.0 + std::abs(ll));
    double scale = 1.0;
    Eigen::VectorXd candidate;
    Eigen::VectorXd candidate_eta;
    double candidate_ll = ll;
    bool improved = false;
    for (int half = 0; half < 40; ++half) {
      candidate = fit.coefficients + scale * step;
      candidate_eta = design * candidate;
      candidate_ll = log_likelihood(y, candidate_eta);
      if (candidate_ll >= ll_floor) {
        improved = true;
        break;
      }
      scale *= 0.5;
    }
    if (!improved) {
      // The likelihood is flat to rounding: accept a tiny relative score as converged.
      if (fit.max_abs_score < 1e-8 * static_cast<double>(n)) return fit;
      fail(ErrorCode::NonConvergence, "line search failed to improve the log-likelihood");
    }
    fit.coefficients = candidate;
    eta = candidate_eta;
    ll = candidate_ll;
    if (fit.coefficients.cwiseAbs().maxCoeff() > kSeparationBound) {
      fail(ErrorCode::SeparationDetected, "logit coefficient exceeded " + std::to_string(kSeparationBound));
    }
  }
  fail(ErrorCode::NonConvergence,
       "logistic fit did not converge in " + std::to_string(kMaxNewtonIterations) + " iterations");
}

IccEstimate icc_oneway_anova(const ClusterIndex& index, std::span<const double> values) {
  const std::size_t n_clusters = index.n_clusters();
  if (n_clusters < 2) fail(ErrorCode::TooFewClusters, "ICC needs at least 2 clusters");
  if (values.size() != index.order.size()) fail(ErrorCode::InvalidOptions, "one value per record");

  const std::vector<double> grouped = gather(index, values);
  const double total = static_cast<double>(grouped.size());
  const double grand_mean = kernels::sum(grouped) / total;

  double ss_between = 0.0;
  double ss_within = 0.0;
  double sum_n2 = 0.0;
  for (std::size_t k = 0; k < n_clusters; ++k) {
    const std::span<const double> seg(grouped.data() + index.offsets[k], index.size_of(k));
    const double nk = static_cast<double>(seg.size());
    const double mean = kernels::sum(seg) / nk;
    ss_between += nk * (mean - grand_mean) * (mean - grand_mean);
    ss_within += kernels::sum_sq_dev(seg, mean);
    sum_n2 += nk * nk;
  }

  IccEstimate est;
  const double df_between = static_cast<double>(n_clusters - 1);
  const double df_within = total - static_cast<double>(n_clusters);
  if (df_within <= 0.0) {
    // Singleton clusters only: within-cluster variance is not identified.
    est.degenerate = true;
    return est;
  }
  // All values identical up to rounding.
  if (ss_between + ss_within <= 1e-24 * total * std::max(1.0, grand_mean * grand_mean)) {
    est.degenerate = true;
    return est;
  }
  const double msb = ss_between / df_between;
  const double msw = ss_within / df_within;
  const double n0 = (total - sum_n2 / total) / df_between;
  est.sigma2_within = msw;
  est.sigma2_between = std::max(0.0, (msb - msw) / n0);
  const double denom = est.sigma2_between + est.sigma2_within;
  if (!(denom > 0.0)) {
    est.degenerate = true;
    est.sigma2_between = 0.0;
    est.sigma2_within = 0.0;
    return est;
  }
  est.rho = std::clamp(est.sigma2_between / denom, 0.0, 1.0);
  return est;
}

IccEstimate icc_oneway_anova(const TrialDataset& dataset, IccVariable variable) {
  const ClusterIndex& index = cluster_index(dataset);
  const std::vector<double> v =
      variable == IccVariable::Outcome ? outcome_values(dataset) : treatment_values(dataset);
  return icc_oneway_anova(index, v);
}

}  // namespace cltsls
