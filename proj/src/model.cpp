#include "cltsls/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cltsls/error.hpp"

namespace cltsls {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MixedAssignmentWithinCluster: return "MixedAssignmentWithinCluster";
    case ErrorCode::EmptyArm: return "EmptyArm";
    case ErrorCode::TooFewClusters: return "TooFewClusters";
    case ErrorCode::NonBinaryTreatment: return "NonBinaryTreatment";
    case ErrorCode::NonBinaryOutcomeForBinaryKind: return "NonBinaryOutcomeForBinaryKind";
    case ErrorCode::InconsistentCovariates: return "InconsistentCovariates";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::MissingClusterCovariate: return "MissingClusterCovariate";
    case ErrorCode::NoCovariatesSelected: return "NoCovariatesSelected";
    case ErrorCode::InvalidOptions: return "InvalidOptions";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::NonConstantClusterCovariate: return "NonConstantClusterCovariate";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::NonPositiveWeight: return "NonPositiveWeight";
    case ErrorCode::InsufficientObservations: return "InsufficientObservations";
    case ErrorCode::DfNonPositive: return "DfNonPositive";
    case ErrorCode::ZeroDenominator: return "ZeroDenominator";
    case ErrorCode::WeakDenominator: return "WeakDenominator";
    case ErrorCode::SeparationDetected: return "SeparationDetected";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::BracketFailure: return "BracketFailure";
    case ErrorCode::IccUnavailable: return "IccUnavailable";
  }
  return "Unknown";
}

bool is_validation_error(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::RankDeficient:
    case ErrorCode::NonPositiveWeight:
    case ErrorCode::InsufficientObservations:
    case ErrorCode::DfNonPositive:
    case ErrorCode::ZeroDenominator:
    case ErrorCode::WeakDenominator:
    case ErrorCode::SeparationDetected:
    case ErrorCode::NonConvergence:
    case ErrorCode::BracketFailure:
    case ErrorCode::IccUnavailable:
      return false;
    default:
      return true;
  }
}

std::string_view to_string(OutcomeKind v) {
  return v == OutcomeKind::Binary ? "binary" : "continuous";
}

std::string_view to_string(ComplianceClass v) {
  switch (v) {
    case ComplianceClass::Complier: return "complier";
    case ComplianceClass::NeverTaker: return "never-taker";
    case ComplianceClass::AlwaysTaker: return "always-taker";
    case ComplianceClass::Defier: return "defier";
  }
  return "unknown";
}

std::string_view to_string(Weighting v) {
  switch (v) {
    case Weighting::None: return "none";
    case Weighting::ClusterSize: return "cs";
    case Weighting::MinVariance: return "mv";
  }
  return "unknown";
}

std::string_view to_string(SeMode v) { return v == SeMode::HuberWhite ? "hw" : "model"; }

std::string_view to_string(DfMode v) { return v == DfMode::SmallSample ? "ssdf" : "normal"; }

TrialDataset validate(TrialDataset dataset) {
  const auto& records = dataset.records;
  if (records.empty()) fail(ErrorCode::TooFewClusters, "dataset has no records");

  const std::size_t n_x = records.front().x.size();
  if (!dataset.x_names.empty() && dataset.x_names.size() != n_x) {
    fail(ErrorCode::InconsistentCovariates, "x_names does not match covariate vector length");
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const std::string where = " (row " + std::to_string(i) + ", cluster '" + r.cluster_id + "')";
    if (r.z != 0 && r.z != 1) fail(ErrorCode::NonBinaryTreatment, "assignment z must be 0/1" + where);
    if (r.d != 0 && r.d != 1) fail(ErrorCode::NonBinaryTreatment, "treatment received d must be 0/1" + where);
    if (!std::isfinite(r.y)) fail(ErrorCode::NonFiniteValue, "outcome is not finite" + where);
    if (dataset.outcome_kind == OutcomeKind::Binary && r.y != 0.0 && r.y != 1.0) {
      fail(ErrorCode::NonBinaryOutcomeForBinaryKind, "binary outcome must be 0/1" + where);
    }
    if (r.x.size() != n_x) fail(ErrorCode::InconsistentCovariates, "covariate vector length differs" + where);
    for (double v : r.x) {
      if (!std::isfinite(v)) fail(ErrorCode::NonFiniteValue, "covariate is not finite" + where);
    }
  }

  ClusterIndex index;
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return records[a].cluster_id < records[b].cluster_id;
  });
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const auto& r = records[order[pos]];
    if (index.ids.empty() || index.ids.back() != r.cluster_id) {
      index.ids.push_back(r.cluster_id);
      index.offsets.push_back(pos);
      index.assignment.push_back(r.z);
    } else if (index.assignment.back() != r.z) {
      fail(ErrorCode::MixedAssignmentWithinCluster,
           "cluster '" + r.cluster_id + "' has rows with z=0 and z=1");
    }
  }
  index.offsets.push_back(order.size());
  index.order = std::move(order);

  if (index.n_clusters() < 2) fail(ErrorCode::TooFewClusters, "need at least 2 clusters");
  const auto treated = std::count(index.assignment.begin(), index.assignment.end(), 1);
  if (treated == 0 || treated == static_cast<long>(index.n_clusters())) {
    fail(ErrorCode::EmptyArm, treated == 0 ? "no cluster assigned to z=1" : "no cluster assigned to z=0");
  }

  if (!dataset.cluster_covariates.empty()) {
    const std::size_t n_w = dataset.cluster_covariates.begin()->second.size();
    if (!dataset.w_names.empty() && dataset.w_names.size() != n_w) {
      fail(ErrorCode::InconsistentCovariates, "w_names does not match cluster covariate length");
    }
    for (const auto& id : index.ids) {
      auto it = dataset.cluster_covariates.find(id);
      if (it == dataset.cluster_covariates.end()) {
        fail(ErrorCode::MissingClusterCovariate, "cluster '" + id + "' has no cluster-level covariates");
      }
      if (it->second.size() != n_w) {
        fail(ErrorCode::InconsistentCovariates, "cluster '" + id + "' covariate length differs");
      }
      for (double v : it->second) {
        if (!std::isfinite(v)) fail(ErrorCode::NonFiniteValue, "cluster '" + id + "' covariate is not finite");
      }
    }
  }

  dataset.index = std::move(index);
  return dataset;
}

const ClusterIndex& cluster_index(const TrialDataset& dataset) {
  if (!dataset.index) fail(ErrorCode::InvalidOptions, "dataset must be validated before use");
  return *dataset.index;
}

}  // namespace cltsls
