#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cltsls {

enum class OutcomeKind { Continuous, Binary };

enum class ComplianceClass { Complier, NeverTaker, AlwaysTaker, Defier };

struct IndividualRecord {
  std::string cluster_id;
  int z = 0;  // cluster assignment
  int d = 0;  // treatment received
  double y = 0.0;
  std::vector<double> x;  // individual-level covariates, may be empty

  bool operator==(const IndividualRecord&) const = default;
};

/// Rows grouped by cluster. Clusters are ordered lexicographically by id;
/// rows of cluster k are order[offsets[k] .. offsets[k+1]) in input order.
struct ClusterIndex {
  std::vector<std::string> ids;
  std::vector<std::size_t> order;
  std::vector<std::size_t> offsets;
  std::vector<int> assignment;  // z per cluster

  std::size_t n_clusters() const { return ids.size(); }
  std::size_t size_of(std::size_t k) const { return offsets[k + 1] - offsets[k]; }

  bool operator==(const ClusterIndex&) const = default;
};

struct TrialDataset {
  std::vector<IndividualRecord> records;
  std::map<std::string, std::vector<double>> cluster_covariates;  // W_j per cluster id
  OutcomeKind outcome_kind = OutcomeKind::Continuous;
  std::vector<std::string> x_names;
  std::vector<std::string> w_names;

  // Filled by validate().
  std::optional<ClusterIndex> index;

  bool operator==(const TrialDataset&) const = default;
};

/// Checks every dataset invariant and builds the cluster index.
/// Throws cltsls::Error on the first violation.
TrialDataset validate(TrialDataset dataset);

/// Index of a validated dataset; throws InvalidOptions if validate() was not run.
const ClusterIndex& cluster_index(const TrialDataset& dataset);

struct ClusterSummary {
  std::string cluster_id;
  int n = 0;
  int z = 0;
  double d_bar = 0.0;
  double y_bar = 0.0;  // unadjusted mean or adjusted residual mean
  std::vector<double> w;

  bool operator==(const ClusterSummary&) const = default;
};

struct IccEstimate {
  double rho = 0.0;
  double sigma2_between = 0.0;
  double sigma2_within = 0.0;
  bool degenerate = false;  // every value identical; rho reported as 0

  bool operator==(const IccEstimate&) const = default;
};

/// Per-cluster summaries plus the ICC of the individual-level values that
/// produced y_bar (used when minimum-variance weights are estimated from data).
struct ClusterSummaries {
  std::vector<ClusterSummary> clusters;
  std::optional<IccEstimate> outcome_icc;
  std::vector<std::string> w_names;

  std::size_t size() const { return clusters.size(); }
  bool operator==(const ClusterSummaries&) const = default;
};

enum class Weighting { None, ClusterSize, MinVariance };
enum class SeMode { ModelBased, HuberWhite };
enum class DfMode { NormalApprox, SmallSample };

struct IccSource {
  enum class Kind { EstimateFromData, Fixed };
  Kind kind = Kind::EstimateFromData;
  double value = 0.0;

  static IccSource estimate() { return {}; }
  static IccSource fixed(double rho) { return {Kind::Fixed, rho}; }
  bool operator==(const IccSource&) const = default;
};

struct AnalysisOptions {
  Weighting weights = Weighting::None;
  SeMode se_mode = SeMode::ModelBased;
  DfMode df_mode = DfMode::NormalApprox;
  bool adjust_w = false;
  IccSource icc;
  double level = 0.95;

  bool operator==(const AnalysisOptions&) const = default;
};

struct LateFit {
  double estimate = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double p = 1.0;
  double df = 0.0;  // +inf under the normal approximation
  double critical_value = 0.0;
  double first_stage_f = 0.0;
  int n_clusters = 0;
  double icc_used = 0.0;  // NaN unless minimum-variance weights were used
  AnalysisOptions options_used;
};

std::string_view to_string(OutcomeKind v);
std::string_view to_string(ComplianceClass v);
std::string_view to_string(Weighting v);
std::string_view to_string(SeMode v);
std::string_view to_string(DfMode v);

}  // namespace cltsls
