#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cltsls/dgp.hpp"
#include "cltsls/model.hpp"

namespace cltsls {

enum class ClOutcome { Unadjusted, AdjustedForX };

struct VariantKey {
  ClOutcome cl_outcome = ClOutcome::Unadjusted;
  bool adjust_w = false;
  Weighting weights = Weighting::None;
  SeMode se_mode = SeMode::ModelBased;
  DfMode df_mode = DfMode::NormalApprox;

  auto operator<=>(const VariantKey&) const = default;
  AnalysisOptions options(double level = 0.95) const;
};

/// The full 2 x 2 x 3 x 2 x 2 estimator grid in canonical order.
std::vector<VariantKey> all_variants();

std::string_view to_string(ClOutcome v);
std::string describe(const VariantKey& key);

struct VariantResult {
  VariantKey key;
  int replicates = 0;  // fits that succeeded
  int fit_errors = 0;
  double bias = 0.0;
  double mce_bias = 0.0;
  double coverage = 0.0;
  double mce_coverage = 0.0;
  double mean_se = 0.0;
};

struct McReport {
  ScenarioConfig config;
  std::uint64_t master_seed = 0;
  int replicates = 0;  // L retained datasets
  int attempts = 0;
  int rejected_weak = 0;
  double min_retained_f = 0.0;
  double lambda0 = 0.0;
  OutcomeVariance variance;
  std::vector<VariantResult> variants;

  const VariantResult& at(const VariantKey& key) const;
};

struct BiasMce {
  double bias = 0.0;
  double mce = 0.0;
};

struct CoverageMce {
  double coverage = 0.0;
  double mce = 0.0;
};

/// bias = mean - truth; mce = sqrt(sum (b - mean)^2 / (L (L - 1))).
/// Sums run over sorted values so the result does not depend on input order.
BiasMce bias_and_mce(std::span<const double> estimates, double truth);

/// Share of replicates with |b - truth| < crit * se; mce = sqrt(level (1 - level) / L).
CoverageMce coverage_and_mce(std::span<const double> estimates, std::span<const double> ses,
                             std::span<const double> crit_values, double truth, double level = 0.95);

struct StudyOptions {
  int threads = 1;
  double level = 0.95;
};

/// Generate, screen (F >= 10) and fit until L datasets are retained.
/// Replicate seeds are derive_seed(master_seed, attempt) so the report is
/// identical for any thread count.
McReport run_study(const ScenarioConfig& config, int replicates, const std::vector<VariantKey>& variants,
                   std::uint64_t master_seed, const StudyOptions& options = {});

}  // namespace cltsls
