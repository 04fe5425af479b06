#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "cltsls/mc.hpp"
#include "cltsls/model.hpp"

namespace cltsls {

enum class Estimand { Late, Itt };

struct AnalyzeRequest {
  std::vector<Weighting> weights{Weighting::None, Weighting::ClusterSize, Weighting::MinVariance};
  std::vector<SeMode> se_modes{SeMode::ModelBased, SeMode::HuberWhite};
  std::vector<DfMode> df_modes{DfMode::NormalApprox, DfMode::SmallSample};
  std::vector<std::string> w_columns;  // non-empty: rows with and without W adjustment
  std::vector<std::string> x_columns;  // non-empty: rows for unadjusted and adjusted CL outcomes
  IccSource icc;
  bool include_itt = false;
  double level = 0.95;
};

struct ResultRow {
  Estimand estimand = Estimand::Late;
  ClOutcome cl_outcome = ClOutcome::Unadjusted;
  LateFit fit;
};

/// Every requested variant of the grid, in the order
/// estimand > cl_outcome > adjust_w > weights > se > df.
std::vector<ResultRow> analyze(const TrialDataset& dataset, const AnalyzeRequest& request);

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows);
/// Human-readable table: "estimate (low, high)" and p with 3 decimals.
void write_results_table(std::ostream& out, const std::vector<ResultRow>& rows);

void write_report_csv(std::ostream& out, const McReport& report);
void write_report_json(std::ostream& out, const McReport& report);

std::string_view to_string(Estimand e);

}  // namespace cltsls
