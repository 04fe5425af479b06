#include "cltsls/analyze.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <json.hpp>
#include <ostream>

#include "cltsls/collapse.hpp"
#include "cltsls/csv_io.hpp"
#include "cltsls/error.hpp"
#include "cltsls/iv.hpp"
#include "cltsls/scenario.hpp"

namespace cltsls {
namespace {

std::vector<std::size_t> column_positions(const std::vector<std::string>& names,
                                          const std::vector<std::string>& wanted, const char* kind) {
  std::vector<std::size_t> out;
  for (const auto& w : wanted) {
    auto it = std::find(names.begin(), names.end(), w);
    if (it == names.end()) fail(ErrorCode::SchemaMismatch, std::string(kind) + " column '" + w + "' not in dataset");
    out.push_back(static_cast<std::size_t>(it - names.begin()));
  }
  return out;
}

ClusterSummaries keep_w(ClusterSummaries s, const std::vector<std::size_t>& cols) {
  std::vector<std::string> names;
  for (std::size_t c : cols) names.push_back(s.w_names.at(c));
  for (auto& cl : s.clusters) {
    std::vector<double> w;
    for (std::size_t c : cols) w.push_back(cl.w.at(c));
    cl.w = std::move(w);
  }
  s.w_names = std::move(names);
  return s;
}

}  // namespace

std::string_view to_string(Estimand e) { return e == Estimand::Itt ? "ITT" : "LATE"; }

std::vector<ResultRow> analyze(const TrialDataset& dataset, const AnalyzeRequest& request) {
  cluster_index(dataset);
  const std::vector<std::size_t> w_cols = column_positions(dataset.w_names, request.w_columns, "cluster covariate");
  const std::vector<std::size_t> x_cols = column_positions(dataset.x_names, request.x_columns, "individual covariate");
  if (request.weights.empty() || request.se_modes.empty() || request.df_modes.empty()) {
    fail(ErrorCode::InvalidOptions, "weights, se and df selections must be non-empty");
  }

  std::vector<std::pair<ClOutcome, ClusterSummaries>> outcomes;
  outcomes.emplace_back(ClOutcome::Unadjusted, keep_w(cluster_means(dataset), w_cols));
  if (!x_cols.empty()) {
    ClusterSummaries adj = dataset.outcome_kind == OutcomeKind::Binary ? adjust_binary(dataset, x_cols)
                                                                       : adjust_continuous(dataset, x_cols);
    outcomes.emplace_back(ClOutcome::AdjustedForX, keep_w(std::move(adj), w_cols));
  }
  std::vector<bool> w_modes{false};
  if (!w_cols.empty()) w_modes.push_back(true);

  std::vector<ResultRow> rows;
  std::vector<Estimand> estimands{Estimand::Late};
  if (request.include_itt) estimands.push_back(Estimand::Itt);
  for (Estimand estimand : estimands) {
    for (const auto& [cl, summaries] : outcomes) {
      for (bool adjust_w : w_modes) {
        for (Weighting wt : request.weights) {
          AnalysisOptions base;
          base.weights = wt;
          base.adjust_w = adjust_w;
          base.icc = request.icc;
          base.level = request.level;
          const EstimateCore core =
              estimand == Estimand::Late ? tsls_internals(summaries, base).core : itt_core(summaries, base);
          for (SeMode se : request.se_modes) {
            for (DfMode df : request.df_modes) {
              AnalysisOptions o = base;
              o.se_mode = se;
              o.df_mode = df;
              rows.push_back({estimand, cl, finish(core, o)});
            }
          }
        }
      }
    }
  }
  return rows;
}

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << "estimand,cl_outcome,adjust_w,weights,se_mode,df_mode,estimate,se,ci_low,ci_high,p,df,first_stage_f,"
         "icc,n_clusters\n";
  for (const auto& r : rows) {
    const LateFit& f = r.fit;
    const AnalysisOptions& o = f.options_used;
    out << to_string(r.estimand) << ',' << to_string(r.cl_outcome) << ',' << (o.adjust_w ? 1 : 0) << ','
        << to_string(o.weights) << ',' << to_string(o.se_mode) << ',' << to_string(o.df_mode) << ','
        << format_exact(f.estimate) << ',' << format_exact(f.se) << ',' << format_exact(f.ci_low) << ','
        << format_exact(f.ci_high) << ',' << format_exact(f.p) << ',' << format_exact(f.df) << ','
        << format_exact(f.first_stage_f) << ',' << format_exact(f.icc_used) << ',' << f.n_clusters << '\n';
  }
}

void write_results_table(std::ostream& out, const std::vector<ResultRow>& rows) {
  auto weight_label = [](Weighting w) {
    switch (w) {
      case Weighting::None: return "No weighting";
      case Weighting::ClusterSize: return "Cluster size weights";
      case Weighting::MinVariance: return "Minimum-variance weights";
    }
    return "";
  };
  auto correction_label = [](const AnalysisOptions& o) {
    const bool hw = o.se_mode == SeMode::HuberWhite;
    const bool ssdf = o.df_mode == DfMode::SmallSample;
    if (hw && ssdf) return "SSDF + HW";
    if (hw) return "HW";
    if (ssdf) return "SSDF";
    return "None";
  };

  std::string section;
  Weighting last_weight{};
  bool first_in_section = true;
  for (const auto& r : rows) {
    const AnalysisOptions& o = r.fit.options_used;
    const std::string this_section = std::string(to_string(r.estimand)) + ", " +
                                     (r.cl_outcome == ClOutcome::Unadjusted ? "unadjusted CL outcome" : "adjusted CL outcome") +
                                     (o.adjust_w ? ", adjusted for cluster-level covariates" : "");
    if (this_section != section) {
      section = this_section;
      out << (&r == &rows.front() ? "" : "\n") << section << " (" << r.fit.n_clusters
          << " clusters, first-stage F = " << format_pretty(r.fit.first_stage_f) << ")\n";
      out << std::left << std::setw(26) << "Weighting strategy" << std::setw(12) << "SE & corr." << std::setw(26)
          << "Estimate (95% CI)" << "p\n";
      first_in_section = true;
    }
    const bool new_weight = first_in_section || o.weights != last_weight;
    const std::string ci = "(" + format_pretty(r.fit.ci_low) + ", " + format_pretty(r.fit.ci_high) + ")";
    out << std::left << std::setw(26) << (new_weight ? weight_label(o.weights) : "") << std::setw(12)
        << correction_label(o) << std::setw(26) << ((new_weight ? format_pretty(r.fit.estimate) + " " : std::string(6, ' ')) + ci)
        << format_pretty(r.fit.p) << '\n';
    last_weight = o.weights;
    first_in_section = false;
  }
}

void write_report_csv(std::ostream& out, const McReport& report) {
  out << "cl_outcome,adjust_w,weights,se_mode,df_mode,replicates,fit_errors,bias,mce_bias,coverage,mce_coverage,"
         "mean_se,rejected_weak,attempts\n";
  for (const auto& v : report.variants) {
    out << to_string(v.key.cl_outcome) << ',' << (v.key.adjust_w ? 1 : 0) << ',' << to_string(v.key.weights) << ','
        << to_string(v.key.se_mode) << ',' << to_string(v.key.df_mode) << ',' << v.replicates << ',' << v.fit_errors << ','
        << format_exact(v.bias) << ',' << format_exact(v.mce_bias) << ',' << format_exact(v.coverage) << ','
        << format_exact(v.mce_coverage) << ',' << format_exact(v.mean_se) << ',' << report.rejected_weak << ','
        << report.attempts << '\n';
  }
}

void write_report_json(std::ostream& out, const McReport& report) {
  using nlohmann::ordered_json;
  auto num = [](double v) -> ordered_json {
    if (std::isfinite(v)) return v;
    return format_exact(v);
  };
  ordered_json j;
  j["scenario"] = scenario_text(report.config);
  j["master_seed"] = report.master_seed;
  j["replicates"] = report.replicates;
  j["attempts"] = report.attempts;
  j["rejected_weak"] = report.rejected_weak;
  j["min_retained_f"] = num(report.min_retained_f);
  j["lambda0"] = num(report.lambda0);
  j["outcome_variance"] = {{"signal_between", num(report.variance.signal_between)},
                           {"signal_within", num(report.variance.signal_within)},
                           {"sigma2_cluster", num(report.variance.sigma2_cluster)},
                           {"sigma2_error", num(report.variance.sigma2_error)},
                           {"target_reachable", report.variance.target_reachable}};
  ordered_json variants = ordered_json::array();
  for (const auto& v : report.variants) {
    variants.push_back({{"cl_outcome", to_string(v.key.cl_outcome)},
                        {"adjust_w", v.key.adjust_w},
                        {"weights", to_string(v.key.weights)},
                        {"se_mode", to_string(v.key.se_mode)},
                        {"df_mode", to_string(v.key.df_mode)},
                        {"replicates", v.replicates},
                        {"fit_errors", v.fit_errors},
                        {"bias", num(v.bias)},
                        {"mce_bias", num(v.mce_bias)},
                        {"coverage", num(v.coverage)},
                        {"mce_coverage", num(v.mce_coverage)},
                        {"mean_se", num(v.mean_se)}});
  }
  j["variants"] = std::move(variants);
  out << j.dump(2) << '\n';
}

}  // namespace cltsls
