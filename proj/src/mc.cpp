#include "cltsls/mc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <thread>

#include "cltsls/collapse.hpp"
#include "cltsls/error.hpp"
#include "cltsls/iv.hpp"

namespace cltsls {
namespace {

struct VariantDraw {
  bool ok = false;
  double estimate = 0.0;
  double se = 0.0;
  double critical_value = 0.0;
};

struct ReplicateResult {
  bool retained = false;
  double first_stage_f = 0.0;
  std::vector<VariantDraw> draws;  // aligned with the variant list
};

// Variants sharing (cl_outcome, adjust_w, weights) reuse one TSLS fit.
struct FitGroup {
  ClOutcome cl_outcome;
  bool adjust_w;
  Weighting weights;
  auto operator<=>(const FitGroup&) const = default;
};

double sorted_sum(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc;
}

ReplicateResult run_replicate(const DgpPlan& plan, const std::vector<VariantKey>& variants,
                              std::uint64_t seed, double level) {
  ReplicateResult out;
  const GeneratedTrial trial = generate(plan, seed);
  if (!trial.dataset.index) return out;
  const ClusterSummaries unadjusted = cluster_means(trial.dataset);
  out.first_stage_f = first_stage_f(unadjusted);
  if (!(out.first_stage_f >= 10.0)) return out;
  out.retained = true;
  out.draws.resize(variants.size());

  std::optional<ClusterSummaries> adjusted;
  bool adjusted_failed = false;
  std::map<FitGroup, std::optional<EstimateCore>> cores;

  for (std::size_t v = 0; v < variants.size(); ++v) {
    const VariantKey& key = variants[v];
    const FitGroup group{key.cl_outcome, key.adjust_w, key.weights};
    auto it = cores.find(group);
    if (it == cores.end()) {
      std::optional<EstimateCore> core;
      try {
        const ClusterSummaries* summaries = &unadjusted;
        if (key.cl_outcome == ClOutcome::AdjustedForX) {
          if (!adjusted && !adjusted_failed) {
            try {
              const std::size_t x_col = 0;
              adjusted = adjust_continuous(trial.dataset, std::span<const std::size_t>(&x_col, 1));
            } catch (const Error&) {
              adjusted_failed = true;
            }
          }
          summaries = adjusted ? &*adjusted : nullptr;
        }
        if (summaries) core = tsls_internals(*summaries, key.options(level)).core;
      } catch (const Error&) {
        core.reset();
      }
      it = cores.emplace(group, core).first;
    }
    if (!it->second) continue;
    const LateFit fit = finish(*it->second, key.options(level));
    out.draws[v] = {true, fit.estimate, fit.se, fit.critical_value};
  }
  return out;
}

}  // namespace

AnalysisOptions VariantKey::options(double level) const {
  AnalysisOptions o;
  o.weights = weights;
  o.se_mode = se_mode;
  o.df_mode = df_mode;
  o.adjust_w = adjust_w;
  o.icc = IccSource::estimate();
  o.level = level;
  return o;
}

std::vector<VariantKey> all_variants() {
  std::vector<VariantKey> out;
  for (ClOutcome cl : {ClOutcome::Unadjusted, ClOutcome::AdjustedForX}) {
    for (bool w : {false, true}) {
      for (Weighting wt : {Weighting::None, Weighting::ClusterSize, Weighting::MinVariance}) {
        for (SeMode se : {SeMode::ModelBased, SeMode::HuberWhite}) {
          for (DfMode df : {DfMode::NormalApprox, DfMode::SmallSample}) out.push_back({cl, w, wt, se, df});
        }
      }
    }
  }
  return out;
}

std::string_view to_string(ClOutcome v) { return v == ClOutcome::AdjustedForX ? "adjusted_x" : "unadjusted"; }

std::string describe(const VariantKey& k) {
  return std::string(to_string(k.cl_outcome)) + (k.adjust_w ? "+W" : "") + "/" + std::string(to_string(k.weights)) +
         "/" + std::string(to_string(k.se_mode)) + "/" + std::string(to_string(k.df_mode));
}

const VariantResult& McReport::at(const VariantKey& key) const {
  for (const auto& v : variants) {
    if (v.key == key) return v;
  }
  fail(ErrorCode::InvalidOptions, "variant " + describe(key) + " not in report");
}

BiasMce bias_and_mce(std::span<const double> estimates, double truth) {
  BiasMce out;
  const std::size_t n = estimates.size();
  if (n == 0) {
    out.bias = out.mce = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  std::vector<double> sorted(estimates.begin(), estimates.end());
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (double x : sorted) sum += x;
  const double mean = sum / static_cast<double>(n);
  out.bias = mean - truth;
  if (n < 2) {
    out.mce = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  std::vector<double> dev2(n);
  for (std::size_t i = 0; i < n; ++i) dev2[i] = (sorted[i] - mean) * (sorted[i] - mean);
  out.mce = std::sqrt(sorted_sum(std::move(dev2)) / (static_cast<double>(n) * static_cast<double>(n - 1)));
  return out;
}

CoverageMce coverage_and_mce(std::span<const double> estimates, std::span<const double> ses,
                             std::span<const double> crit_values, double truth, double level) {
  if (estimates.size() != ses.size() || estimates.size() != crit_values.size()) {
    fail(ErrorCode::InvalidOptions, "estimates, ses and critical values must have equal lengths");
  }
  CoverageMce out;
  const std::size_t n = estimates.size();
  if (n == 0) {
    out.coverage = out.mce = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(estimates[i] - truth) < crit_values[i] * ses[i]) ++hits;
  }
  out.coverage = static_cast<double>(hits) / static_cast<double>(n);
  out.mce = std::sqrt(level * (1.0 - level) / static_cast<double>(n));
  return out;
}

McReport run_study(const ScenarioConfig& config, int replicates, const std::vector<VariantKey>& variants,
                   std::uint64_t master_seed, const StudyOptions& options) {
  if (replicates < 1) fail(ErrorCode::InvalidOptions, "replicate count must be at least 1");
  const DgpPlan plan = prepare(config);
  const int threads = std::max(1, options.threads);

  McReport report;
  report.config = config;
  report.master_seed = master_seed;
  report.lambda0 = plan.lambda0;
  report.variance = plan.variance;
  report.min_retained_f = std::numeric_limits<double>::infinity();

  const std::size_t n_var = variants.size();
  std::vector<std::vector<double>> est(n_var), se(n_var), crit(n_var);
  std::vector<int> errors(n_var, 0);

  constexpr std::uint64_t kMaxAttempts = 100'000'000;
  std::uint64_t next_attempt = 0;
  int retained = 0;
  while (retained < replicates) {
    if (next_attempt >= kMaxAttempts) {
      fail(ErrorCode::NonConvergence, "weak-instrument screen rejected too many datasets");
    }
    const std::size_t batch = static_cast<std::size_t>(std::max(replicates - retained, 4 * threads));
    std::vector<ReplicateResult> results(batch);
    std::atomic<std::size_t> cursor{0};
    auto worker = [&] {
      for (std::size_t i = cursor++; i < batch; i = cursor++) {
        results[i] = run_replicate(plan, variants, derive_seed(master_seed, next_attempt + i), options.level);
      }
    };
    if (threads == 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    }

    for (std::size_t i = 0; i < batch && retained < replicates; ++i) {
      ++report.attempts;
      const ReplicateResult& r = results[i];
      if (!r.retained) {
        ++report.rejected_weak;
        continue;
      }
      ++retained;
      report.min_retained_f = std::min(report.min_retained_f, r.first_stage_f);
      for (std::size_t v = 0; v < n_var; ++v) {
        if (!r.draws[v].ok) {
          ++errors[v];
          continue;
        }
        est[v].push_back(r.draws[v].estimate);
        se[v].push_back(r.draws[v].se);
        crit[v].push_back(r.draws[v].critical_value);
      }
    }
    next_attempt += batch;
  }
  report.replicates = retained;

  const double truth = config.beta_cz;
  for (std::size_t v = 0; v < n_var; ++v) {
    VariantResult res;
    res.key = variants[v];
    res.replicates = static_cast<int>(est[v].size());
    res.fit_errors = errors[v];
    const BiasMce b = bias_and_mce(est[v], truth);
    const CoverageMce c = coverage_and_mce(est[v], se[v], crit[v], truth, options.level);
    res.bias = b.bias;
    res.mce_bias = b.mce;
    res.coverage = c.coverage;
    res.mce_coverage = c.mce;
    res.mean_se = se[v].empty() ? std::numeric_limits<double>::quiet_NaN()
                                : sorted_sum(se[v]) / static_cast<double>(se[v].size());
    report.variants.push_back(res);
  }
  return report;
}

}  // namespace cltsls
