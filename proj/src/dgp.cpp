#include "cltsls/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "cltsls/collapse.hpp"
#include "cltsls/error.hpp"
#include "cltsls/iv.hpp"
#include "cltsls/quadrature.hpp"

namespace cltsls {
namespace {

constexpr int kCalibrationNodes = 64;
constexpr int kVarianceNodes = 20;
constexpr double kScreenThreshold = 10.0;

enum Stream : std::uint64_t { kSizes = 1, kClusters = 2, kIndividuals = 3 };

double expit(double eta) {
  if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

double cluster_part_x(const ScenarioConfig& c) { return c.rho_x * c.sigma2_x; }
double individual_part_x(const ScenarioConfig& c) { return (1.0 - c.rho_x) * c.sigma2_x; }

// Variance of the random part of the compliance linear predictor.
double predictor_variance(const ScenarioConfig& c) {
  if (c.adherence == Adherence::Cluster) return c.lambda_w * c.lambda_w * c.sigma2_w;
  return c.lambda_w * c.lambda_w * c.sigma2_w + c.lambda_x * c.lambda_x * c.sigma2_x +
         random_effect_variance(c);
}

double marginal_adherence(double lambda0, double sd) {
  const NormalQuadrature& q = normal_quadrature(kCalibrationNodes);
  double p = 0.0;
  for (std::size_t k = 0; k < q.nodes.size(); ++k) p += q.weights[k] * expit(lambda0 + sd * q.nodes[k]);
  return p;
}

std::string cluster_label(int k, int width) {
  std::string digits = std::to_string(k + 1);
  return "c" + std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(digits.size()))), '0') + digits;
}

}  // namespace

std::string_view to_string(Adherence v) { return v == Adherence::Individual ? "individual" : "cluster"; }
std::string_view to_string(SizeDistribution v) { return v == SizeDistribution::Pareto ? "pareto" : "poisson"; }

void ScenarioConfig::check() const {
  auto bad = [](const std::string& what) { fail(ErrorCode::InvalidConfig, what); };
  if (n_clusters < 2) bad("n_clusters must be at least 2");
  if (size_dist == SizeDistribution::Poisson && !(size_mean > 0.0)) bad("size_mean must be positive");
  if (size_dist == SizeDistribution::Pareto) {
    if (!(pareto_shape > 0.0) || !(pareto_scale > 0.0)) bad("pareto shape and scale must be positive");
    if (pareto_min < 1) bad("pareto_min must be at least 1");
  }
  if (!(pi > 0.0 && pi <= 1.0)) bad("pi must lie in (0,1]");
  for (double rho : {rho_y, rho_x, rho_c}) {
    if (!(rho >= 0.0 && rho < 1.0)) bad("rho values must lie in [0,1)");
  }
  if (!(sigma2_w >= 0.0) || !(sigma2_x >= 0.0)) bad("covariate variances must be non-negative");
  for (double v : {lambda_w, lambda_x, beta_0, beta_c, beta_cz, beta_w, beta_x}) {
    if (!std::isfinite(v)) bad("effects must be finite");
  }
}

ScenarioConfig make_scenario(Adherence adherence, int n_clusters, EffectLevel effects, double rho_y,
                             double beta_cz) {
  ScenarioConfig c;
  c.adherence = adherence;
  c.n_clusters = n_clusters;
  c.size_mean = 1000.0 / n_clusters;
  c.pi = adherence == Adherence::Cluster ? 0.60 : 0.85;
  const bool large = effects == EffectLevel::Large;
  c.lambda_w = c.lambda_x = large ? 0.70 : 0.05;
  c.beta_w = c.beta_x = large ? 0.4 : 0.1;
  c.rho_y = rho_y;
  c.beta_cz = beta_cz;
  return c;
}

double logistic_variance() { return std::numbers::pi * std::numbers::pi / 3.0; }

double random_effect_variance(const ScenarioConfig& config) {
  if (config.adherence == Adherence::Cluster) return 0.0;
  return logistic_variance() * config.rho_c / (1.0 - config.rho_c);
}

double calibrate_lambda0(const ScenarioConfig& config) {
  // pi = 1 is perfect adherence: every linear predictor is +inf.
  if (config.pi == 1.0) return std::numeric_limits<double>::infinity();
  const double sd = std::sqrt(predictor_variance(config));
  if (sd == 0.0) return logit(config.pi);
  double lo = -40.0;
  double hi = 40.0;
  if (!(marginal_adherence(lo, sd) < config.pi && marginal_adherence(hi, sd) > config.pi)) {
    fail(ErrorCode::BracketFailure, "target adherence probability unreachable");
  }
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double p = marginal_adherence(mid, sd);
    if (std::abs(p - config.pi) < 1e-12) return mid;
    (p < config.pi ? lo : hi) = mid;
    if (hi - lo < 1e-14) break;
  }
  return 0.5 * (lo + hi);
}

OutcomeVariance outcome_variance(const ScenarioConfig& c, double lambda0) {
  const NormalQuadrature& q = normal_quadrature(kVarianceNodes);
  const double sd_w = std::sqrt(c.sigma2_w);
  const double sd_xj = std::sqrt(cluster_part_x(c));
  const double sd_e = std::sqrt(individual_part_x(c));
  const double sd_zeta = std::sqrt(random_effect_variance(c));
  const std::size_t m = q.nodes.size();

  // Moments of the cluster-level conditional mean mu_j and the expected
  // within-cluster variance of the signal, averaged over Z ~ Bern(1/2).
  double e_mu = 0.0, e_mu2 = 0.0, e_within = 0.0;
  for (int z = 0; z <= 1; ++z) {
    const double b = c.beta_c + c.beta_cz * z;
    for (std::size_t iw = 0; iw < m; ++iw) {
      const double w = sd_w * q.nodes[iw];
      for (std::size_t ix = 0; ix < m; ++ix) {
        const double xj = sd_xj * q.nodes[ix];
        const double base = c.beta_w * w + c.beta_x * xj;
        const double weight_wx = 0.5 * q.weights[iw] * q.weights[ix];
        if (c.adherence == Adherence::Cluster) {
          const double p = expit(lambda0 + c.lambda_w * w);
          // C_j is a cluster-level Bernoulli draw.
          const double mu1 = base + b;
          e_mu += weight_wx * (base + b * p);
          e_mu2 += weight_wx * (p * mu1 * mu1 + (1.0 - p) * base * base);
          e_within += weight_wx * c.beta_x * c.beta_x * sd_e * sd_e;
          continue;
        }
        for (std::size_t iz = 0; iz < m; ++iz) {
          const double eta = lambda0 + c.lambda_w * w + c.lambda_x * xj + sd_zeta * q.nodes[iz];
          double prob = 0.0;  // E_e[C]
          double cov = 0.0;   // E_e[e C]
          for (std::size_t ie = 0; ie < m; ++ie) {
            const double e = sd_e * q.nodes[ie];
            const double pc = expit(eta + c.lambda_x * e);
            prob += q.weights[ie] * pc;
            cov += q.weights[ie] * e * pc;
          }
          const double weight = weight_wx * q.weights[iz];
          const double mu = base + b * prob;
          e_mu += weight * mu;
          e_mu2 += weight * mu * mu;
          e_within += weight * (c.beta_x * c.beta_x * sd_e * sd_e + b * b * (prob - prob * prob) +
                                2.0 * c.beta_x * b * cov);
        }
      }
    }
  }

  OutcomeVariance v;
  v.signal_between = std::max(0.0, e_mu2 - e_mu * e_mu);
  v.signal_within = std::max(0.0, e_within);
  v.sigma2_cluster = c.rho_y - v.signal_between;
  v.sigma2_error = 1.0 - c.rho_y - v.signal_within;
  if (v.sigma2_cluster < 0.0 || v.sigma2_error < 0.0) {
    v.target_reachable = false;
    v.sigma2_cluster = std::max(0.0, v.sigma2_cluster);
    v.sigma2_error = std::max(0.0, v.sigma2_error);
  }
  return v;
}

DgpPlan prepare(const ScenarioConfig& config) {
  config.check();
  DgpPlan plan;
  plan.config = config;
  plan.lambda0 = calibrate_lambda0(config);
  plan.variance = outcome_variance(config, plan.lambda0);
  return plan;
}

std::vector<int> draw_cluster_sizes(const ScenarioConfig& config, Engine& rng) {
  std::vector<int> sizes(static_cast<std::size_t>(config.n_clusters));
  if (config.size_dist == SizeDistribution::Poisson) {
    std::poisson_distribution<int> poisson(config.size_mean);
    for (int& n : sizes) n = std::max(1, poisson(rng));
    return sizes;
  }
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int& n : sizes) {
    const double u = 1.0 - unif(rng);  // (0, 1]
    const double x = config.pareto_scale * std::pow(u, -1.0 / config.pareto_shape);
    n = std::max(config.pareto_min, static_cast<int>(std::min(std::round(x), 1e7)));
  }
  return sizes;
}

GeneratedTrial generate(const DgpPlan& plan, std::uint64_t seed) {
  const ScenarioConfig& c = plan.config;
  Engine size_rng(derive_seed(seed, kSizes));
  Engine cluster_rng(derive_seed(seed, kClusters));
  Engine indiv_rng(derive_seed(seed, kIndividuals));
  std::normal_distribution<double> std_normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const std::vector<int> sizes = draw_cluster_sizes(c, size_rng);
  const double sd_w = std::sqrt(c.sigma2_w);
  const double sd_xj = std::sqrt(cluster_part_x(c));
  const double sd_e = std::sqrt(individual_part_x(c));
  const double sd_zeta = std::sqrt(random_effect_variance(c));
  const double sd_u = std::sqrt(plan.variance.sigma2_cluster);
  const double sd_eps = std::sqrt(plan.variance.sigma2_error);
  const int width = static_cast<int>(std::to_string(c.n_clusters).size());

  GeneratedTrial trial;
  TrialDataset& ds = trial.dataset;
  ds.outcome_kind = OutcomeKind::Continuous;
  ds.x_names = {"x_1"};
  ds.w_names = {"w_1"};
  std::size_t total = 0;
  for (int n : sizes) total += static_cast<std::size_t>(n);
  ds.records.reserve(total);
  trial.compliance.reserve(total);
  trial.compliers.assign(sizes.size(), 0);
  int treated = 0;

  for (std::size_t j = 0; j < sizes.size(); ++j) {
    const std::string id = cluster_label(static_cast<int>(j), width);
    const int z = unif(cluster_rng) < 0.5 ? 1 : 0;
    treated += z;
    const double w = sd_w * std_normal(cluster_rng);
    const double xj = sd_xj * std_normal(cluster_rng);
    const double upsilon = sd_u * std_normal(cluster_rng);
    const double zeta = sd_zeta * std_normal(cluster_rng);
    const double u_cluster = unif(cluster_rng);
    ds.cluster_covariates[id] = {w};

    const int c_cluster = u_cluster < expit(plan.lambda0 + c.lambda_w * w) ? 1 : 0;
    for (int i = 0; i < sizes[j]; ++i) {
      const double x = xj + sd_e * std_normal(indiv_rng);
      const double u_indiv = unif(indiv_rng);
      const double eps = sd_eps * std_normal(indiv_rng);
      int complier = c_cluster;
      if (c.adherence == Adherence::Individual) {
        complier = u_indiv < expit(plan.lambda0 + c.lambda_w * w + c.lambda_x * x + zeta) ? 1 : 0;
      }
      IndividualRecord r;
      r.cluster_id = id;
      r.z = z;
      r.d = z * complier;
      r.y = c.beta_0 + c.beta_c * complier + c.beta_cz * complier * z + c.beta_w * w + c.beta_x * x +
            upsilon + eps;
      r.x = {x};
      ds.records.push_back(std::move(r));
      trial.compliance.push_back(complier ? ComplianceClass::Complier : ComplianceClass::NeverTaker);
      trial.compliers[j] += complier;
    }
  }

  double sum_c = 0.0, sum_frac = 0.0;
  for (std::size_t j = 0; j < sizes.size(); ++j) {
    sum_c += trial.compliers[j];
    sum_frac += static_cast<double>(trial.compliers[j]) / sizes[j];
  }
  trial.psi.assign(sizes.size(), 0.0);
  trial.psi_cl.assign(sizes.size(), 0.0);
  if (sum_c > 0.0) {
    for (std::size_t j = 0; j < sizes.size(); ++j) {
      trial.psi[j] = trial.compliers[j] / sum_c;
      trial.psi_cl[j] = (static_cast<double>(trial.compliers[j]) / sizes[j]) / sum_frac;
    }
  }
  // Cluster-specific LATEs all equal beta_CZ, so both weightings recover it.
  trial.true_population_late = c.beta_cz;
  trial.true_cl_late = c.beta_cz;

  // A draw with every cluster in one arm stays unvalidated (index empty);
  // the weak-instrument screen rejects it.
  if (treated > 0 && treated < c.n_clusters) ds = validate(std::move(ds));
  return trial;
}

GeneratedTrial generate(const ScenarioConfig& config, std::uint64_t seed) {
  return generate(prepare(config), seed);
}

bool screen_weak_instrument(const GeneratedTrial& trial) {
  if (!trial.dataset.index) return false;
  return first_stage_f(cluster_means(trial.dataset)) >= kScreenThreshold;
}

}  // namespace cltsls
