#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "cltsls/model.hpp"
#include "cltsls/rng.hpp"

namespace cltsls {

enum class Adherence { Cluster, Individual };
enum class SizeDistribution { Poisson, Pareto };
enum class EffectLevel { Small, Large };

struct ScenarioConfig {
  Adherence adherence = Adherence::Cluster;
  int n_clusters = 50;
  SizeDistribution size_dist = SizeDistribution::Poisson;
  double size_mean = 20.0;  // Poisson mean
  double pareto_shape = 1.8;
  double pareto_scale = 9.1;
  int pareto_min = 10;

  double rho_y = 0.05;  // marginal ICC target of Y
  double rho_x = 0.05;
  double rho_c = 0.50;  // compliance ICC (individual-level adherence only)
  double pi = 0.60;     // expected probability of adherence

  double lambda_w = 0.05;
  double lambda_x = 0.05;
  double beta_0 = 0.0;
  double beta_c = 0.0;
  double beta_cz = 0.4;  // true LATE
  double beta_w = 0.1;
  double beta_x = 0.1;
  double sigma2_w = 0.08;
  double sigma2_x = 0.08;

  /// Throws InvalidConfig when a field is out of range.
  void check() const;
  bool operator==(const ScenarioConfig&) const = default;
};

/// Standard scenario: J clusters sharing ~1000 individuals, effect level
/// applied to both the adherence slopes and the outcome covariate effects.
ScenarioConfig make_scenario(Adherence adherence, int n_clusters, EffectLevel effects, double rho_y,
                             double beta_cz);

/// Variance decomposition of the outcome. The covariate/compliance signal
/// contributes signal_between and signal_within; the random effects are
/// sized so that the marginal ICC is rho_y and Var(Y) = 1.
struct OutcomeVariance {
  double signal_between = 0.0;
  double signal_within = 0.0;
  double sigma2_cluster = 0.0;  // var(upsilon_j)
  double sigma2_error = 0.0;    // var(epsilon_ij)
  bool target_reachable = true;
};

double logistic_variance();  // pi^2 / 3
double random_effect_variance(const ScenarioConfig& config);  // var(zeta_j)

/// Solves E[expit(lambda0 + lambda_W W + lambda_X X + zeta)] = pi by
/// bisection with a 64-point normal quadrature; closed form when the linear
/// predictor has no random part.
double calibrate_lambda0(const ScenarioConfig& config);

OutcomeVariance outcome_variance(const ScenarioConfig& config, double lambda0);

/// Everything generate() needs that depends only on the config.
struct DgpPlan {
  ScenarioConfig config;
  double lambda0 = 0.0;
  OutcomeVariance variance;
};

DgpPlan prepare(const ScenarioConfig& config);

struct GeneratedTrial {
  TrialDataset dataset;  // validated
  std::vector<ComplianceClass> compliance;  // per record
  std::vector<int> compliers;               // n_c,j per cluster (index order)
  std::vector<double> psi;                  // n_c,j / sum n_c
  std::vector<double> psi_cl;               // (n_c,j/n_j) / sum(n_c/n_j)
  double true_population_late = 0.0;
  double true_cl_late = 0.0;
};

std::vector<int> draw_cluster_sizes(const ScenarioConfig& config, Engine& rng);

GeneratedTrial generate(const DgpPlan& plan, std::uint64_t seed);
GeneratedTrial generate(const ScenarioConfig& config, std::uint64_t seed);

/// True iff the unadjusted screening F-statistic is at least 10.
bool screen_weak_instrument(const GeneratedTrial& trial);

std::string_view to_string(Adherence v);
std::string_view to_string(SizeDistribution v);

}  // namespace cltsls
