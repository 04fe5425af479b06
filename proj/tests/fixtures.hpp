#pragma once

#include <random>
#include <string>
#include <vector>

#include "cltsls/model.hpp"
#include "oracles.hpp"

namespace fixture {

struct Cluster {
  std::string id;
  int z = 0;
  std::vector<int> d;
  std::vector<double> y;
  std::vector<std::vector<double>> x;  // per record, may be empty
  std::vector<double> w;
};

inline cltsls::TrialDataset dataset(const std::vector<Cluster>& clusters,
                                    cltsls::OutcomeKind kind = cltsls::OutcomeKind::Continuous) {
  cltsls::TrialDataset ds;
  ds.outcome_kind = kind;
  for (const auto& c : clusters) {
    for (std::size_t i = 0; i < c.y.size(); ++i) {
      ds.records.push_back({c.id, c.z, c.d[i], c.y[i], c.x.empty() ? std::vector<double>{} : c.x[i]});
    }
    ds.cluster_covariates[c.id] = c.w;
  }
  if (!clusters.empty() && !clusters.front().x.empty()) {
    for (std::size_t k = 0; k < clusters.front().x.front().size(); ++k) ds.x_names.push_back("x_" + std::to_string(k + 1));
  }
  for (std::size_t k = 0; k < (clusters.empty() ? 0 : clusters.front().w.size()); ++k) {
    ds.w_names.push_back("w_" + std::to_string(k + 1));
  }
  return cltsls::validate(std::move(ds));
}

/// Random cluster-level summaries with both arms present and a first stage
/// that is bounded away from zero.
inline cltsls::ClusterSummaries random_summaries(std::mt19937_64& rng, int j, int n_w) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_int_distribution<int> size(1, 60);
  cltsls::ClusterSummaries s;
  for (int k = 0; k < j; ++k) {
    cltsls::ClusterSummary c;
    c.cluster_id = "k" + std::to_string(1000 + k);
    c.z = k < j / 2 ? 1 : 0;
    c.n = size(rng);
    c.d_bar = c.z == 1 ? 0.4 + 0.6 * u(rng) : 0.3 * u(rng);
    c.y_bar = 0.5 * c.d_bar + nd(rng);
    for (int q = 0; q < n_w; ++q) c.w.push_back(nd(rng));
    s.clusters.push_back(c);
  }
  for (int q = 0; q < n_w; ++q) s.w_names.push_back("w_" + std::to_string(q + 1));
  return s;
}

struct Arrays {
  oracle::Vec y, d, z, n;
  oracle::Mat w;
};

inline Arrays arrays(const cltsls::ClusterSummaries& s, bool with_w) {
  Arrays a;
  for (const auto& c : s.clusters) {
    a.y.push_back(c.y_bar);
    a.d.push_back(c.d_bar);
    a.z.push_back(c.z);
    a.n.push_back(c.n);
    oracle::Vec row;
    if (with_w)
      for (double v : c.w) row.push_back(v);
    a.w.push_back(row);
  }
  if (!with_w) a.w.clear();
  return a;
}

}  // namespace fixture
