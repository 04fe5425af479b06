#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "cltsls/collapse.hpp"
#include "cltsls/error.hpp"
#include "cltsls/iv.hpp"
#include "fixtures.hpp"

using namespace cltsls;
using fixture::Cluster;

namespace {

const std::size_t kX0[] = {0};
const std::size_t kX01[] = {0, 1};

std::vector<Cluster> random_binary_clusters(std::mt19937_64& rng, int j, int n_x) {
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Cluster> out;
  for (int k = 0; k < j; ++k) {
    Cluster c;
    c.id = "g" + std::to_string(100 + k);
    c.z = k % 2;
    const int n = 5 + static_cast<int>(rng() % 20);
    for (int i = 0; i < n; ++i) {
      std::vector<double> x;
      for (int q = 0; q < n_x; ++q) x.push_back(nd(rng));
      const double eta = -0.3 + (n_x > 0 ? 0.8 * x[0] : 0.0) + (n_x > 1 ? -0.5 * x[1] : 0.0);
      c.y.push_back(u(rng) < 1.0 / (1.0 + std::exp(-eta)) ? 1.0 : 0.0);
      c.d.push_back(c.z == 1 && u(rng) < 0.7 ? 1 : 0);
      c.x.push_back(x);
    }
    out.push_back(c);
  }
  return out;
}

}  // namespace

TEST_SUITE("collapse") {
  TEST_CASE("cluster means") {
    const TrialDataset ds = fixture::dataset({{"a", 1, {1, 1, 0, 0}, {1, 0, 1, 0}, {}, {}},
                                              {"b", 0, {0, 0}, {2.0, 3.0}, {}, {}}});
    const ClusterSummaries s = cluster_means(ds);
    REQUIRE(s.size() == 2);
    CHECK(s.clusters[0].y_bar == 0.5);
    CHECK(s.clusters[0].d_bar == 0.5);
    CHECK(s.clusters[0].n == 4);
    CHECK(s.clusters[1].y_bar == 2.5);
    CHECK(s.clusters[1].d_bar == 0.0);
  }

  TEST_CASE("perfect adherence gives d_bar = z") {
    const TrialDataset ds = fixture::dataset({{"a", 1, {1, 1, 1}, {1, 0, 1}, {}, {}},
                                              {"b", 0, {0, 0}, {2.0, 3.0}, {}, {}}});
    for (const auto& c : cluster_means(ds).clusters) CHECK(c.d_bar == c.z);
  }

  TEST_CASE("means of clusters of size 3 and 5 match per-cluster summation") {
    const std::vector<double> ya = {0.25, -1.5, 3.125};
    const std::vector<double> yb = {1.0, 2.0, 0.5, -0.75, 9.0};
    // rows deliberately interleaved so the index has to regroup them
    TrialDataset raw;
    raw.records = {{"b", 0, 0, yb[0], {}}, {"a", 1, 1, ya[0], {}}, {"b", 0, 0, yb[1], {}},
                   {"a", 1, 0, ya[1], {}}, {"b", 0, 0, yb[2], {}}, {"b", 0, 0, yb[3], {}},
                   {"a", 1, 1, ya[2], {}}, {"b", 0, 0, yb[4], {}}};
    const ClusterSummaries s = cluster_means(validate(raw));
    long double sa = 0, sb = 0;
    for (double v : ya) sa += v;
    for (double v : yb) sb += v;
    CHECK(s.clusters[0].cluster_id == "a");
    CHECK(s.clusters[0].y_bar == doctest::Approx(static_cast<double>(sa / 3)).epsilon(1e-15));
    CHECK(s.clusters[0].d_bar == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(s.clusters[1].y_bar == doctest::Approx(static_cast<double>(sb / 5)).epsilon(1e-15));
  }

  TEST_CASE("adjust_continuous with X identically zero is rank deficient") {
    const TrialDataset ds = fixture::dataset({{"a", 1, {1, 1}, {1, 0}, {{0.0}, {0.0}}, {}},
                                              {"b", 0, {0, 0}, {2.0, 3.0}, {{0.0}, {0.0}}, {}}});
    try {
      adjust_continuous(ds, kX0);
      FAIL("expected RankDeficient");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::RankDeficient);
    }
  }

  TEST_CASE("adjust_continuous with an in-sample uncorrelated X only shifts the outcome") {
    // x is orthogonal to y and to the intercept, so the fitted slope is exactly zero
    const TrialDataset ds = fixture::dataset({{"a", 1, {1, 1}, {1.0, 1.0}, {{1.0}, {-1.0}}, {}},
                                              {"b", 0, {0, 0}, {2.0, 2.0}, {{1.0}, {-1.0}}, {}},
                                              {"c", 1, {0, 1}, {4.0, 4.0}, {{-1.0}, {1.0}}, {}},
                                              {"d", 0, {0, 0}, {3.0, 3.0}, {{-1.0}, {1.0}}, {}}});
    const ClusterSummaries raw = cluster_means(ds);
    const ClusterSummaries adj = adjust_continuous(ds, kX0);
    const double grand = 2.5;
    for (std::size_t j = 0; j < raw.size(); ++j) {
      CHECK(std::abs(adj.clusters[j].y_bar - (raw.clusters[j].y_bar - grand)) < 1e-12);
    }
    const AnalysisOptions o;
    CHECK(std::abs(tsls(adj, o).estimate - tsls(raw, o).estimate) < 1e-12);
  }

  TEST_CASE("adjust_continuous matches hand-solved 2x2 normal equations") {
    const std::vector<Cluster> cl = {{"a", 1, {1, 0}, {1.0, 2.5}, {{0.5}, {1.5}}, {}},
                                     {"b", 0, {0, 0, 0}, {0.2, -0.4, 1.1}, {{-1.0}, {0.0}, {2.0}}, {}},
                                     {"c", 1, {1}, {3.3}, {{2.5}}, {}}};
    const TrialDataset ds = fixture::dataset(cl);
    long double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& c : cl)
      for (std::size_t i = 0; i < c.y.size(); ++i) {
        n += 1;
        sx += c.x[i][0];
        sy += c.y[i];
        sxx += c.x[i][0] * c.x[i][0];
        sxy += c.x[i][0] * c.y[i];
      }
    const long double det = n * sxx - sx * sx;
    const long double b0 = (sxx * sy - sx * sxy) / det;
    const long double b1 = (n * sxy - sx * sy) / det;
    const ClusterSummaries adj = adjust_continuous(ds, kX0);
    for (std::size_t j = 0; j < cl.size(); ++j) {
      long double e = 0;
      for (std::size_t i = 0; i < cl[j].y.size(); ++i) e += cl[j].y[i] - b0 - b1 * cl[j].x[i][0];
      e /= cl[j].y.size();
      CHECK(std::abs(adj.clusters[j].y_bar - static_cast<double>(e)) < 1e-12);
    }
  }

  TEST_CASE("difference residuals are zero when fitted probabilities equal the outcomes") {
    const TrialDataset ds = fixture::dataset({{"a", 1, {1, 1, 0}, {1, 0, 1}, {}, {}},
                                              {"b", 0, {0, 0}, {0, 1}, {}, {}}},
                                             OutcomeKind::Binary);
    std::vector<double> fitted;
    for (const auto& r : ds.records) fitted.push_back(r.y);
    for (double e : difference_residuals(ds, fitted)) CHECK(e == 0.0);
  }

  TEST_CASE("intercept-only logistic gives zero size-weighted residual sum") {
    std::mt19937_64 rng(77);
    auto cl = random_binary_clusters(rng, 12, 1);
    TrialDataset ds = fixture::dataset(cl, OutcomeKind::Binary);
    const ClusterSummaries base = cluster_means(ds);
    // intercept model: constant probabilities, residual means e_j = y_bar_j - p
    std::vector<double> ybar;
    double total = 0, count = 0;
    for (const auto& r : ds.records) {
      total += r.y;
      count += 1;
    }
    const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(ds.records.size()), 1);
    std::vector<double> y;
    for (const auto& r : ds.records) y.push_back(r.y);
    const LogisticFit fit = fit_logistic(ones, y);
    CHECK(std::abs(fit.fitted[0] - total / count) < 1e-12);
    const std::vector<double> e = difference_residuals(ds, std::vector<double>(fit.fitted.data(), fit.fitted.data() + fit.fitted.size()));
    double weighted = 0;
    for (std::size_t j = 0; j < e.size(); ++j) weighted += base.clusters[j].n * e[j];
    CHECK(std::abs(weighted) < 1e-8);
    const ClusterSummaries via_api = adjust_binary(ds, {});
    double api_sum = 0;
    for (const auto& c : via_api.clusters) api_sum += c.n * c.y_bar;
    CHECK(std::abs(api_sum) < 1e-8);
  }

  TEST_CASE("two-covariate adjust_binary matches an independent IRLS fit") {
    std::mt19937_64 rng(99);
    auto cl = random_binary_clusters(rng, 16, 2);
    const TrialDataset ds = fixture::dataset(cl, OutcomeKind::Binary);
    oracle::Mat x;
    oracle::Vec y;
    for (const auto& r : ds.records) {
      x.push_back({1.0L, r.x[0], r.x[1]});
      y.push_back(r.y);
    }
    const oracle::Vec b = oracle::logistic_irls(x, y);
    const ClusterSummaries adj = adjust_binary(ds, kX01);
    const ClusterIndex& idx = cluster_index(ds);
    for (std::size_t k = 0; k < idx.n_clusters(); ++k) {
      long double m = 0, mhat = 0;
      for (std::size_t r = idx.offsets[k]; r < idx.offsets[k + 1]; ++r) {
        const std::size_t i = idx.order[r];
        m += y[i];
        mhat += oracle::expit(b[0] * x[i][0] + b[1] * x[i][1] + b[2] * x[i][2]);
      }
      const double e = static_cast<double>((m - mhat) / idx.size_of(k));
      CHECK(std::abs(adj.clusters[k].y_bar - e) < 1e-10);
    }
  }

  TEST_CASE("complete separation is reported") {
    Eigen::MatrixXd x(6, 2);
    x << 1, -3, 1, -2, 1, -1, 1, 1, 1, 2, 1, 3;
    const std::vector<double> y = {0, 0, 0, 1, 1, 1};
    try {
      fit_logistic(x, y);
      FAIL("expected separation");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::SeparationDetected);
    }
  }

  TEST_CASE("ANOVA ICC special cases") {
    const TrialDataset between = fixture::dataset({{"a", 1, {1, 1}, {1.0, 1.0}, {}, {}},
                                                   {"b", 0, {0, 0, 0}, {2.0, 2.0, 2.0}, {}, {}},
                                                   {"c", 0, {0}, {5.0}, {}, {}}});
    CHECK(icc_oneway_anova(between, IccVariable::Outcome).rho == 1.0);

    // balanced, cluster means identical: MSB = 0 < MSW
    const TrialDataset flat = fixture::dataset({{"a", 1, {1, 1}, {0.0, 2.0}, {}, {}},
                                                {"b", 0, {0, 0}, {2.0, 0.0}, {}, {}},
                                                {"c", 0, {0, 0}, {1.5, 0.5}, {}, {}}});
    const IccEstimate t = icc_oneway_anova(flat, IccVariable::Outcome);
    CHECK(t.rho == 0.0);
    CHECK(t.sigma2_between == 0.0);
    CHECK_FALSE(t.degenerate);

    const TrialDataset constant = fixture::dataset({{"a", 1, {1, 1}, {3.0, 3.0}, {}, {}},
                                                    {"b", 0, {0, 0}, {3.0, 3.0}, {}, {}}});
    const IccEstimate d = icc_oneway_anova(constant, IccVariable::Outcome);
    CHECK(d.degenerate);
    CHECK(d.rho == 0.0);
  }

  TEST_CASE("balanced four-cluster ANOVA table") {
    const std::vector<std::vector<double>> g = {{1, 2, 3}, {2, 4, 6}, {0, 1, 2}, {5, 5, 8}};
    std::vector<Cluster> cl;
    for (int k = 0; k < 4; ++k) cl.push_back({std::string(1, char('a' + k)), k % 2, {k % 2, k % 2, k % 2}, g[k], {}, {}});
    // by hand: means 2, 4, 1, 6; grand 3.25; SSB = 3[1.5625 + .5625 + 5.0625 + 7.5625] = 44.25
    // SSW = 2 + 8 + 2 + 6 = 18; MSB = 14.75, MSW = 2.25; sigma_b = (14.75 - 2.25)/3
    const double sb = (14.75 - 2.25) / 3.0;
    const double expected = sb / (sb + 2.25);
    const IccEstimate e = icc_oneway_anova(fixture::dataset(cl), IccVariable::Outcome);
    CHECK(std::abs(e.rho - expected) < 1e-12);
    CHECK(std::abs(e.sigma2_within - 2.25) < 1e-12);
    std::vector<oracle::Vec> og;
    for (const auto& v : g) og.emplace_back(v.begin(), v.end());
    CHECK(std::abs(e.rho - static_cast<double>(oracle::anova_icc(og))) < 1e-12);
  }

  TEST_CASE("ICC of treatment received and of unbalanced clusters match the oracle") {
    std::mt19937_64 rng(4);
    auto cl = random_binary_clusters(rng, 9, 0);
    const TrialDataset ds = fixture::dataset(cl, OutcomeKind::Binary);
    std::vector<oracle::Vec> gy, gd;
    for (const auto& c : cl) {
      gy.emplace_back(c.y.begin(), c.y.end());
      gd.emplace_back(c.d.begin(), c.d.end());
    }
    CHECK(std::abs(icc_oneway_anova(ds, IccVariable::Outcome).rho - static_cast<double>(oracle::anova_icc(gy))) < 1e-12);
    CHECK(std::abs(icc_oneway_anova(ds, IccVariable::TreatmentReceived).rho -
                   static_cast<double>(oracle::anova_icc(gd))) < 1e-12);
  }

  TEST_CASE("summaries do not depend on the row order") {
    std::mt19937_64 rng(8);
    auto cl = random_binary_clusters(rng, 10, 2);
    for (auto& c : cl) c.w = {static_cast<double>(c.id.size())};
    const TrialDataset ds = fixture::dataset(cl, OutcomeKind::Binary);
    TrialDataset shuffled = ds;
    shuffled.index.reset();
    std::shuffle(shuffled.records.begin(), shuffled.records.end(), rng);
    shuffled = validate(shuffled);
    const ClusterSummaries a = cluster_means(ds), b = cluster_means(shuffled);
    for (std::size_t j = 0; j < a.size(); ++j) {
      CHECK(a.clusters[j].cluster_id == b.clusters[j].cluster_id);
      CHECK(std::abs(a.clusters[j].y_bar - b.clusters[j].y_bar) < 1e-14);
      CHECK(a.clusters[j].w == b.clusters[j].w);
    }
    const ClusterSummaries c = adjust_binary(ds, kX01), d = adjust_binary(shuffled, kX01);
    for (std::size_t j = 0; j < c.size(); ++j) CHECK(std::abs(c.clusters[j].y_bar - d.clusters[j].y_bar) < 1e-10);
    CHECK(std::abs(c.outcome_icc->rho - d.outcome_icc->rho) < 1e-10);
  }

  TEST_CASE("covariate selection errors") {
    std::mt19937_64 rng(3);
    const TrialDataset ds = fixture::dataset(random_binary_clusters(rng, 4, 1), OutcomeKind::Binary);
    CHECK_THROWS_AS(adjust_continuous(ds, {}), Error);
    const std::size_t bad[] = {3};
    CHECK_THROWS_AS(adjust_binary(ds, bad), Error);
    CHECK_THROWS_AS(adjust_continuous(ds, bad), Error);
  }
}
