#include <doctest.h>

#include <cmath>
#include <random>

#include "cltsls/error.hpp"
#include "cltsls/wls.hpp"
#include "oracles.hpp"

using namespace cltsls;

namespace {

oracle::Mat to_mat(const Eigen::MatrixXd& m) {
  oracle::Mat out = oracle::zeros(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
  return out;
}

oracle::Vec to_vec(const Eigen::VectorXd& v) { return oracle::Vec(v.data(), v.data() + v.size()); }

ErrorCode code_of(const auto& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::ParseError;
}

}  // namespace

TEST_SUITE("wls") {
  TEST_CASE("exact linear response has zero residuals and zero model covariance") {
    Eigen::MatrixXd x(5, 2);
    x << 1, 0, 1, 1, 1, 2, 1, 3, 1, 4;
    const Eigen::VectorXd y = 2.0 + 0.5 * x.col(1).array();
    const DesignFit fit = fit_wls(x, y, Eigen::VectorXd::Ones(5));
    CHECK(fit.coefficients[0] == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(fit.coefficients[1] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(fit.residuals.cwiseAbs().maxCoeff() < 1e-14);
    CHECK(fit.cov_model.cwiseAbs().maxCoeff() < 1e-28);
  }

  TEST_CASE("five-point simple regression matches the closed-form 2x2 inverse") {
    const double xs[] = {1.0, 2.0, 4.0, 5.0, 8.0};
    const double ys[] = {1.1, 2.3, 2.9, 4.8, 7.7};
    Eigen::MatrixXd x(5, 2);
    Eigen::VectorXd y(5);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < 5; ++i) {
      x(i, 0) = 1;
      x(i, 1) = xs[i];
      y[i] = ys[i];
      sx += xs[i];
      sy += ys[i];
      sxx += xs[i] * xs[i];
      sxy += xs[i] * ys[i];
    }
    const double det = 5 * sxx - sx * sx;
    const double b0 = (sxx * sy - sx * sxy) / det;
    const double b1 = (5 * sxy - sx * sy) / det;
    const DesignFit fit = fit_wls(x, y, Eigen::VectorXd::Ones(5));
    CHECK(std::abs(fit.coefficients[0] - b0) < 1e-12);
    CHECK(std::abs(fit.coefficients[1] - b1) < 1e-12);
  }

  TEST_CASE("random instances match explicit normal equations and sandwich") {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::uniform_real_distribution<double> uw(0.2, 5.0);
    std::uniform_int_distribution<int> dim(1, 4);
    for (int rep = 0; rep < 200; ++rep) {
      const int p = dim(rng);
      const int n = p + 2 + static_cast<int>(rng() % 30);
      Eigen::MatrixXd x(n, p);
      Eigen::VectorXd y(n), w(n);
      for (int i = 0; i < n; ++i) {
        x(i, 0) = 1.0;
        for (int k = 1; k < p; ++k) x(i, k) = nd(rng);
        y[i] = nd(rng) + (p > 1 ? x(i, 1) : 0.0);
        w[i] = uw(rng);
      }
      const DesignFit fit = fit_wls(x, y, w);
      const oracle::Wls ref = oracle::wls(to_mat(x), to_vec(y), to_vec(w));
      for (int a = 0; a < p; ++a) {
        CHECK(std::abs(fit.coefficients[a] - static_cast<double>(ref.coef[a])) < 1e-10);
        for (int b = 0; b < p; ++b) {
          CHECK(std::abs(fit.cov_model(a, b) - static_cast<double>(ref.cov_model[a][b])) < 1e-10);
          CHECK(std::abs(fit.cov_robust(a, b) - static_cast<double>(ref.cov_robust[a][b])) < 1e-10);
        }
      }
    }
  }

  TEST_CASE("scaling all weights leaves coefficients and both covariances unchanged") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd(0.0, 1.0);
    Eigen::MatrixXd x(12, 3);
    Eigen::VectorXd y(12), w(12);
    for (int i = 0; i < 12; ++i) {
      x(i, 0) = 1;
      x(i, 1) = nd(rng);
      x(i, 2) = nd(rng);
      y[i] = nd(rng);
      w[i] = 1.0 + (i % 4);
    }
    const DesignFit a = fit_wls(x, y, w);
    const DesignFit b = fit_wls(x, y, 7.5 * w);
    CHECK((a.coefficients - b.coefficients).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((a.cov_model - b.cov_model).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((a.cov_robust - b.cov_robust).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("design errors") {
    Eigen::MatrixXd x(4, 2);
    x << 1, 2, 1, 2, 1, 2, 1, 2;
    const Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(4, 0, 1);
    CHECK(code_of([&] { fit_wls(x, y, Eigen::VectorXd::Ones(4)); }) == ErrorCode::RankDeficient);
    Eigen::MatrixXd ok(4, 2);
    ok << 1, 0, 1, 1, 1, 2, 1, 3;
    Eigen::VectorXd w = Eigen::VectorXd::Ones(4);
    w[2] = 0.0;
    CHECK(code_of([&] { fit_wls(ok, y, w); }) == ErrorCode::NonPositiveWeight);
    CHECK(code_of([&] { fit_wls(ok.topRows(2), y.head(2), w.head(2)); }) == ErrorCode::InsufficientObservations);
  }

  TEST_CASE("minimum-variance weights") {
    for (int n = 1; n <= 10000; ++n) {
      const int sizes[] = {n};
      REQUIRE(mv_weights(sizes, 0.0)[0] == static_cast<double>(n));
      REQUIRE(mv_weights(sizes, 1.0)[0] == 1.0);
    }
    const int twenty[] = {20};
    CHECK(mv_weights(twenty, 0.05)[0] == doctest::Approx(20.0 / 1.95).epsilon(1e-15));
    CHECK(mv_weights(twenty, 0.05)[0] == doctest::Approx(10.2564).epsilon(1e-5));
  }

  TEST_CASE("inference limits and t widening") {
    const Inference zero = inference(0.3, 0.0, DfMode::NormalApprox, 20, 2);
    CHECK(zero.ci_low == 0.3);
    CHECK(zero.ci_high == 0.3);
    CHECK(zero.p == 0.0);
    CHECK(inference(0.0, 0.0, DfMode::NormalApprox, 20, 2).p == 1.0);

    const Inference z = inference(0.2, 0.1, DfMode::NormalApprox, 10, 2);
    const Inference t = inference(0.2, 0.1, DfMode::SmallSample, 10, 2);
    CHECK(t.df == 8.0);
    CHECK(std::isinf(z.df));
    CHECK(t.ci_low < z.ci_low);
    CHECK(t.ci_high > z.ci_high);
    CHECK(t.p > z.p);
    CHECK(z.critical_value == doctest::Approx(1.959963984540054).epsilon(1e-14));
    CHECK(t.critical_value == doctest::Approx(2.306004135204166).epsilon(1e-12));
    CHECK(z.p == doctest::Approx(0.04550026389635842).epsilon(1e-10));
    CHECK_THROWS_AS(inference(0.2, 0.1, DfMode::SmallSample, 2, 2), Error);
  }

  TEST_CASE("published normal and t(114) intervals") {
    // estimate 0.149 with normal CI (-0.006, 0.305); the t(114) CI widens to about (-0.009, 0.308)
    const double se = (0.305 - (-0.006)) / (2.0 * critical_value(INFINITY));
    const Inference z = inference(0.149, se, DfMode::NormalApprox, 116, 2);
    const Inference t = inference(0.149, se, DfMode::SmallSample, 116, 2);
    CHECK(t.df == 114.0);
    CHECK(z.ci_low == doctest::Approx(-0.0065).epsilon(1e-9));
    CHECK(t.ci_low < z.ci_low);
    CHECK(t.ci_high > z.ci_high);
    CHECK(std::abs(t.ci_low - (-0.009)) < 0.0025);
    CHECK(std::abs(t.ci_high - 0.308) < 0.0025);
  }
}
