#pragma once
// Independent reference arithmetic for the tests. Everything here is plain
// long double loops and Gauss-Jordan elimination: no Eigen, no QR, no code
// shared with the library.

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace oracle {

using Real = long double;
using Vec = std::vector<Real>;
using Mat = std::vector<Vec>;  // row-major, Mat[i][j]

inline Mat zeros(std::size_t r, std::size_t c) { return Mat(r, Vec(c, 0.0L)); }

inline Mat inverse(Mat a) {
  const std::size_t n = a.size();
  Mat inv = zeros(n, n);
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0L;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    if (std::fabs(a[piv][col]) < 1e-300L) throw std::runtime_error("oracle: singular");
    std::swap(a[piv], a[col]);
    std::swap(inv[piv], inv[col]);
    const Real d = a[col][col];
    for (std::size_t j = 0; j < n; ++j) {
      a[col][j] /= d;
      inv[col][j] /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const Real f = a[r][col];
      if (f == 0.0L) continue;
      for (std::size_t j = 0; j < n; ++j) {
        a[r][j] -= f * a[col][j];
        inv[r][j] -= f * inv[col][j];
      }
    }
  }
  return inv;
}

inline Mat mul(const Mat& a, const Mat& b) {
  Mat c = zeros(a.size(), b[0].size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < b[0].size(); ++j) c[i][j] += a[i][k] * b[k][j];
  return c;
}

struct Wls {
  Vec coef;
  Vec residuals;
  Mat bread;  // (X'WX)^-1
  Mat cov_model;
  Mat cov_robust;
};

/// Explicit normal equations: b = (X'WX)^-1 X'Wy with both covariance forms.
/// `resid_design` lets TSLS evaluate residuals against a different design.
inline Wls wls(const Mat& x, const Vec& y, const Vec& w, const Mat* resid_design = nullptr) {
  const std::size_t n = x.size(), p = x[0].size();
  Mat xtwx = zeros(p, p);
  Vec xtwy(p, 0.0L);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < p; ++a) {
      xtwy[a] += w[i] * x[i][a] * y[i];
      for (std::size_t b = 0; b < p; ++b) xtwx[a][b] += w[i] * x[i][a] * x[i][b];
    }
  Wls out;
  out.bread = inverse(xtwx);
  out.coef.assign(p, 0.0L);
  for (std::size_t a = 0; a < p; ++a)
    for (std::size_t b = 0; b < p; ++b) out.coef[a] += out.bread[a][b] * xtwy[b];

  const Mat& rx = resid_design ? *resid_design : x;
  out.residuals.resize(n);
  Real s2 = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    Real fit = 0.0L;
    for (std::size_t a = 0; a < p; ++a) fit += rx[i][a] * out.coef[a];
    out.residuals[i] = y[i] - fit;
    s2 += w[i] * out.residuals[i] * out.residuals[i];
  }
  s2 /= static_cast<Real>(n - p);
  out.cov_model = out.bread;
  for (auto& row : out.cov_model)
    for (auto& v : row) v *= s2;

  Mat meat = zeros(p, p);
  for (std::size_t i = 0; i < n; ++i) {
    const Real u = w[i] * out.residuals[i];
    for (std::size_t a = 0; a < p; ++a)
      for (std::size_t b = 0; b < p; ++b) meat[a][b] += u * u * x[i][a] * x[i][b];
  }
  out.cov_robust = mul(mul(out.bread, meat), out.bread);
  return out;
}

struct Tsls {
  Real beta_iv;
  Real se_model;
  Real se_robust;
  Vec first_stage_fitted;
};

/// Two explicit stages on cluster-level arrays. w_cov holds one row of
/// cluster covariates per cluster (may be empty rows).
inline Tsls tsls(const Vec& y, const Vec& d, const Vec& z, const Mat& w_cov, const Vec& weights) {
  const std::size_t j = y.size();
  const std::size_t q = w_cov.empty() ? 0 : w_cov[0].size();
  Mat x1 = zeros(j, 2 + q);
  for (std::size_t i = 0; i < j; ++i) {
    x1[i][0] = 1.0L;
    x1[i][1] = z[i];
    for (std::size_t k = 0; k < q; ++k) x1[i][2 + k] = w_cov[i][k];
  }
  const Wls s1 = wls(x1, d, weights);
  Vec dhat(j);
  for (std::size_t i = 0; i < j; ++i) dhat[i] = d[i] - s1.residuals[i];

  Mat x2 = x1, x2_actual = x1;
  for (std::size_t i = 0; i < j; ++i) {
    x2[i][1] = dhat[i];
    x2_actual[i][1] = d[i];
  }
  const Wls s2 = wls(x2, y, weights, &x2_actual);
  return {s2.coef[1], std::sqrt(s2.cov_model[1][1]), std::sqrt(s2.cov_robust[1][1]), dhat};
}

inline Real wald(const Vec& y, const Vec& d, const Vec& z) {
  Real y1 = 0, y0 = 0, d1 = 0, d0 = 0, n1 = 0, n0 = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (z[i] > 0.5L) {
      y1 += y[i];
      d1 += d[i];
      n1 += 1;
    } else {
      y0 += y[i];
      d0 += d[i];
      n0 += 1;
    }
  }
  return (y1 / n1 - y0 / n0) / (d1 / n1 - d0 / n0);
}

/// One-way ANOVA ICC straight from the textbook table.
inline Real anova_icc(const std::vector<Vec>& groups) {
  Real n = 0, grand = 0;
  for (const auto& g : groups) {
    for (Real v : g) grand += v;
    n += g.size();
  }
  grand /= n;
  Real ssb = 0, ssw = 0, sum_n2 = 0;
  for (const auto& g : groups) {
    Real m = 0;
    for (Real v : g) m += v;
    m /= g.size();
    ssb += g.size() * (m - grand) * (m - grand);
    for (Real v : g) ssw += (v - m) * (v - m);
    sum_n2 += static_cast<Real>(g.size()) * g.size();
  }
  const Real k = groups.size();
  const Real msb = ssb / (k - 1), msw = ssw / (n - k);
  const Real n0 = (n - sum_n2 / n) / (k - 1);
  const Real sb = std::max<Real>(0.0L, (msb - msw) / n0);
  return sb / (sb + msw);
}

/// Logistic MLE by iteratively reweighted least squares, run until the
/// coefficient change is below tol.
inline Vec logistic_irls(const Mat& x, const Vec& y, Real tol = 1e-14L) {
  const std::size_t n = x.size(), p = x[0].size();
  Vec b(p, 0.0L);
  for (int it = 0; it < 200; ++it) {
    Mat xtwx = zeros(p, p);
    Vec xtwz(p, 0.0L);
    for (std::size_t i = 0; i < n; ++i) {
      Real eta = 0;
      for (std::size_t a = 0; a < p; ++a) eta += x[i][a] * b[a];
      const Real pr = 1.0L / (1.0L + std::exp(-eta));
      const Real wt = pr * (1.0L - pr);
      const Real work = eta + (y[i] - pr) / wt;
      for (std::size_t a = 0; a < p; ++a) {
        xtwz[a] += wt * x[i][a] * work;
        for (std::size_t c = 0; c < p; ++c) xtwx[a][c] += wt * x[i][a] * x[i][c];
      }
    }
    const Mat inv = inverse(xtwx);
    Vec nb(p, 0.0L);
    Real change = 0;
    for (std::size_t a = 0; a < p; ++a) {
      for (std::size_t c = 0; c < p; ++c) nb[a] += inv[a][c] * xtwz[c];
      change = std::max(change, std::fabs(nb[a] - b[a]));
    }
    b = nb;
    if (change < tol) break;
  }
  return b;
}

inline Real expit(Real eta) { return 1.0L / (1.0L + std::exp(-eta)); }

}  // namespace oracle
