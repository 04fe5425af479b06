#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>
#include <string>

#include "cltsls/error.hpp"
#include "cltsls/wls.hpp"

namespace cltsls {

double critical_value(double df, double level) {
  const double upper = 0.5 + 0.5 * level;
  if (std::isinf(df)) return boost::math::quantile(boost::math::normal_distribution<double>(), upper);
  return boost::math::quantile(boost::math::students_t_distribution<double>(df), upper);
}

Inference inference(double coef, double se, DfMode df_mode, int n_clusters, int n_params,
                    double level) {
  if (!(se >= 0.0)) fail(ErrorCode::InvalidOptions, "standard error must be non-negative");
  if (!(level > 0.0 && level < 1.0)) fail(ErrorCode::InvalidOptions, "confidence level must be in (0,1)");

  Inference out;
  if (df_mode == DfMode::SmallSample) {
    if (n_clusters <= n_params) {
      fail(ErrorCode::DfNonPositive, "J - p = " + std::to_string(n_clusters - n_params) + " <= 0");
    }
    out.df = static_cast<double>(n_clusters - n_params);
  } else {
    out.df = std::numeric_limits<double>::infinity();
  }
  out.critical_value = critical_value(out.df, level);
  out.ci_low = coef - out.critical_value * se;
  out.ci_high = coef + out.critical_value * se;

  if (se == 0.0) {
    out.p = coef == 0.0 ? 1.0 : 0.0;
    return out;
  }
  const double t = std::abs(coef / se);
  if (std::isinf(out.df)) {
    out.p = 2.0 * boost::math::cdf(boost::math::complement(boost::math::normal_distribution<double>(), t));
  } else {
    out.p = 2.0 * boost::math::cdf(boost::math::complement(boost::math::students_t_distribution<double>(out.df), t));
  }
  out.p = std::min(1.0, out.p);
  return out;
}

}  // namespace cltsls
