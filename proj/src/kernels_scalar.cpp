#include "cltsls/kernels.hpp"

#include <cstddef>

namespace cltsls::kernels::scalar {

double sum(std::span<const double> x) {
  double acc = 0.0;
  for (double v : x) acc += v;
  return acc;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double wdot(std::span<const double> w, std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) acc += w[i] * a[i] * b[i];
  return acc;
}

double sum_sq_dev(std::span<const double> x, double center) {
  double acc = 0.0;
  for (double v : x) {
    const double d = v - center;
    acc += d * d;
  }
  return acc;
}

}  // namespace cltsls::kernels::scalar
