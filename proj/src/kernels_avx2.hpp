#pragma once

#include <span>

namespace cltsls::kernels::avx2 {
double sum(std::span<const double> x);
double dot(std::span<const double> a, std::span<const double> b);
double wdot(std::span<const double> w, std::span<const double> a, std::span<const double> b);
double sum_sq_dev(std::span<const double> x, double center);
}  // namespace cltsls::kernels::avx2
