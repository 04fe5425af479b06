#pragma once

// Reduction kernels for the individual-level passes. Every kernel has a
// scalar reference version and, on x86-64 builds, an AVX2+FMA version picked
// at runtime. The two agree to rounding (summation order differs).

#include <span>
#include <string_view>

namespace cltsls::kernels {

enum class Backend { Scalar, Avx2 };

/// Backend in use. Defaults to the best one the CPU supports; the
/// CLTSLS_KERNELS=scalar environment variable forces the reference path.
Backend active_backend();
void set_backend(Backend backend);  // throws if unsupported on this CPU
bool backend_supported(Backend backend);
std::string_view to_string(Backend backend);

double sum(std::span<const double> x);
double dot(std::span<const double> a, std::span<const double> b);
/// sum_i w_i a_i b_i
double wdot(std::span<const double> w, std::span<const double> a, std::span<const double> b);
/// sum_i (x_i - center)^2
double sum_sq_dev(std::span<const double> x, double center);

namespace scalar {
double sum(std::span<const double> x);
double dot(std::span<const double> a, std::span<const double> b);
double wdot(std::span<const double> w, std::span<const double> a, std::span<const double> b);
double sum_sq_dev(std::span<const double> x, double center);
}  // namespace scalar


}  // namespace cltsls::kernels
