#include "cltsls/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "cltsls/error.hpp"

#if defined(CLTSLS_BUILD_AVX2)
#include "kernels_avx2.hpp"
#endif

namespace cltsls::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(CLTSLS_BUILD_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend initial_backend() {
  if (const char* env = std::getenv("CLTSLS_KERNELS"); env && std::string(env) == "scalar") {
    return Backend::Scalar;
  }
  return cpu_has_avx2() ? Backend::Avx2 : Backend::Scalar;
}

std::atomic<Backend>& current() {
  static std::atomic<Backend> backend{initial_backend()};
  return backend;
}

}  // namespace

bool backend_supported(Backend backend) {
  return backend == Backend::Scalar || cpu_has_avx2();
}

Backend active_backend() { return current().load(std::memory_order_relaxed); }

void set_backend(Backend backend) {
  if (!backend_supported(backend)) {
    fail(ErrorCode::InvalidOptions, "kernel backend " + std::string(to_string(backend)) +
                                        " is not supported on this CPU/build");
  }
  current().store(backend, std::memory_order_relaxed);
}

std::string_view to_string(Backend backend) {
  return backend == Backend::Avx2 ? "avx2" : "scalar";
}

#if defined(CLTSLS_BUILD_AVX2)
#define CLTSLS_DISPATCH(fn, ...)                                 \
  (active_backend() == Backend::Avx2 ? avx2::fn(__VA_ARGS__) \
                                     : scalar::fn(__VA_ARGS__))
#else
#define CLTSLS_DISPATCH(fn, ...) scalar::fn(__VA_ARGS__)
#endif

double sum(std::span<const double> x) { return CLTSLS_DISPATCH(sum, x); }

double dot(std::span<const double> a, std::span<const double> b) {
  return CLTSLS_DISPATCH(dot, a, b);
}

double wdot(std::span<const double> w, std::span<const double> a, std::span<const double> b) {
  return CLTSLS_DISPATCH(wdot, w, a, b);
}

double sum_sq_dev(std::span<const double> x, double center) {
  return CLTSLS_DISPATCH(sum_sq_dev, x, center);
}

}  // namespace cltsls::kernels
