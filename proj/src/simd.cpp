#include "ntklab/simd.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace ntklab::simd {

namespace scalar {

double dot(const double* a, const double* b, std::size_t n) noexcept {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum(const double* a, std::size_t n) noexcept {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i];
  return acc;
}

double sum_sq(const double* a, std::size_t n) noexcept {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * a[i];
  return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale(double alpha, double* x, std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

double relu_dot(const double* a, const double* z, std::size_t n) noexcept {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * (z[i] > 0.0 ? z[i] : 0.0);
  return acc;
}

double step_dot(const double* a, const double* z, std::size_t n) noexcept {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += z[i] > 0.0 ? a[i] : 0.0;
  return acc;
}

}  // namespace scalar

namespace {

struct Dispatch {
  double (*dot)(const double*, const double*, std::size_t) noexcept;
  double (*sum)(const double*, std::size_t) noexcept;
  double (*sum_sq)(const double*, std::size_t) noexcept;
  void (*axpy)(double, const double*, double*, std::size_t) noexcept;
  void (*scale)(double, double*, std::size_t) noexcept;
  double (*relu_dot)(const double*, const double*, std::size_t) noexcept;
  double (*step_dot)(const double*, const double*, std::size_t) noexcept;
  const char* name;
};

constexpr Dispatch kScalar = {scalar::dot,   scalar::sum,      scalar::sum_sq,
                              scalar::axpy,  scalar::scale,    scalar::relu_dot,
                              scalar::step_dot, "scalar"};

constexpr Dispatch kAvx2 = {avx2::dot,   avx2::sum,      avx2::sum_sq,
                            avx2::axpy,  avx2::scale,    avx2::relu_dot,
                            avx2::step_dot, "avx2"};

bool env_forces_scalar() {
  const char* v = std::getenv("NTKLAB_SIMD");
  return v != nullptr && std::strcmp(v, "scalar") == 0;
}

std::atomic<const Dispatch*> g_active{nullptr};

const Dispatch* select() noexcept {
  const Dispatch* d = g_active.load(std::memory_order_acquire);
  if (d) return d;
  d = (avx2_available() && !env_forces_scalar()) ? &kAvx2 : &kScalar;
  g_active.store(d, std::memory_order_release);
  return d;
}

}  // namespace

bool avx2_available() noexcept {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const char* active_isa() noexcept { return select()->name; }

void force_scalar(bool on) noexcept {
  g_active.store(on ? &kScalar : nullptr, std::memory_order_release);
}

double dot(const double* a, const double* b, std::size_t n) noexcept {
  return select()->dot(a, b, n);
}
double sum(const double* a, std::size_t n) noexcept { return select()->sum(a, n); }
double sum_sq(const double* a, std::size_t n) noexcept { return select()->sum_sq(a, n); }
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept {
  select()->axpy(alpha, x, y, n);
}
void scale(double alpha, double* x, std::size_t n) noexcept { select()->scale(alpha, x, n); }
double relu_dot(const double* a, const double* z, std::size_t n) noexcept {
  return select()->relu_dot(a, z, n);
}
double step_dot(const double* a, const double* z, std::size_t n) noexcept {
  return select()->step_dot(a, z, n);
}

}  // namespace ntklab::simd
