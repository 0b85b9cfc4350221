#pragma once

#include <cstddef>
#include <span>

// Data-parallel primitives behind every inner loop of the library (Gram
// assembly, Monte-Carlo kernel estimates, network forward/backward).
// Scalar reference kernels are always built; an AVX2+FMA variant is
// selected once at startup when the CPU supports it. The two paths are
// equivalence-tested (they may differ in the last few ulps because the
// vector path reassociates the sums).

namespace ntklab::simd {

// Reference kernels.
namespace scalar {
double dot(const double* a, const double* b, std::size_t n) noexcept;
double sum(const double* a, std::size_t n) noexcept;
double sum_sq(const double* a, std::size_t n) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
void scale(double alpha, double* x, std::size_t n) noexcept;
double relu_dot(const double* a, const double* z, std::size_t n) noexcept;
double step_dot(const double* a, const double* z, std::size_t n) noexcept;
}  // namespace scalar

// AVX2 kernels; callers must check avx2_available() first.
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n) noexcept;
double sum(const double* a, std::size_t n) noexcept;
double sum_sq(const double* a, std::size_t n) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
void scale(double alpha, double* x, std::size_t n) noexcept;
double relu_dot(const double* a, const double* z, std::size_t n) noexcept;
double step_dot(const double* a, const double* z, std::size_t n) noexcept;
}  // namespace avx2

bool avx2_available() noexcept;

// Name of the dispatched instruction set: "avx2" or "scalar".
const char* active_isa() noexcept;

// Pin the dispatcher to the scalar path (testing hook; also honoured when
// the environment variable NTKLAB_SIMD=scalar is set at startup).
void force_scalar(bool on) noexcept;

double dot(const double* a, const double* b, std::size_t n) noexcept;
double sum(const double* a, std::size_t n) noexcept;
double sum_sq(const double* a, std::size_t n) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
void scale(double alpha, double* x, std::size_t n) noexcept;
// sum_i a[i] * max(z[i], 0)
double relu_dot(const double* a, const double* z, std::size_t n) noexcept;
// sum_i a[i] * (z[i] > 0)
double step_dot(const double* a, const double* z, std::size_t n) noexcept;

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
  return dot(a.data(), b.data(), a.size());
}
inline double sum_sq(std::span<const double> a) noexcept { return sum_sq(a.data(), a.size()); }
inline double sum(std::span<const double> a) noexcept { return sum(a.data(), a.size()); }

}  // namespace ntklab::simd
