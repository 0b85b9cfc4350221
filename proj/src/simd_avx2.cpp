// AVX2+FMA variants of the reference kernels. This translation unit is the
// only one compiled with -mavx2 -mfma; the dispatcher guards execution so
// the rest of the library stays runnable on any x86-64.

#include "ntklab/simd.hpp"

#if defined(__AVX2__)
#include <immintrin.h>
#endif

namespace ntklab::simd::avx2 {

#if defined(__AVX2__)

namespace {
inline double hsum(__m256d v) noexcept {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}
}  // namespace

double dot(const double* a, const double* b, std::size_t n) noexcept {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum(const double* a, std::size_t n) noexcept {
  __m256d acc0 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(a + i));
  double acc = hsum(acc0);
  for (; i < n; ++i) acc += a[i];
  return acc;
}

double sum_sq(const double* a, std::size_t n) noexcept {
  __m256d acc0 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v = _mm256_loadu_pd(a + i);
    acc0 = _mm256_fmadd_pd(v, v, acc0);
  }
  double acc = hsum(acc0);
  for (; i < n; ++i) acc += a[i] * a[i];
  return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale(double alpha, double* x, std::size_t n) noexcept {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) x[i] *= alpha;
}

double relu_dot(const double* a, const double* z, std::size_t n) noexcept {
  const __m256d zero = _mm256_setzero_pd();
  __m256d acc0 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vz = _mm256_max_pd(_mm256_loadu_pd(z + i), zero);
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), vz, acc0);
  }
  double acc = hsum(acc0);
  for (; i < n; ++i) acc += a[i] * (z[i] > 0.0 ? z[i] : 0.0);
  return acc;
}

double step_dot(const double* a, const double* z, std::size_t n) noexcept {
  const __m256d zero = _mm256_setzero_pd();
  __m256d acc0 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(z + i), zero, _CMP_GT_OQ);
    acc0 = _mm256_add_pd(acc0, _mm256_and_pd(mask, _mm256_loadu_pd(a + i)));
  }
  double acc = hsum(acc0);
  for (; i < n; ++i) acc += z[i] > 0.0 ? a[i] : 0.0;
  return acc;
}

#else  // !__AVX2__: never dispatched to, but keep the symbols defined.

double dot(const double* a, const double* b, std::size_t n) noexcept {
  return scalar::dot(a, b, n);
}
double sum(const double* a, std::size_t n) noexcept { return scalar::sum(a, n); }
double sum_sq(const double* a, std::size_t n) noexcept { return scalar::sum_sq(a, n); }
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept {
  scalar::axpy(alpha, x, y, n);
}
void scale(double alpha, double* x, std::size_t n) noexcept { scalar::scale(alpha, x, n); }
double relu_dot(const double* a, const double* z, std::size_t n) noexcept {
  return scalar::relu_dot(a, z, n);
}
double step_dot(const double* a, const double* z, std::size_t n) noexcept {
  return scalar::step_dot(a, z, n);
}

#endif

}  // namespace ntklab::simd::avx2
