#include "doctest.h"
#include "ntklab/rng.hpp"
#include "ntklab/simd.hpp"

#include <cmath>
#include <string>
#include <vector>

using namespace ntklab;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

}  // namespace

TEST_CASE("scalar and avx2 kernels are equivalent") {
  if (!simd::avx2_available()) return;  // nothing to compare on this host
  Rng rng(42);
  // lengths exercise the 8-wide main loop, the 4-wide loop, and every tail
  for (std::size_t n : {0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 31, 64, 100, 1001}) {
    std::vector<double> a = random_vec(n, rng);
    std::vector<double> b = random_vec(n, rng);
    const double tol = 1e-13 * (static_cast<double>(n) + 1.0);

    CHECK(simd::avx2::dot(a.data(), b.data(), n) ==
          doctest::Approx(simd::scalar::dot(a.data(), b.data(), n)).epsilon(tol));
    CHECK(simd::avx2::sum(a.data(), n) ==
          doctest::Approx(simd::scalar::sum(a.data(), n)).epsilon(tol));
    CHECK(simd::avx2::sum_sq(a.data(), n) ==
          doctest::Approx(simd::scalar::sum_sq(a.data(), n)).epsilon(tol));
    CHECK(simd::avx2::relu_dot(a.data(), b.data(), n) ==
          doctest::Approx(simd::scalar::relu_dot(a.data(), b.data(), n)).epsilon(tol));
    CHECK(simd::avx2::step_dot(a.data(), b.data(), n) ==
          doctest::Approx(simd::scalar::step_dot(a.data(), b.data(), n)).epsilon(tol));

    std::vector<double> y1 = b, y2 = b;
    simd::avx2::axpy(0.37, a.data(), y1.data(), n);
    simd::scalar::axpy(0.37, a.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-14));

    std::vector<double> s1 = a, s2 = a;
    simd::avx2::scale(-1.75, s1.data(), n);
    simd::scalar::scale(-1.75, s2.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(s1[i] == s2[i]);  // single multiply: exact
  }
}

TEST_CASE("relu and step kernels honor the boundary convention") {
  // a unit sitting exactly at 0 contributes nothing (subgradient fixed to 0)
  const std::vector<double> a{2.0, 3.0, 5.0};
  const std::vector<double> z{0.0, -1.0, 4.0};
  CHECK(simd::scalar::relu_dot(a.data(), z.data(), 3) == 20.0);
  CHECK(simd::scalar::step_dot(a.data(), z.data(), 3) == 5.0);
  if (simd::avx2_available()) {
    CHECK(simd::avx2::relu_dot(a.data(), z.data(), 3) == 20.0);
    CHECK(simd::avx2::step_dot(a.data(), z.data(), 3) == 5.0);
  }
}

TEST_CASE("dispatcher can be pinned to the scalar path") {
  simd::force_scalar(true);
  CHECK(std::string(simd::active_isa()) == "scalar");
  simd::force_scalar(false);
  if (simd::avx2_available()) CHECK(std::string(simd::active_isa()) == "avx2");
}
