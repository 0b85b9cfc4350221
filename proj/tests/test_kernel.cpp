#include "doctest.h"
#include "ntklab/dataset.hpp"
#include "ntklab/kernel.hpp"
#include "ntklab/linalg.hpp"
#include "ntklab/simd.hpp"

#include <cmath>
#include <numbers>
#include <vector>

using namespace ntklab;

namespace {

std::vector<double> random_unit_scaled(std::size_t d, Rng& rng, double norm_sq) {
  std::vector<double> v(d);
  for (double& x : v) x = rng.normal();
  const double scale = std::sqrt(norm_sq / simd::sum_sq(v.data(), d));
  for (double& x : v) x *= scale;
  return v;
}

// Test-only oracle for depth > 1: empirical tangent kernel of a finite-width
// network in the same parametrization, computed by explicit backprop.
double deep_empirical_ntk(const KernelSpec& spec, std::span<const double> x,
                          std::span<const double> x2, std::size_t m, std::uint64_t seed) {
  const std::size_t L = static_cast<std::size_t>(spec.depth);
  const std::size_t d0 = spec.input_dim;
  Rng rng = Rng(seed).split(0xdeeb);
  // weights[l]: layer l+1 matrix; layer 0 is m x d0, last is 1 x m
  std::vector<Matrix> weights;
  for (std::size_t l = 0; l <= L; ++l) {
    const std::size_t rows = l == L ? 1 : m;
    const std::size_t cols = l == 0 ? d0 : m;
    Matrix w(rows, cols);
    for (double& v : w.data) v = rng.normal();
    weights.push_back(std::move(w));
  }
  const double scale_hidden = std::sqrt(spec.c_norm / static_cast<double>(m));
  const double scale_in = 1.0 / std::sqrt(static_cast<double>(d0));

  auto grad_of = [&](std::span<const double> input) {
    std::vector<std::vector<double>> pre(L + 1);
    std::vector<double> h(input.begin(), input.end());
    for (std::size_t l = 0; l <= L; ++l) {
      const double s = l == 0 ? scale_in : scale_hidden;
      pre[l] = matvec(weights[l], h);
      for (double& v : pre[l]) v *= s;
      if (l < L) {
        h.assign(pre[l].size(), 0.0);
        for (std::size_t u = 0; u < pre[l].size(); ++u) h[u] = pre[l][u] > 0.0 ? pre[l][u] : 0.0;
      }
    }
    // backward pass: delta over pre-activations
    std::vector<std::vector<double>> grads(L + 1);
    std::vector<double> delta{1.0};
    for (std::size_t li = L + 1; li-- > 0;) {
      const double s = li == 0 ? scale_in : scale_hidden;
      const std::vector<double>& input_l = [&]() -> std::vector<double> {
        if (li == 0) return std::vector<double>(input.begin(), input.end());
        std::vector<double> act(pre[li - 1].size());
        for (std::size_t u = 0; u < act.size(); ++u)
          act[u] = pre[li - 1][u] > 0.0 ? pre[li - 1][u] : 0.0;
        return act;
      }();
      Matrix& w = weights[li];
      grads[li].assign(w.rows * w.cols, 0.0);
      for (std::size_t r = 0; r < w.rows; ++r) {
        simd::axpy(delta[r] * s, input_l.data(), grads[li].data() + r * w.cols, w.cols);
      }
      if (li > 0) {
        std::vector<double> next(w.cols, 0.0);
        for (std::size_t r = 0; r < w.rows; ++r)
          simd::axpy(delta[r] * s, w.row(r).data(), next.data(), w.cols);
        for (std::size_t u = 0; u < next.size(); ++u)
          next[u] = pre[li - 1][u] > 0.0 ? next[u] : 0.0;
        delta = std::move(next);
      }
    }
    return grads;
  };

  const auto ga = grad_of(x);
  const auto gb = grad_of(x2);
  double acc = 0.0;
  for (std::size_t l = 0; l <= L; ++l)
    acc += simd::dot(ga[l].data(), gb[l].data(), ga[l].size());
  return acc;
}

}  // namespace

TEST_CASE("closed form hits the two anchor values") {
  const std::size_t d = 16;
  const KernelSpec spec = KernelSpec::relu_l1(d);
  Rng rng(101);
  const std::vector<double> x = random_unit_scaled(d, rng, static_cast<double>(d));
  // the cos(psi) clamp at 1 - 1e-12 shifts the coincident angle by
  // sqrt(2e-12), which shows up as a ~2e-7 relative offset on the diagonal
  CHECK(ntk_eval(spec, x, x) == doctest::Approx(2.0).epsilon(1e-6));

  // orthogonal pair with |x|^2 = |x'|^2 = d
  std::vector<double> a(d, 0.0), b(d, 0.0);
  a[0] = std::sqrt(static_cast<double>(d));
  b[1] = std::sqrt(static_cast<double>(d));
  CHECK(ntk_eval(spec, a, b) == doctest::Approx(1.0 / std::numbers::pi).epsilon(1e-9));
}

TEST_CASE("monte carlo oracle agrees with the closed form") {
  const std::size_t d = 8;
  const KernelSpec spec = KernelSpec::relu_l1(d);
  Rng rng(7);
  // anchors at 2% with 2e5 draws
  const std::vector<double> x = random_unit_scaled(d, rng, static_cast<double>(d));
  const McEstimate self = ntk_eval_mc(spec, x, x, 200000, 11);
  CHECK(self.mean == doctest::Approx(2.0).epsilon(0.02));
  // 3-standard-error agreement on random pairs (deterministic seeded draws)
  for (int p = 0; p < 25; ++p) {
    std::vector<double> u(d), v(d);
    for (double& c : u) c = rng.normal();
    for (double& c : v) c = rng.normal();
    const double analytic = ntk_eval(spec, u, v);
    const McEstimate mc = ntk_eval_mc(spec, u, v, 40000, 1000 + p);
    CHECK(std::abs(analytic - mc.mean) <= 3.0 * mc.std_err);
  }
  // degenerate sample count and determinism
  const McEstimate one = ntk_eval_mc(spec, x, x, 1, 5);
  CHECK(std::isfinite(one.mean));
  CHECK(one.std_err == 0.0);
  CHECK(ntk_eval_mc(spec, x, x, 1000, 5).mean == ntk_eval_mc(spec, x, x, 1000, 5).mean);
}

TEST_CASE("normalization constant is consistent with the activation") {
  // E[relu(z)^2] = 1/c for standard normal z, within 1%
  Rng rng(13);
  double acc = 0.0;
  const std::size_t n = 400000;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = rng.normal();
    acc += z > 0.0 ? z * z : 0.0;
  }
  CHECK(acc / n == doctest::Approx(1.0 / 2.0).epsilon(0.01));
}

TEST_CASE("kernel symmetry and rotation invariance") {
  const std::size_t d = 10;
  const KernelSpec spec = KernelSpec::relu_l1(d);
  Rng rng(23);
  const Matrix u_rot = random_orthogonal(d, rng);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> x(d), y(d);
    for (double& c : x) c = rng.normal();
    for (double& c : y) c = rng.normal();
    CHECK(ntk_eval(spec, x, y) == doctest::Approx(ntk_eval(spec, y, x)).epsilon(1e-14));
    const std::vector<double> ux = matvec(u_rot, x);
    const std::vector<double> uy = matvec(u_rot, y);
    CHECK(std::abs(ntk_eval(spec, ux, uy) - ntk_eval(spec, x, y)) <= 1e-10);
  }
}

TEST_CASE("kernel input validation") {
  const KernelSpec spec = KernelSpec::relu_l1(4);
  const std::vector<double> x{1.0, 0.0, 0.0, 0.0};
  const std::vector<double> short_x{1.0, 0.0};
  CHECK_THROWS_AS(ntk_eval(spec, x, short_x), std::invalid_argument);
  const std::vector<double> zero(4, 0.0);
  CHECK_THROWS_AS(ntk_eval(spec, x, zero), std::domain_error);
  KernelSpec bad = spec;
  bad.depth = 0;
  CHECK_THROWS_AS(ntk_eval(bad, x, x), std::invalid_argument);
}

TEST_CASE("gram is symmetric positive semidefinite") {
  const GaussianModelConfig cfg = GaussianModelConfig::with_c(6, 1.0, 200, 3);
  const Dataset ds = gen_gaussian_model(cfg);
  const KernelSpec spec = KernelSpec::relu_l1(6);
  const Matrix k = gram(spec, ds, ds);
  for (std::size_t i = 0; i < k.rows; ++i)
    for (std::size_t j = 0; j < i; ++j) CHECK(k(i, j) == k(j, i));  // exact by mirroring
  const GramEigen eig = eigendecompose(k);
  CHECK(eig.values.back() >= -1e-8 * eig.values.front());

  // 1x1 gram equals the pointwise kernel, and gram(A,B) = gram(B,A)^T
  const Dataset one = ds.subset({0}, "one");
  const Matrix k1 = gram(spec, one, one);
  CHECK(k1(0, 0) == doctest::Approx(ntk_eval(spec, ds.x.row(0), ds.x.row(0))).epsilon(1e-14));
  const Dataset a = ds.subset({0, 1, 2}, "a");
  const Dataset b = ds.subset({3, 4}, "b");
  const Matrix kab = gram(spec, a, b);
  const Matrix kba = gram(spec, b, a);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) CHECK(kab(i, j) == doctest::Approx(kba(j, i)).epsilon(1e-14));
}

TEST_CASE("analytic gradient matches central finite differences") {
  for (int depth : {1, 2, 3}) {
    KernelSpec spec = KernelSpec::relu_l1(6);
    spec.depth = depth;
    Rng rng(300 + depth);
    const double h = 1e-5;
    for (int rep = 0; rep < (depth == 1 ? 100 : 25); ++rep) {
      std::vector<double> x(6), y(6);
      for (double& c : x) c = rng.normal();
      for (double& c : y) c = rng.normal();
      const std::vector<double> g = ntk_grad_x(spec, x, y);
      double err_sq = 0.0, norm_sq = 0.0;
      for (std::size_t j = 0; j < 6; ++j) {
        std::vector<double> xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        const double fd = (ntk_eval(spec, xp, y) - ntk_eval(spec, xm, y)) / (2.0 * h);
        err_sq += (g[j] - fd) * (g[j] - fd);
        norm_sq += fd * fd;
      }
      CHECK(std::sqrt(err_sq) <= 1e-4 * std::max(std::sqrt(norm_sq), 1e-8));
    }
  }
}

TEST_CASE("coincident-point total derivative matches finite differences") {
  const KernelSpec spec = KernelSpec::relu_l1(5);
  Rng rng(55);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> x(5), v(5);
    for (double& c : x) c = rng.normal();
    for (double& c : v) c = rng.normal();
    const std::vector<double> g = ntk_grad_diag(spec, x);
    const double dir = simd::dot(g.data(), v.data(), 5);
    const double h = 1e-6;
    std::vector<double> xp = x, xm = x;
    simd::axpy(h, v.data(), xp.data(), 5);
    simd::axpy(-h, v.data(), xm.data(), 5);
    const double fd = (ntk_eval(spec, xp, xp) - ntk_eval(spec, xm, xm)) / (2.0 * h);
    CHECK(dir == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("gradient swap symmetry") {
  const KernelSpec spec = KernelSpec::relu_l1(4);
  Rng rng(77);
  std::vector<double> x(4), y(4);
  for (double& c : x) c = rng.normal();
  for (double& c : y) c = rng.normal();
  // gradient w.r.t. the second slot equals the first-slot gradient at
  // swapped arguments
  const std::vector<double> g_swap = ntk_grad_x(spec, y, x);
  const double h = 1e-6;
  for (std::size_t j = 0; j < 4; ++j) {
    std::vector<double> yp = y, ym = y;
    yp[j] += h;
    ym[j] -= h;
    const double fd = (ntk_eval(spec, x, yp) - ntk_eval(spec, x, ym)) / (2.0 * h);
    CHECK(g_swap[j] == doctest::Approx(fd).epsilon(1e-4));
  }
}

TEST_CASE("eigendecompose on known and random matrices") {
  const GramEigen id = eigendecompose(Matrix::identity(4));
  for (double v : id.values) CHECK(v == doctest::Approx(1.0));

  Matrix d31(2, 2);
  d31(0, 0) = 3.0;
  d31(1, 1) = 1.0;
  const GramEigen diag = eigendecompose(d31);
  CHECK(diag.values[0] == doctest::Approx(3.0));
  CHECK(diag.values[1] == doctest::Approx(1.0));

  const Dataset ds = gen_gaussian_model(GaussianModelConfig::with_c(4, 1.0, 5, 21));
  const Matrix k = gram(KernelSpec::relu_l1(4), ds, ds);
  const GramEigen eig = eigendecompose(k);
  double err = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      double s = 0.0;
      for (std::size_t m = 0; m < 5; ++m)
        s += eig.vectors(i, m) * eig.values[m] * eig.vectors(j, m);
      err += (s - k(i, j)) * (s - k(i, j));
      scale += k(i, j) * k(i, j);
    }
  }
  CHECK(std::sqrt(err / scale) <= 1e-8);

  Matrix asym(2, 2);
  asym(0, 0) = 1.0;
  asym(0, 1) = 0.5;
  asym(1, 0) = 0.6;
  asym(1, 1) = 1.0;
  CHECK_THROWS_AS(eigendecompose(asym), std::invalid_argument);
}

TEST_CASE("deep recursion tracks the finite-width empirical kernel") {
  // the depth > 1 closed form is an extension; its only reference is the
  // finite-width kernel of the matching architecture at large width
  for (int depth : {2, 3}) {
    KernelSpec spec = KernelSpec::relu_l1(6);
    spec.depth = depth;
    Rng rng(900 + depth);
    for (int rep = 0; rep < 3; ++rep) {
      std::vector<double> x(6), y(6);
      for (double& c : x) c = rng.normal();
      for (double& c : y) c = rng.normal();
      const double analytic = ntk_eval(spec, x, y);
      // average a few finite nets to shrink the width fluctuation
      double emp = 0.0;
      const int nets = 10;
      for (int net = 0; net < nets; ++net)
        emp += deep_empirical_ntk(spec, x, y, 3072, 40 + static_cast<std::uint64_t>(net));
      emp /= nets;
      const double self = ntk_eval(spec, x, x);
      CHECK(std::abs(analytic - emp) <= 0.08 * std::max(std::abs(analytic), 0.2 * self));
    }
  }
}
