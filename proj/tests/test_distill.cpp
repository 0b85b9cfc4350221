#include "doctest.h"
#include "ntklab/distill.hpp"
#include "ntklab/linalg.hpp"
#include "ntklab/simd.hpp"

#include <cmath>

using namespace ntklab;

namespace {

Dataset two_blob_target(std::size_t n, std::uint64_t seed) {
  GaussianModelConfig cfg;
  cfg.d = 10;
  cfg.sigma = 4.0;
  cfg.n = n;
  cfg.seed = seed;
  return gen_gaussian_model(cfg);
}

SupportSet support_from(const Dataset& ds, double ridge) {
  SupportSet s;
  s.xs = ds.x;
  s.ys = ds.y;
  s.ridge = ridge;
  return s;
}

}  // namespace

TEST_CASE("kip loss vanishes when the support is the training set") {
  const Dataset target = two_blob_target(12, 1);
  const KernelSpec spec = KernelSpec::relu_l1(10);
  const SupportSet support = support_from(target, 0.0);
  CHECK(kip_loss(spec, support, target) <= 1e-10);
}

TEST_CASE("scalar kip loss matches the explicit formula") {
  const KernelSpec spec = KernelSpec::relu_l1(2);
  Matrix xs(1, 2), xt(1, 2);
  xs(0, 0) = 1.0;
  xs(0, 1) = 0.5;
  xt(0, 0) = -0.4;
  xt(0, 1) = 1.3;
  SupportSet support;
  support.xs = xs;
  support.ys = {-1.0};
  Dataset target;
  target.x = xt;
  target.y = {1.0};
  const double k_ts = ntk_eval(spec, xt.row(0), xs.row(0));
  const double k_ss = ntk_eval(spec, xs.row(0), xs.row(0));
  const double expected = std::pow(1.0 - k_ts / k_ss * (-1.0), 2.0);
  CHECK(kip_loss(spec, support, target) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("kip loss is invariant under support permutation and joint rotation") {
  const Dataset target = two_blob_target(20, 3);
  const KernelSpec spec = KernelSpec::relu_l1(10);
  SupportSet support = support_from(two_blob_target(6, 4), 1e-6);
  const double base = kip_loss(spec, support, target);

  SupportSet permuted = support;
  std::swap(permuted.ys[0], permuted.ys[5]);
  for (std::size_t c = 0; c < 10; ++c) std::swap(permuted.xs(0, c), permuted.xs(5, c));
  CHECK(kip_loss(spec, permuted, target) == doctest::Approx(base).epsilon(1e-10));

  Rng rng(5);
  const Matrix u = random_orthogonal(10, rng);
  SupportSet rotated = support;
  Dataset rotated_target = target;
  for (std::size_t i = 0; i < support.size(); ++i) {
    const std::vector<double> r = matvec(u, support.xs.row(i));
    std::copy(r.begin(), r.end(), rotated.xs.row(i).begin());
  }
  for (std::size_t i = 0; i < target.size(); ++i) {
    const std::vector<double> r = matvec(u, target.x.row(i));
    std::copy(r.begin(), r.end(), rotated_target.x.row(i).begin());
  }
  CHECK(kip_loss(spec, rotated, rotated_target) == doctest::Approx(base).epsilon(1e-8));
}

TEST_CASE("kip gradient matches finite differences") {
  const KernelSpec spec = KernelSpec::relu_l1(4);
  GaussianModelConfig cfg;
  cfg.d = 4;
  cfg.sigma = 2.0;
  cfg.n = 8;
  cfg.seed = 6;
  const Dataset target = gen_gaussian_model(cfg);
  cfg.n = 3;
  cfg.seed = 7;
  SupportSet support = support_from(gen_gaussian_model(cfg), 1e-5);
  support.learn_labels = true;

  const KipGrad grad = kip_grad(spec, support, target);
  const double h = 1e-5;
  double err = 0.0, scale = 0.0;
  for (std::size_t p = 0; p < support.xs.data.size(); ++p) {
    SupportSet sp = support, sm = support;
    sp.xs.data[p] += h;
    sm.xs.data[p] -= h;
    const double fd = (kip_loss(spec, sp, target) - kip_loss(spec, sm, target)) / (2.0 * h);
    err += (grad.d_xs.data[p] - fd) * (grad.d_xs.data[p] - fd);
    scale += fd * fd;
  }
  CHECK(std::sqrt(err) <= 1e-4 * std::sqrt(scale));
  for (std::size_t j = 0; j < support.size(); ++j) {
    SupportSet sp = support, sm = support;
    sp.ys[j] += h;
    sm.ys[j] -= h;
    const double fd = (kip_loss(spec, sp, target) - kip_loss(spec, sm, target)) / (2.0 * h);
    CHECK(grad.d_ys[j] == doctest::Approx(fd).epsilon(1e-4));
  }
}

TEST_CASE("label gradient equals the least squares form and vanishes at the optimum") {
  const KernelSpec spec = KernelSpec::relu_l1(10);
  const Dataset target = two_blob_target(15, 8);
  SupportSet support = support_from(two_blob_target(5, 9), 1e-6);

  // closed-form check of d loss / d Y_S = -2 A^T (Y_T - A Y_S), A = K_TS G^{-1}
  const KipGrad grad = kip_grad(spec, support, target);
  Matrix g(5, 5);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j)
      g(i, j) = ntk_eval(spec, support.xs.row(i), support.xs.row(j)) +
                (i == j ? support.ridge : 0.0);
  Matrix k_ts(15, 5);
  for (std::size_t i = 0; i < 15; ++i)
    for (std::size_t j = 0; j < 5; ++j)
      k_ts(i, j) = ntk_eval(spec, target.x.row(i), support.xs.row(j));
  const Matrix l = cholesky(g);
  std::vector<double> pred(15);
  const std::vector<double> alpha = cholesky_solve(l, support.ys);
  std::vector<double> residual(15);
  for (std::size_t i = 0; i < 15; ++i) residual[i] = target.y[i] - simd::dot(k_ts.row(i), alpha);
  std::vector<double> at_e(5, 0.0);
  for (std::size_t i = 0; i < 15; ++i)
    simd::axpy(residual[i], k_ts.row(i).data(), at_e.data(), 5);
  const std::vector<double> expected = cholesky_solve(l, at_e);
  for (std::size_t j = 0; j < 5; ++j)
    CHECK(grad.d_ys[j] == doctest::Approx(-2.0 * expected[j]).epsilon(1e-8));

  // at X_S = X_T, Y_S = Y_T the label gradient is exactly zero
  SupportSet perfect = support_from(target, 0.0);
  const KipGrad zero = kip_grad(spec, perfect, target);
  for (double v : zero.d_ys) CHECK(std::abs(v) <= 1e-8);
}

TEST_CASE("distill improves the loss and respects determinism") {
  const Dataset target = two_blob_target(120, 11);
  const Dataset heldout = two_blob_target(300, 12);
  const KernelSpec spec = KernelSpec::relu_l1(10);
  DistillOptions opt;
  opt.s = 4;
  opt.lr = 0.5;
  opt.iters = 60;
  opt.seed = 13;
  opt.heldout = &heldout;
  const auto [support, trace] = distill(spec, target, opt);
  CHECK(trace.loss.size() == opt.iters);
  CHECK(trace.loss[trace.best_iteration] <= trace.loss.front());
  CHECK(support.size() == 4);

  const auto [support2, trace2] = distill(spec, target, opt);
  CHECK(support.xs.data == support2.xs.data);  // same seed, same run
  CHECK(trace.loss == trace2.loss);

  DistillOptions noise = opt;
  noise.init = SupportInit::noise;
  const auto [support3, trace3] = distill(spec, target, noise);
  CHECK(support3.xs.data != support.xs.data);
  CHECK(trace3.loss[trace3.best_iteration] <= trace3.loss.front());
}

TEST_CASE("label-only distillation reaches the least squares optimum") {
  const KernelSpec spec = KernelSpec::relu_l1(4);
  GaussianModelConfig cfg;
  cfg.d = 4;
  cfg.sigma = 2.0;
  cfg.n = 12;
  cfg.seed = 21;
  const Dataset target = gen_gaussian_model(cfg);
  cfg.n = 3;
  cfg.seed = 22;
  SupportSet support = support_from(gen_gaussian_model(cfg), 1e-8);
  support.learn_inputs = false;
  support.learn_labels = true;

  // closed-form optimum of the quadratic in Y_S
  Matrix g(3, 3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      g(i, j) = ntk_eval(spec, support.xs.row(i), support.xs.row(j)) +
                (i == j ? support.ridge : 0.0);
  Matrix a(12, 3);
  {
    const Matrix l = cholesky(g);
    for (std::size_t i = 0; i < 12; ++i) {
      std::vector<double> row(3);
      for (std::size_t j = 0; j < 3; ++j)
        row[j] = ntk_eval(spec, target.x.row(i), support.xs.row(j));
      const std::vector<double> solved = cholesky_solve(l, row);
      for (std::size_t j = 0; j < 3; ++j) a(i, j) = solved[j];
    }
  }
  Matrix ata(3, 3);
  std::vector<double> aty(3, 0.0);
  for (std::size_t i = 0; i < 12; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      aty[j] += a(i, j) * target.y[i];
      for (std::size_t k2 = 0; k2 < 3; ++k2) ata(j, k2) += a(i, j) * a(i, k2);
    }
  }
  const std::vector<double> ys_star = solve_spd(ata, aty);
  double optimum = 0.0;
  for (std::size_t i = 0; i < 12; ++i) {
    double p = 0.0;
    for (std::size_t j = 0; j < 3; ++j) p += a(i, j) * ys_star[j];
    optimum += (target.y[i] - p) * (target.y[i] - p);
  }

  // gradient descent over the labels only
  double lr = 0.05;
  double loss = kip_loss(spec, support, target);
  for (int iter = 0; iter < 4000; ++iter) {
    const KipGrad grad = kip_grad(spec, support, target);
    SupportSet candidate = support;
    simd::axpy(-lr, grad.d_ys.data(), candidate.ys.data(), 3);
    const double cand_loss = kip_loss(spec, candidate, target);
    if (cand_loss > loss) {
      lr *= 0.5;
      continue;
    }
    support = candidate;
    loss = cand_loss;
  }
  CHECK(loss == doctest::Approx(optimum).epsilon(1e-6));
}

TEST_CASE("singular support gram raises instead of jittering") {
  const KernelSpec spec = KernelSpec::relu_l1(3);
  SupportSet support;
  support.xs = Matrix(2, 3);
  support.xs(0, 0) = 1.0;
  support.xs(1, 0) = 1.0;  // identical support points: singular at ridge 0
  support.ys = {1.0, -1.0};
  support.ridge = 0.0;
  Dataset target;
  target.x = Matrix(1, 3);
  target.x(0, 1) = 1.0;
  target.y = {1.0};
  CHECK_THROWS_AS(kip_loss(spec, support, target), SingularSupportGram);
}

TEST_CASE("adversarial kip reduces to plain kip at zero budget") {
  const Dataset target = two_blob_target(25, 31);
  const KernelSpec spec = KernelSpec::relu_l1(10);
  const SupportSet support = support_from(two_blob_target(4, 32), 1e-6);
  AttackConfig attack;
  attack.epsilon = 0.0;
  attack.alpha = 1.0;
  attack.steps = 3;
  const double clean = kip_loss(spec, support, target);
  CHECK(adv_kip_loss(spec, support, target, attack) == doctest::Approx(std::sqrt(clean)));
  // any found perturbation can only increase the unsquared loss
  attack.epsilon = 0.3;
  attack.alpha = 0.1;
  attack.steps = 5;
  CHECK(adv_kip_loss(spec, support, target, attack) >= std::sqrt(clean) - 1e-12);
}

TEST_CASE("adv_distill with a zero-step attack reproduces the plain trace") {
  const Dataset target = two_blob_target(60, 41);
  const KernelSpec spec = KernelSpec::relu_l1(10);
  DistillOptions opt;
  opt.s = 4;
  opt.lr = 0.5;
  opt.iters = 12;
  opt.seed = 42;
  AttackConfig attack;
  attack.epsilon = 0.2;
  attack.alpha = 0.05;
  attack.steps = 0;  // degenerate inner loop
  const auto [plain, plain_trace] = distill(spec, target, opt);
  const auto [adv, adv_trace] = adv_distill(spec, target, attack, opt);
  CHECK(adv_trace.loss.size() == opt.iters);
  CHECK(plain_trace.loss == adv_trace.loss);
  CHECK(plain.xs.data == adv.xs.data);
}
