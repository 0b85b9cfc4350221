#include "doctest.h"
#include "ntklab/dataset.hpp"
#include "ntklab/dynamics.hpp"
#include "ntklab/regression.hpp"

#include <cmath>

using namespace ntklab;

TEST_CASE("ridgeless fit interpolates the training labels") {
  const Dataset ds = gen_gaussian_model(GaussianModelConfig::with_c(6, 1.0, 25, 12));
  const KernelSpec spec = KernelSpec::relu_l1(6);
  const KernelPredictor p = fit(spec, ds, 0.0);
  const std::vector<double> preds = predict(p, ds);
  for (std::size_t i = 0; i < ds.size(); ++i)
    CHECK(std::abs(preds[i] - ds.y[i]) <= 1e-6 * inf_norm(ds.y));

  // single training point: prediction equals its label exactly up to solve
  const Dataset one = ds.subset({0}, "one");
  const KernelPredictor p1 = fit(spec, one, 0.0);
  CHECK(predict_one(p1, one.x.row(0)) == doctest::Approx(one.y[0]).epsilon(1e-12));
}

TEST_CASE("two-point system solved by hand") {
  // Gram [[2,1],[1,2]] with Y = (1,-1): alpha = (1,-1)
  Matrix k(2, 2);
  k(0, 0) = k(1, 1) = 2.0;
  k(0, 1) = k(1, 0) = 1.0;
  const std::vector<double> y{1.0, -1.0};
  const std::vector<double> alpha = solve_spd(k, y);
  CHECK(alpha[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(alpha[1] == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("prediction is linear in the labels") {
  Dataset ds = gen_gaussian_model(GaussianModelConfig::with_c(5, 0.8, 15, 4));
  const Dataset test = gen_gaussian_model(GaussianModelConfig::with_c(5, 0.8, 30, 5));
  const KernelSpec spec = KernelSpec::relu_l1(5);
  const KernelPredictor base = fit(spec, ds, 1e-3);

  Dataset scaled = ds;
  for (double& v : scaled.y) v *= -2.5;
  const KernelPredictor neg = fit(spec, scaled, 1e-3);
  const std::vector<double> p0 = predict(base, test);
  const std::vector<double> p1 = predict(neg, test);
  for (std::size_t i = 0; i < p0.size(); ++i)
    CHECK(p1[i] == doctest::Approx(-2.5 * p0[i]).epsilon(1e-10));
  // empty test set
  Dataset empty;
  empty.x = Matrix(0, 5);
  CHECK(predict(base, empty).empty());
}

TEST_CASE("training residual is nondecreasing in ridge") {
  const Dataset ds = gen_gaussian_model(GaussianModelConfig::with_c(8, 1.0, 30, 9));
  const KernelSpec spec = KernelSpec::relu_l1(8);
  double prev = -1.0;
  for (double ridge : {0.0, 1e-4, 1e-2, 1.0, 10.0}) {
    const KernelPredictor p = fit(spec, ds, ridge);
    const std::vector<double> preds = predict(p, ds);
    double res = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i)
      res += (preds[i] - ds.y[i]) * (preds[i] - ds.y[i]);
    CHECK(res >= prev - 1e-10);
    prev = res;
  }
}

TEST_CASE("rank-deficient gram is reported with its eigenvalue") {
  Matrix k(2, 2);
  k(0, 0) = k(0, 1) = k(1, 0) = k(1, 1) = 1.0;
  CHECK_THROWS_AS(solve_spd(k, std::vector<double>{1.0, -1.0}), NotPositiveDefinite);

  // positively collinear inputs make the depth-1 kernel Gram exactly
  // singular: K(x, tx) = 2 t |x|^2 / d, so the 2x2 determinant vanishes
  Matrix x(2, 3);
  x(0, 0) = 1.0;
  x(0, 1) = 2.0;
  x(0, 2) = -1.0;
  for (std::size_t j = 0; j < 3; ++j) x(1, j) = 2.0 * x(0, j);
  const Dataset collinear = Dataset::create(x, {1.0, -1.0}, "collinear", 0, "test");
  const KernelSpec spec = KernelSpec::relu_l1(3);
  CHECK_THROWS_AS(fit(spec, collinear, 0.0), RankDeficientGram);
  try {
    fit(spec, collinear, 0.0);
  } catch (const RankDeficientGram& e) {
    CHECK(std::abs(e.lambda_min) <= 1e-10);
    CHECK(std::string(e.what()).find("lambda_min") != std::string::npos);
  }
  // a positive ridge restores solvability
  const KernelPredictor p = fit(spec, collinear, 1e-3);
  CHECK(p.alpha.size() == 2);
}

TEST_CASE("accuracy counts sign matches and treats 0 as error") {
  const Dataset ds = gen_gaussian_model(GaussianModelConfig::with_c(100, 0.5, 20, 31));
  const Dataset test = gen_gaussian_model(GaussianModelConfig::with_c(100, 0.5, 2000, 32));
  const KernelSpec spec = KernelSpec::relu_l1(100);
  const KernelPredictor p = fit(spec, ds, 0.0);
  CHECK(accuracy(p, ds) == 1.0);
  const double acc = accuracy(p, test);
  CHECK(acc > 0.99);  // the one-sample-regime Gaussian model is easy at c = 0.5

  // negating the labels flips every prediction
  Dataset flipped = ds;
  for (double& v : flipped.y) v = -v;
  const KernelPredictor pf = fit(spec, flipped, 0.0);
  CHECK(accuracy(pf, test) == doctest::Approx(1.0 - acc).epsilon(1e-12));
}

TEST_CASE("predictor serialization round-trips") {
  const Dataset ds = gen_gaussian_model(GaussianModelConfig::with_c(4, 1.0, 8, 2));
  const KernelSpec spec = KernelSpec::relu_l1(4);
  const KernelPredictor p = fit(spec, ds, 1e-6);
  const KernelPredictor q = predictor_from_json(predictor_to_json(p));
  CHECK(q.alpha == p.alpha);
  CHECK(q.ridge == p.ridge);
  CHECK(q.support.x.data == p.support.x.data);
  CHECK(predict_one(q, ds.x.row(3)) == predict_one(p, ds.x.row(3)));
}

TEST_CASE("predictor equals the infinite-time linearized solution") {
  const Dataset ds = gen_gaussian_model(GaussianModelConfig::with_c(6, 1.0, 20, 14));
  const KernelSpec spec = KernelSpec::relu_l1(6);
  const KernelPredictor p = fit(spec, ds, 0.0);
  const GramEigen eigen = eigendecompose(gram(spec, ds, ds));
  const double eta = 1.0;
  const double t_inf = 1e3 / (eta * eigen.values.back());
  const DynamicsTrace trace = solve_linearized(eigen, ds.y, eta, std::vector<double>{t_inf});
  const std::vector<double> preds = predict(p, ds);
  for (std::size_t i = 0; i < ds.size(); ++i)
    CHECK(trace.f_t[0][i] == doctest::Approx(preds[i]).epsilon(1e-6));
}
