#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "ntklab/dataset.hpp"
#include "ntklab/kernel.hpp"

namespace ntklab {

// Kernel ridge regression predictor: f(x) = K(x, X)^T alpha with
// (K(X, X) + ridge I) alpha = Y. With ridge = 0 this is the infinite-time
// linearized predictor and interpolates the training labels.
struct KernelPredictor {
  KernelSpec spec;
  Dataset support;
  std::vector<double> alpha;
  double ridge = 0.0;
};

struct RankDeficientGram : std::runtime_error {
  double lambda_min;
  explicit RankDeficientGram(double lmin);
};

// Solves the regularized system by Cholesky; at ridge = 0 a factorization
// failure is rediagnosed through the eigenvalues and reported as
// RankDeficientGram naming lambda_min (no jitter is ever added silently).
// The fitted coefficients must satisfy |(K + ridge I) alpha - Y|_inf <=
// 1e-6 |Y|_inf or fit throws.
KernelPredictor fit(const KernelSpec& spec, const Dataset& train, double ridge);

double predict_one(const KernelPredictor& p, std::span<const double> x);
std::vector<double> predict(const KernelPredictor& p, const Dataset& test);

// grad_x f(x) = sum_j alpha_j grad_x K(x, x_j)
std::vector<double> predict_grad(const KernelPredictor& p, std::span<const double> x);

// Fraction of test points with sign(prediction) == label; sign(0) counts as
// an error. Requires +-1 labels.
double accuracy(const KernelPredictor& p, const Dataset& test);

nlohmann::json predictor_to_json(const KernelPredictor& p);
KernelPredictor predictor_from_json(const nlohmann::json& j);

}  // namespace ntklab
