#include "ntklab/regression.hpp"

#include <cmath>
#include <stdexcept>

#include "ntklab/parallel.hpp"
#include "ntklab/simd.hpp"

namespace ntklab {

RankDeficientGram::RankDeficientGram(double lmin)
    : std::runtime_error("fit: Gram matrix is rank deficient at ridge = 0 (lambda_min = " +
                         std::to_string(lmin) + "); choose a positive ridge"),
      lambda_min(lmin) {}

KernelPredictor fit(const KernelSpec& spec, const Dataset& train, double ridge) {
  if (ridge < 0.0) throw std::invalid_argument("fit: ridge must be >= 0");
  Matrix k = gram(spec, train, train);
  const Matrix gram_only = k;
  for (std::size_t i = 0; i < k.rows; ++i) k(i, i) += ridge;

  auto rank_deficiency = [&]() -> RankDeficientGram {
    return RankDeficientGram(eigendecompose(gram_only).values.back());
  };

  std::vector<double> alpha;
  try {
    alpha = solve_spd(k, train.y);
  } catch (const NotPositiveDefinite&) {
    if (ridge == 0.0) throw rank_deficiency();
    throw;
  }

  const std::vector<double> fitted = matvec(k, alpha);
  double residual = 0.0;
  for (std::size_t i = 0; i < fitted.size(); ++i)
    residual = std::max(residual, std::abs(fitted[i] - train.y[i]));
  const double y_scale = inf_norm(train.y);
  if (residual > 1e-6 * std::max(y_scale, 1e-300)) {
    // a near-singular Gram can slip through Cholesky on rounding alone
    if (ridge == 0.0) throw rank_deficiency();
    throw std::runtime_error("fit: solver residual " + std::to_string(residual) +
                             " exceeds 1e-6 * |Y|_inf; Gram too ill-conditioned at this ridge");
  }

  KernelPredictor p;
  p.spec = spec;
  p.support = train;
  p.alpha = std::move(alpha);
  p.ridge = ridge;
  return p;
}

double predict_one(const KernelPredictor& p, std::span<const double> x) {
  double acc = 0.0;
  for (std::size_t j = 0; j < p.support.size(); ++j) {
    acc += p.alpha[j] * ntk_eval(p.spec, x, p.support.x.row(j));
  }
  return acc;
}

std::vector<double> predict(const KernelPredictor& p, const Dataset& test) {
  if (test.dim() != p.support.dim()) throw std::invalid_argument("predict: dimension mismatch");
  std::vector<double> out(test.size());
  parallel_for(test.size(), [&](std::size_t i0, std::size_t i1) {
    for (std::size_t i = i0; i < i1; ++i) out[i] = predict_one(p, test.x.row(i));
  });
  return out;
}

std::vector<double> predict_grad(const KernelPredictor& p, std::span<const double> x) {
  std::vector<double> g(x.size(), 0.0);
  for (std::size_t j = 0; j < p.support.size(); ++j) {
    const std::vector<double> gj = ntk_grad_x(p.spec, x, p.support.x.row(j));
    simd::axpy(p.alpha[j], gj.data(), g.data(), g.size());
  }
  return g;
}

double accuracy(const KernelPredictor& p, const Dataset& test) {
  test.require_classification_labels();
  const std::vector<double> pred = predict(p, test);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double s = pred[i] > 0.0 ? 1.0 : (pred[i] < 0.0 ? -1.0 : 0.0);
    if (s == test.y[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

nlohmann::json predictor_to_json(const KernelPredictor& p) {
  nlohmann::json support{{"name", p.support.name},
                         {"seed", p.support.seed},
                         {"generator", p.support.generator},
                         {"n", p.support.size()},
                         {"d", p.support.dim()},
                         {"x", p.support.x.data},
                         {"y", p.support.y}};
  return nlohmann::json{{"spec",
                         {{"depth", p.spec.depth},
                          {"activation", "relu"},
                          {"c_norm", p.spec.c_norm},
                          {"input_dim", p.spec.input_dim}}},
                        {"ridge", p.ridge},
                        {"alpha", p.alpha},
                        {"support", support}};
}

KernelPredictor predictor_from_json(const nlohmann::json& j) {
  KernelPredictor p;
  p.spec.depth = j.at("spec").at("depth").get<int>();
  if (j.at("spec").at("activation").get<std::string>() != "relu")
    throw std::invalid_argument("predictor_from_json: unsupported activation");
  p.spec.c_norm = j.at("spec").at("c_norm").get<double>();
  p.spec.input_dim = j.at("spec").at("input_dim").get<std::size_t>();
  const auto& s = j.at("support");
  Matrix x(s.at("n").get<std::size_t>(), s.at("d").get<std::size_t>());
  x.data = s.at("x").get<std::vector<double>>();
  if (x.data.size() != x.rows * x.cols)
    throw std::invalid_argument("predictor_from_json: support matrix size mismatch");
  p.support = Dataset::create(std::move(x), s.at("y").get<std::vector<double>>(),
                              s.at("name").get<std::string>(), s.at("seed").get<std::uint64_t>(),
                              s.at("generator").get<std::string>());
  p.ridge = j.at("ridge").get<double>();
  p.alpha = j.at("alpha").get<std::vector<double>>();
  if (p.alpha.size() != p.support.size())
    throw std::invalid_argument("predictor_from_json: alpha size mismatch");
  return p;
}

}  // namespace ntklab
