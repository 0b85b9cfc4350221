#include "ntklab/dynamics.hpp"

#include <cmath>
#include <stdexcept>

#include "ntklab/simd.hpp"

namespace ntklab {

namespace {

std::vector<double> mode_projections(const GramEigen& eigen, std::span<const double> y) {
  if (y.size() != eigen.n()) throw std::invalid_argument("dynamics: Y size mismatch with Gram");
  std::vector<double> proj(eigen.n());
  for (std::size_t i = 0; i < eigen.n(); ++i) {
    double s = 0.0;
    for (std::size_t r = 0; r < eigen.n(); ++r) s += eigen.vectors(r, i) * y[r];
    proj[i] = s;
  }
  return proj;
}

void check_times(std::span<const double> times) {
  for (double t : times)
    if (t < 0.0 || !std::isfinite(t)) throw std::invalid_argument("dynamics: negative time");
}

}  // namespace

DynamicsTrace solve_linearized(const GramEigen& eigen, std::span<const double> y, double eta,
                               std::span<const double> times) {
  if (eta <= 0.0) throw std::invalid_argument("dynamics: eta must be positive");
  check_times(times);
  const std::vector<double> proj = mode_projections(eigen, y);
  const std::size_t n = eigen.n();

  DynamicsTrace trace;
  trace.eta = eta;
  trace.times.assign(times.begin(), times.end());
  trace.f_t.reserve(times.size());
  trace.loss.reserve(times.size());
  for (double t : times) {
    std::vector<double> f(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double weight = (1.0 - std::exp(-eta * eigen.values[i] * t)) * proj[i];
      if (weight == 0.0) continue;
      for (std::size_t r = 0; r < n; ++r) f[r] += weight * eigen.vectors(r, i);
    }
    double loss = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double d = f[r] - y[r];
      loss += d * d;
    }
    trace.f_t.push_back(std::move(f));
    trace.loss.push_back(loss);
  }
  return trace;
}

SpectralCurve spectral_loss_curve(const GramEigen& eigen, std::span<const double> y, double eta,
                                  std::span<const double> times) {
  if (eta <= 0.0) throw std::invalid_argument("dynamics: eta must be positive");
  check_times(times);
  const std::vector<double> proj = mode_projections(eigen, y);
  const std::size_t n = eigen.n();

  SpectralCurve curve;
  curve.eta = eta;
  curve.times.assign(times.begin(), times.end());
  curve.loss.resize(times.size());
  curve.mode_terms = Matrix(times.size(), n);
  for (std::size_t ti = 0; ti < curve.times.size(); ++ti) {
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double term =
          std::exp(-2.0 * eta * eigen.values[i] * curve.times[ti]) * proj[i] * proj[i];
      curve.mode_terms(ti, i) = term;
      loss += term;
    }
    curve.loss[ti] = loss;
  }
  return curve;
}

ConditionReport condition_report(const GramEigen& eigen) {
  if (eigen.n() == 0) throw std::invalid_argument("condition_report: empty eigendecomposition");
  ConditionReport rep;
  rep.lambda_max = eigen.values.front();
  rep.lambda_min = eigen.values.back();
  if (rep.lambda_max <= 0.0)
    throw std::invalid_argument("condition_report: lambda_max is zero, kernel is degenerate");
  rep.kappa = rep.lambda_min / rep.lambda_max;
  rep.eta_bound = 2.0 / (rep.lambda_min + rep.lambda_max);
  return rep;
}

std::vector<std::vector<double>> discrete_gd_predictions(const GramEigen& eigen,
                                                         std::span<const double> y, double eta,
                                                         std::size_t steps) {
  if (eta <= 0.0) throw std::invalid_argument("dynamics: eta must be positive");
  const std::vector<double> proj = mode_projections(eigen, y);
  const std::size_t n = eigen.n();
  std::vector<std::vector<double>> preds;
  preds.reserve(steps + 1);
  std::vector<double> factor(n, 1.0);  // (1 - eta lambda_i)^t
  for (std::size_t t = 0; t <= steps; ++t) {
    std::vector<double> f(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double weight = (1.0 - factor[i]) * proj[i];
      if (weight == 0.0) continue;
      for (std::size_t r = 0; r < n; ++r) f[r] += weight * eigen.vectors(r, i);
    }
    preds.push_back(std::move(f));
    for (std::size_t i = 0; i < n; ++i) factor[i] *= 1.0 - eta * eigen.values[i];
  }
  return preds;
}

std::vector<double> discrete_gd_loss(const GramEigen& eigen, std::span<const double> y, double eta,
                                     std::size_t steps) {
  const auto preds = discrete_gd_predictions(eigen, y, eta, steps);
  std::vector<double> loss(preds.size());
  for (std::size_t t = 0; t < preds.size(); ++t) {
    double s = 0.0;
    for (std::size_t r = 0; r < y.size(); ++r) {
      const double d = preds[t][r] - y[r];
      s += d * d;
    }
    loss[t] = s;
  }
  return loss;
}

}  // namespace ntklab
