#pragma once

#include <span>
#include <vector>

#include "ntklab/kernel.hpp"
#include "ntklab/matrix.hpp"

namespace ntklab {

// Exact gradient-flow solution on the training set, resolved per eigenmode:
// f_t = sum_i (1 - exp(-eta lambda_i t)) (V_i . Y) V_i.
struct DynamicsTrace {
  std::vector<double> times;
  std::vector<std::vector<double>> f_t;  // one length-n vector per time
  std::vector<double> loss;              // |f_t - Y|^2
  double eta = 0.0;
};

DynamicsTrace solve_linearized(const GramEigen& eigen, std::span<const double> y, double eta,
                               std::span<const double> times);

// loss(t) = sum_i exp(-2 eta lambda_i t) (V_i . Y)^2, one term per mode.
struct SpectralCurve {
  std::vector<double> times;
  std::vector<double> loss;
  Matrix mode_terms;  // times x modes
  double eta = 0.0;
};

SpectralCurve spectral_loss_curve(const GramEigen& eigen, std::span<const double> y, double eta,
                                  std::span<const double> times);

struct ConditionReport {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double kappa = 0.0;      // lambda_min / lambda_max
  double eta_bound = 0.0;  // 2 / (lambda_min + lambda_max)
};

ConditionReport condition_report(const GramEigen& eigen);

// Discrete full-batch GD cross-check (unit time step): per-mode residual
// factor (1 - eta lambda)^t. Agrees with the flow solution only for small
// eta lambda. Returns |f_t - Y|^2 for t = 0..steps.
std::vector<double> discrete_gd_loss(const GramEigen& eigen, std::span<const double> y, double eta,
                                     std::size_t steps);

// Per-point predictions of the discrete iteration at each step (step 0 = 0).
std::vector<std::vector<double>> discrete_gd_predictions(const GramEigen& eigen,
                                                         std::span<const double> y, double eta,
                                                         std::size_t steps);

}  // namespace ntklab
