#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ntklab/dataset.hpp"
#include "ntklab/matrix.hpp"

namespace ntklab {

// One-hidden-layer ReLU network in the kernel-limit parametrization,
//   f(x) = sqrt(c/m) sum_u s_u W2_u relu(W1_u . x / sqrt(d0)),
// where the m units come in two mirrored halves: unit u and unit u + m/2
// start with identical weights and opposite head signs s_u, so f == 0 at
// initialization while every unit keeps unit-variance Gaussian weights.
struct FiniteNet {
  std::size_t width = 0;      // m, even
  std::size_t input_dim = 0;  // d0
  double c_norm = 2.0;
  Matrix w1;                  // m x d0
  std::vector<double> w2;     // m

  static FiniteNet init(std::size_t width, std::size_t input_dim, std::uint64_t seed);

  double head_sign(std::size_t unit) const { return unit < width / 2 ? 1.0 : -1.0; }
  double out_scale() const;

  double forward(std::span<const double> x) const;
  std::vector<double> forward_batch(const Dataset& data) const;

  std::size_t param_count() const { return width * (input_dim + 1); }
  // Gradient of f(x) w.r.t. all parameters, packed as [W1 row-major | W2].
  void param_grad(std::span<const double> x, std::span<double> out) const;
  // Gradient of f w.r.t. the input.
  std::vector<double> input_grad(std::span<const double> x) const;

  std::vector<double> pack_params() const;
  void add_scaled(std::span<const double> direction, double step);  // theta += step * dir
};

// Weights stored in the shared binary matrix format: <stem>.w1.bin holds the
// m x d0 first layer, <stem>.w2.bin the heads as a 1 x m row.
void save_net(const FiniteNet& net, const std::string& stem);
FiniteNet load_net(const std::string& stem, double c_norm = 2.0);

// Empirical tangent kernel on a pair of datasets. Each entry is computed two
// ways -- the per-unit sum and the packed-gradient inner product -- and the
// two must agree to 1e-10 relative or this throws (a disagreement means the
// backprop is wrong).
Matrix empirical_ntk(const FiniteNet& net, const Dataset& a, const Dataset& b);

struct TrainTrace {
  std::vector<double> loss;            // |f - Y|^2 (GD descends half of it)
  std::vector<double> param_dist;      // |theta_t - theta_0|_2
  std::vector<double> param_dist_rel;  // |theta_t - theta_0|_2 / |theta_0|_2
  std::vector<double> kernel_drift;    // |K_t - K_0|_F at sampled steps
  std::vector<double> kernel_gap_ref;  // |K_t - ref|_F when a reference is given
  std::vector<std::size_t> kernel_steps;
  std::vector<std::vector<double>> predictions;  // f_t(X) per step
};

// Full-batch gradient descent on the square loss (1/2)|f - Y|^2 with
// manually derived gradients. kernel_every = 0 disables drift tracking;
// kernel_ref, when given, is an additional fixed reference (the analytic
// Gram) whose distance is recorded alongside the drift from K_0.
TrainTrace train_gd(FiniteNet& net, const Dataset& train, double eta, std::size_t steps,
                    std::size_t kernel_every = 1, const Matrix* kernel_ref = nullptr);

struct WidthScanRow {
  std::size_t width = 0;
  double displacement = 0.0;      // max over time of |theta_t - theta_0|
  double displacement_rel = 0.0;  // same, divided by |theta_0|
  double kernel_drift = 0.0;      // sup over sampled steps of |K_t - K_limit|_F
};

struct WidthScanResult {
  std::vector<WidthScanRow> rows;  // averaged over seeds
  double slope_displacement_abs = 0.0;
  double slope_displacement_rel = 0.0;
  double slope_kernel_drift = 0.0;
};

// Requires >= 3 widths spanning at least 1.5 decades. Slopes are least
// squares fits of log(quantity) against log(width).
WidthScanResult width_scaling_experiment(std::span<const std::size_t> widths, const Dataset& train,
                                         double eta, std::size_t steps,
                                         std::span<const std::uint64_t> seeds);

struct OneStepDistillResult {
  Matrix xs;
  double eta = 0.0;
  std::vector<double> outer_loss;  // loss(X_T, theta_1) per outer step
};

// Single-inner-step bi-level distillation: theta_1 = theta_0 - eta *
// grad_theta loss(X_S); X_S and eta then descend loss(X_T, theta_1) with
// rate alpha. Gradients through the inner step are derived manually (the
// ReLU second derivative is taken as zero).
OneStepDistillResult one_step_distill(const FiniteNet& net0, Matrix xs, std::span<const double> ys,
                                      const Dataset& target, double eta, double alpha,
                                      std::size_t outer_steps);

// Gradient of the one-step outer loss w.r.t. X_S (row-major) and eta, used
// by one_step_distill and checked against finite differences in tests.
struct OneStepGrad {
  Matrix d_xs;
  double d_eta = 0.0;
  double outer_loss = 0.0;
};
OneStepGrad one_step_outer_grad(const FiniteNet& net0, const Matrix& xs, std::span<const double> ys,
                                const Dataset& target, double eta);

}  // namespace ntklab
