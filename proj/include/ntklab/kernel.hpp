#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ntklab/dataset.hpp"
#include "ntklab/linalg.hpp"
#include "ntklab/matrix.hpp"

namespace ntklab {

enum class Activation { relu };

// Architecture of the infinite-width fully-connected network whose tangent
// kernel is evaluated in closed form. c_norm is the normalization constant
// with E[sigma(z)^2] = 1/c for standard normal z; 2 for ReLU.
struct KernelSpec {
  int depth = 1;  // hidden layers, >= 1
  Activation activation = Activation::relu;
  double c_norm = 2.0;
  std::size_t input_dim = 0;  // d0, used in the x / sqrt(d0) input scaling

  void validate() const;
  static KernelSpec relu_l1(std::size_t input_dim) { return KernelSpec{1, Activation::relu, 2.0, input_dim}; }
};

// Kernel value together with its partial derivatives with respect to the
// three scalar invariants it depends on: qa = |x|^2/d0, qb = |x'|^2/d0,
// qab = x.x'/d0. Everything else (input gradients, coincident-point total
// derivatives) assembles from these by the chain rule.
struct NtkValue {
  double value = 0.0;
  double d_qa = 0.0;
  double d_qb = 0.0;
  double d_qab = 0.0;
};

NtkValue ntk_eval_dual(const KernelSpec& spec, double qa, double qb, double qab);

double ntk_eval(const KernelSpec& spec, std::span<const double> x, std::span<const double> x2);

struct McEstimate {
  double mean = 0.0;
  double std_err = 0.0;
};

// Monte-Carlo oracle for the depth-1 kernel: samples the defining Gaussian
// expectation over w ~ N(0, I_{d0}). Depth > 1 has no single-integral form;
// it is validated against finite-width empirical kernels instead (tests).
McEstimate ntk_eval_mc(const KernelSpec& spec, std::span<const double> x,
                       std::span<const double> x2, std::size_t n_samples, std::uint64_t seed);

// M[i][j] = K(a_i, b_j); when &a == &b only the upper triangle is computed
// and mirrored, so symmetry is exact. Row blocks run in parallel.
Matrix gram(const KernelSpec& spec, const Dataset& a, const Dataset& b);

// Gradient of K(x, x') with respect to x.
std::vector<double> ntk_grad_x(const KernelSpec& spec, std::span<const double> x,
                               std::span<const double> x2);
// Total derivative d/dx K(x, x) (both slots move together).
std::vector<double> ntk_grad_diag(const KernelSpec& spec, std::span<const double> x);

struct GramEigen {
  Matrix k;
  std::vector<double> values;  // descending; small negatives clamped to 0
  Matrix vectors;              // orthonormal columns
  std::size_t n() const { return values.size(); }
  std::vector<double> eigenvector(std::size_t i) const;
};

// Symmetric eigendecomposition with an input-symmetry check (relative
// asymmetry <= 1e-10) and clamping of eigenvalues in (-1e-8 * lambda_max, 0).
GramEigen eigendecompose(Matrix k);

}  // namespace ntklab
