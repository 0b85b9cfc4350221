#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "ntklab/matrix.hpp"
#include "ntklab/rng.hpp"

namespace ntklab {

struct NotPositiveDefinite : std::runtime_error {
  std::size_t pivot;
  double pivot_value;
  NotPositiveDefinite(std::size_t p, double v);
};

struct SymEigen {
  std::vector<double> values;  // descending
  Matrix vectors;              // column k = eigenvector for values[k]
};

// Cyclic Jacobi rotations for a symmetric matrix. Input symmetry is the
// caller's responsibility (eigendecompose() in the kernel module checks it).
SymEigen jacobi_eigen(const Matrix& a, int max_sweeps = 64);

// Lower-triangular factor L with A = L L^T; throws NotPositiveDefinite.
Matrix cholesky(const Matrix& a);
std::vector<double> cholesky_solve(const Matrix& l, std::span<const double> b);

// Cholesky solve of A x = b with one step of iterative refinement.
std::vector<double> solve_spd(const Matrix& a, std::span<const double> b);

// Haar-ish orthogonal matrix: QR of a Gaussian draw with the R diagonal
// forced positive so the result is a deterministic function of the rng state.
Matrix random_orthogonal(std::size_t d, Rng& rng);

}  // namespace ntklab
