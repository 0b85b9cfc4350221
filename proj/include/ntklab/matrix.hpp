#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ntklab {

// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  Matrix transposed() const {
    Matrix t(cols, rows);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) t(j, i) = (*this)(i, j);
    return t;
  }
};

std::vector<double> matvec(const Matrix& a, std::span<const double> x);
// y = A^T x
std::vector<double> matvec_t(const Matrix& a, std::span<const double> x);
Matrix matmul(const Matrix& a, const Matrix& b);

double inf_norm(std::span<const double> v);
double norm2(std::span<const double> v);
double frobenius_norm(const Matrix& m);
double frobenius_distance(const Matrix& a, const Matrix& b);

}  // namespace ntklab
