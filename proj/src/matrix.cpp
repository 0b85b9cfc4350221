#include "ntklab/matrix.hpp"

#include <cmath>
#include <stdexcept>

#include "ntklab/simd.hpp"

namespace ntklab {

std::vector<double> matvec(const Matrix& a, std::span<const double> x) {
  if (x.size() != a.cols) throw std::invalid_argument("matvec: size mismatch");
  std::vector<double> y(a.rows);
  for (std::size_t i = 0; i < a.rows; ++i) y[i] = simd::dot(a.row(i), x);
  return y;
}

std::vector<double> matvec_t(const Matrix& a, std::span<const double> x) {
  if (x.size() != a.rows) throw std::invalid_argument("matvec_t: size mismatch");
  std::vector<double> y(a.cols, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i) simd::axpy(x[i], a.row(i).data(), y.data(), a.cols);
  return y;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw std::invalid_argument("matmul: size mismatch");
  Matrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t k = 0; k < a.cols; ++k) {
      simd::axpy(a(i, k), b.row(k).data(), c.row(i).data(), b.cols);
    }
  }
  return c;
}

double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double norm2(std::span<const double> v) { return std::sqrt(simd::sum_sq(v)); }

double frobenius_norm(const Matrix& m) { return std::sqrt(simd::sum_sq(m.data.data(), m.data.size())); }

double frobenius_distance(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows || a.cols != b.cols)
    throw std::invalid_argument("frobenius_distance: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

}  // namespace ntklab
