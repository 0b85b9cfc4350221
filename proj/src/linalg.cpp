#include "ntklab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ntklab/simd.hpp"

namespace ntklab {

NotPositiveDefinite::NotPositiveDefinite(std::size_t p, double v)
    : std::runtime_error("cholesky: non-positive pivot " + std::to_string(v) + " at index " +
                         std::to_string(p)),
      pivot(p),
      pivot_value(v) {}

SymEigen jacobi_eigen(const Matrix& a, int max_sweeps) {
  if (a.rows != a.cols) throw std::invalid_argument("jacobi_eigen: matrix not square");
  const std::size_t n = a.rows;
  Matrix w = a;  // working copy, diagonalized in place
  Matrix v = Matrix::identity(n);

  auto off_diag_sq = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s += w(i, j) * w(i, j);
    return s;
  };

  const double total = std::max(frobenius_norm(w), 1e-300);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    if (std::sqrt(2.0 * off_diag_sq()) <= 1e-15 * total) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = w(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        const double theta = 0.5 * std::atan2(2.0 * apq, w(q, q) - w(p, p));
        const double c = std::cos(theta);
        const double s = std::sin(theta);
        // rotate rows/columns p and q
        for (std::size_t r = 0; r < n; ++r) {
          const double wrp = w(r, p);
          const double wrq = w(r, q);
          w(r, p) = c * wrp - s * wrq;
          w(r, q) = s * wrp + c * wrq;
        }
        for (std::size_t r = 0; r < n; ++r) {
          const double wpr = w(p, r);
          const double wqr = w(q, r);
          w(p, r) = c * wpr - s * wqr;
          w(q, r) = s * wpr + c * wqr;
        }
        for (std::size_t r = 0; r < n; ++r) {
          const double vrp = v(r, p);
          const double vrq = v(r, q);
          v(r, p) = c * vrp - s * vrq;
          v(r, q) = s * vrp + c * vrq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> diag(n);
  for (std::size_t i = 0; i < n; ++i) diag[i] = w(i, i);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return diag[i] > diag[j]; });

  SymEigen out;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = diag[order[k]];
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, k) = v(r, order[k]);
  }
  return out;
}

Matrix cholesky(const Matrix& a) {
  if (a.rows != a.cols) throw std::invalid_argument("cholesky: matrix not square");
  const std::size_t n = a.rows;
  Matrix l(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double s = simd::dot(l.row(i).data(), l.row(j).data(), j);
      if (i == j) {
        const double d = a(i, i) - s;
        if (d <= 0.0 || !std::isfinite(d)) throw NotPositiveDefinite(i, d);
        l(i, i) = std::sqrt(d);
      } else {
        l(i, j) = (a(i, j) - s) / l(j, j);
      }
    }
  }
  return l;
}

std::vector<double> cholesky_solve(const Matrix& l, std::span<const double> b) {
  const std::size_t n = l.rows;
  if (b.size() != n) throw std::invalid_argument("cholesky_solve: size mismatch");
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = (b[i] - simd::dot(l.row(i).data(), y.data(), i)) / l(i, i);
  }
  std::vector<double> x(n);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t j = ii + 1; j < n; ++j) s -= l(j, ii) * x[j];
    x[ii] = s / l(ii, ii);
  }
  return x;
}

std::vector<double> solve_spd(const Matrix& a, std::span<const double> b) {
  const Matrix l = cholesky(a);
  std::vector<double> x = cholesky_solve(l, b);
  // one refinement pass in the same precision knocks the residual down a
  // couple of digits on mildly ill-conditioned Grams
  std::vector<double> r(b.begin(), b.end());
  const std::vector<double> ax = matvec(a, x);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= ax[i];
  const std::vector<double> dx = cholesky_solve(l, r);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += dx[i];
  return x;
}

Matrix random_orthogonal(std::size_t d, Rng& rng) {
  Matrix g(d, d);
  for (double& v : g.data) v = rng.normal();
  // modified Gram-Schmidt on columns, diag(R) > 0
  Matrix q(d, d);
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<double> col(d);
    for (std::size_t i = 0; i < d; ++i) col[i] = g(i, j);
    for (std::size_t k = 0; k < j; ++k) {
      double proj = 0.0;
      for (std::size_t i = 0; i < d; ++i) proj += q(i, k) * col[i];
      for (std::size_t i = 0; i < d; ++i) col[i] -= proj * q(i, k);
    }
    const double nrm = norm2(col);
    if (nrm < 1e-12) throw std::runtime_error("random_orthogonal: degenerate draw");
    for (std::size_t i = 0; i < d; ++i) q(i, j) = col[i] / nrm;
  }
  return q;
}

}  // namespace ntklab
