#include "ntklab/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "ntklab/parallel.hpp"
#include "ntklab/simd.hpp"

namespace ntklab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kCosClamp = 1.0 - 1e-12;

// Scalar with partials w.r.t. (qa, qb, qab).
struct D3 {
  double v, da, db, dr;
};

inline D3 make(double v) { return {v, 0.0, 0.0, 0.0}; }
inline D3 add(D3 x, D3 y) { return {x.v + y.v, x.da + y.da, x.db + y.db, x.dr + y.dr}; }
inline D3 mul(D3 x, D3 y) {
  return {x.v * y.v, x.da * y.v + x.v * y.da, x.db * y.v + x.v * y.db, x.dr * y.v + x.v * y.dr};
}
inline D3 scale(double a, D3 x) { return {a * x.v, a * x.da, a * x.db, a * x.dr}; }

struct ArcExpectations {
  D3 e_act;    // E[sigma(u) sigma(u')] under N(0, [[a, r], [r, b]])
  D3 e_deriv;  // E[sigma'(u) sigma'(u')]
};

// Closed-form bivariate Gaussian expectations for ReLU. With s = sqrt(a b)
// and cos(psi) = r / s:
//   E[sigma sigma]   = s / (2 pi) * (sin psi + (pi - psi) cos psi)
//   E[sigma' sigma'] = (pi - psi) / (2 pi)
// cos(psi) is clamped away from +-1 before acos so the derivative of the
// second expectation (which carries a 1/sin psi factor) stays bounded.
ArcExpectations relu_arc(const D3& a, const D3& b, const D3& r) {
  if (a.v <= 0.0 || b.v <= 0.0)
    throw std::domain_error("ntk_eval: zero-norm input, kernel angle undefined");
  const double s = std::sqrt(a.v * b.v);
  const double ds_da = 0.5 * s / a.v;
  const double ds_db = 0.5 * s / b.v;

  const double c_raw = r.v / s;
  const bool clamped = c_raw > kCosClamp || c_raw < -kCosClamp;
  const double c = std::clamp(c_raw, -kCosClamp, kCosClamp);
  // partials of cos(psi) w.r.t. (a, b, r); zero where the clamp is active
  double dc_da = 0.0, dc_db = 0.0, dc_dr = 0.0;
  if (!clamped) {
    dc_dr = 1.0 / s;
    dc_da = -0.5 * r.v / (a.v * s);
    dc_db = -0.5 * r.v / (b.v * s);
  }
  const double psi = std::acos(c);
  const double sin_psi = std::sqrt(1.0 - c * c);

  const double e1 = s / kTwoPi * (sin_psi + (std::numbers::pi - psi) * c);
  const double de1_ds = e1 / s;
  const double de1_dc = s / kTwoPi * (std::numbers::pi - psi);
  const double e2 = (std::numbers::pi - psi) / kTwoPi;
  const double de2_dc = 1.0 / (kTwoPi * sin_psi);

  // partials w.r.t. the layer-local (a, b, r), then through their own duals
  auto chain = [&](double df_ds, double df_dc, double value) {
    const double fa = df_ds * ds_da + df_dc * dc_da;
    const double fb = df_ds * ds_db + df_dc * dc_db;
    const double fr = df_dc * dc_dr;
    D3 out;
    out.v = value;
    out.da = fa * a.da + fb * b.da + fr * r.da;
    out.db = fa * a.db + fb * b.db + fr * r.db;
    out.dr = fa * a.dr + fb * b.dr + fr * r.dr;
    return out;
  };
  ArcExpectations out;
  out.e_act = chain(de1_ds, de1_dc, e1);
  out.e_deriv = chain(0.0, de2_dc, e2);
  return out;
}

}  // namespace

void KernelSpec::validate() const {
  if (depth < 1) throw std::invalid_argument("KernelSpec: depth must be >= 1");
  if (c_norm <= 0.0) throw std::invalid_argument("KernelSpec: c_norm must be positive");
  if (input_dim == 0) throw std::invalid_argument("KernelSpec: input_dim must be set");
}

NtkValue ntk_eval_dual(const KernelSpec& spec, double qa, double qb, double qab) {
  spec.validate();
  const double c = spec.c_norm;
  D3 a{qa, 1.0, 0.0, 0.0};
  D3 b{qb, 0.0, 1.0, 0.0};
  D3 r{qab, 0.0, 0.0, 1.0};
  D3 theta = r;  // layer-1 kernel is the input covariance
  for (int layer = 0; layer < spec.depth; ++layer) {
    const ArcExpectations e = relu_arc(a, b, r);
    const D3 r_next = scale(c, e.e_act);
    theta = add(r_next, scale(c, mul(e.e_deriv, theta)));
    a = scale(0.5 * c, a);
    b = scale(0.5 * c, b);
    r = r_next;
  }
  return {theta.v, theta.da, theta.db, theta.dr};
}

namespace {

struct PairInvariants {
  double qa, qb, qab;
};

PairInvariants invariants(const KernelSpec& spec, std::span<const double> x,
                          std::span<const double> x2) {
  if (x.size() != spec.input_dim || x2.size() != spec.input_dim)
    throw std::invalid_argument("ntk_eval: input dimension mismatch (expected " +
                                std::to_string(spec.input_dim) + ")");
  const double inv_d = 1.0 / static_cast<double>(spec.input_dim);
  return {simd::sum_sq(x) * inv_d, simd::sum_sq(x2) * inv_d, simd::dot(x, x2) * inv_d};
}

}  // namespace

double ntk_eval(const KernelSpec& spec, std::span<const double> x, std::span<const double> x2) {
  const PairInvariants q = invariants(spec, x, x2);
  return ntk_eval_dual(spec, q.qa, q.qb, q.qab).value;
}

McEstimate ntk_eval_mc(const KernelSpec& spec, std::span<const double> x,
                       std::span<const double> x2, std::size_t n_samples, std::uint64_t seed) {
  spec.validate();
  if (spec.depth != 1)
    throw std::invalid_argument(
        "ntk_eval_mc: single-integral sampler covers depth 1 only; deeper kernels are checked "
        "against finite-width empirical kernels");
  if (n_samples < 1) throw std::invalid_argument("ntk_eval_mc: n_samples must be >= 1");
  if (x.size() != spec.input_dim || x2.size() != spec.input_dim)
    throw std::invalid_argument("ntk_eval_mc: input dimension mismatch");

  const std::size_t d = spec.input_dim;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  const double q = simd::dot(x, x2) / static_cast<double>(d);
  const double c = spec.c_norm;

  // fixed-size chunks combined in index order: estimate is independent of
  // the worker count
  const std::size_t chunk = 4096;
  const std::size_t n_chunks = (n_samples + chunk - 1) / chunk;
  std::vector<double> sums(n_chunks, 0.0), sq_sums(n_chunks, 0.0);
  parallel_for(n_chunks, [&](std::size_t c0, std::size_t c1) {
    std::vector<double> w(d);
    for (std::size_t ci = c0; ci < c1; ++ci) {
      const std::size_t begin = ci * chunk;
      const std::size_t end = std::min(n_samples, begin + chunk);
      double s = 0.0, s2 = 0.0;
      for (std::size_t i = begin; i < end; ++i) {
        Rng draw = Rng(seed).split(i);
        for (std::size_t j = 0; j < d; ++j) w[j] = draw.normal();
        const double u = simd::dot(w.data(), x.data(), d) * inv_sqrt_d;
        const double u2 = simd::dot(w.data(), x2.data(), d) * inv_sqrt_d;
        const double act = (u > 0.0 ? u : 0.0) * (u2 > 0.0 ? u2 : 0.0);
        const double deriv = (u > 0.0 && u2 > 0.0) ? q : 0.0;
        const double sample = c * (act + deriv);
        s += sample;
        s2 += sample * sample;
      }
      sums[ci] = s;
      sq_sums[ci] = s2;
    }
  });
  double total = 0.0, total_sq = 0.0;
  for (std::size_t ci = 0; ci < n_chunks; ++ci) {
    total += sums[ci];
    total_sq += sq_sums[ci];
  }
  const double mean = total / static_cast<double>(n_samples);
  double std_err = 0.0;
  if (n_samples > 1) {
    const double var =
        std::max(0.0, (total_sq - total * mean) / static_cast<double>(n_samples - 1));
    std_err = std::sqrt(var / static_cast<double>(n_samples));
  }
  return {mean, std_err};
}

Matrix gram(const KernelSpec& spec, const Dataset& a, const Dataset& b) {
  spec.validate();
  if (a.dim() != spec.input_dim || b.dim() != spec.input_dim)
    throw std::invalid_argument("gram: dataset dimension does not match kernel input_dim");
  const bool same = &a == &b;
  const double inv_d = 1.0 / static_cast<double>(spec.input_dim);

  std::vector<double> qa(a.size()), qb;
  for (std::size_t i = 0; i < a.size(); ++i) qa[i] = simd::sum_sq(a.x.row(i)) * inv_d;
  if (same) {
    qb = qa;
  } else {
    qb.resize(b.size());
    for (std::size_t j = 0; j < b.size(); ++j) qb[j] = simd::sum_sq(b.x.row(j)) * inv_d;
  }

  Matrix m(a.size(), b.size());
  parallel_for(a.size(), [&](std::size_t r0, std::size_t r1) {
    for (std::size_t i = r0; i < r1; ++i) {
      const std::size_t j0 = same ? i : 0;
      for (std::size_t j = j0; j < b.size(); ++j) {
        const double qab = simd::dot(a.x.row(i), b.x.row(j)) * inv_d;
        m(i, j) = ntk_eval_dual(spec, qa[i], qb[j], qab).value;
      }
    }
  });
  if (same) {
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < i; ++j) m(i, j) = m(j, i);
  }
  return m;
}

std::vector<double> ntk_grad_x(const KernelSpec& spec, std::span<const double> x,
                               std::span<const double> x2) {
  const PairInvariants q = invariants(spec, x, x2);
  const NtkValue k = ntk_eval_dual(spec, q.qa, q.qb, q.qab);
  const double inv_d = 1.0 / static_cast<double>(spec.input_dim);
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    g[i] = k.d_qa * 2.0 * x[i] * inv_d + k.d_qab * x2[i] * inv_d;
  }
  return g;
}

std::vector<double> ntk_grad_diag(const KernelSpec& spec, std::span<const double> x) {
  const PairInvariants q = invariants(spec, x, x);
  const NtkValue k = ntk_eval_dual(spec, q.qa, q.qb, q.qab);
  // qa, qb, qab all equal |x|^2/d0 here and share the gradient 2x/d0; the
  // 1/sin(psi) spikes in the individual partials cancel in the sum
  const double w = (k.d_qa + k.d_qb + k.d_qab) * 2.0 / static_cast<double>(spec.input_dim);
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = w * x[i];
  return g;
}

std::vector<double> GramEigen::eigenvector(std::size_t i) const {
  std::vector<double> v(vectors.rows);
  for (std::size_t r = 0; r < vectors.rows; ++r) v[r] = vectors(r, i);
  return v;
}

GramEigen eigendecompose(Matrix k) {
  if (k.rows != k.cols) throw std::invalid_argument("eigendecompose: matrix not square");
  double scale = 0.0, asym = 0.0;
  for (std::size_t i = 0; i < k.rows; ++i) {
    for (std::size_t j = i; j < k.cols; ++j) {
      scale = std::max(scale, std::abs(k(i, j)));
      asym = std::max(asym, std::abs(k(i, j) - k(j, i)));
    }
  }
  if (scale > 0.0 && asym > 1e-10 * scale)
    throw std::invalid_argument("eigendecompose: input asymmetry " + std::to_string(asym / scale) +
                                " exceeds 1e-10 relative");

  SymEigen e = jacobi_eigen(k);
  const double lambda_max = e.values.empty() ? 0.0 : std::max(e.values.front(), 0.0);
  for (double& v : e.values) {
    if (v < 0.0 && v > -1e-8 * lambda_max) v = 0.0;
  }
  GramEigen out;
  out.k = std::move(k);
  out.values = std::move(e.values);
  out.vectors = std::move(e.vectors);
  return out;
}

}  // namespace ntklab
