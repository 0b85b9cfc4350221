#include "ntklab/finite_net.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "ntklab/io.hpp"
#include "ntklab/kernel.hpp"
#include "ntklab/parallel.hpp"
#include "ntklab/simd.hpp"

namespace ntklab {

FiniteNet FiniteNet::init(std::size_t width, std::size_t input_dim, std::uint64_t seed) {
  if (width < 2 || width % 2 != 0)
    throw std::invalid_argument("FiniteNet: width must be even and >= 2");
  if (input_dim == 0) throw std::invalid_argument("FiniteNet: input_dim must be >= 1");
  FiniteNet net;
  net.width = width;
  net.input_dim = input_dim;
  net.w1 = Matrix(width, input_dim);
  net.w2.resize(width);
  const std::size_t half = width / 2;
  Rng rng = Rng(seed).split(0xf17e);
  for (std::size_t u = 0; u < half; ++u) {
    for (std::size_t j = 0; j < input_dim; ++j) net.w1(u, j) = rng.normal();
    net.w2[u] = rng.normal();
    // mirrored twin: identical weights, opposite head sign, so f == 0 at init
    std::copy_n(net.w1.row(u).data(), input_dim, net.w1.row(u + half).data());
    net.w2[u + half] = net.w2[u];
  }
  return net;
}

double FiniteNet::out_scale() const {
  return std::sqrt(c_norm / static_cast<double>(width));
}

namespace {

// z_u = W1_u . x / sqrt(d0) for every unit
void preactivations(const FiniteNet& net, std::span<const double> x, std::span<double> z) {
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(net.input_dim));
  for (std::size_t u = 0; u < net.width; ++u) {
    z[u] = simd::dot(net.w1.row(u), x) * inv_sqrt_d;
  }
}

}  // namespace

double FiniteNet::forward(std::span<const double> x) const {
  if (x.size() != input_dim) throw std::invalid_argument("FiniteNet::forward: dimension mismatch");
  std::vector<double> z(width);
  preactivations(*this, x, z);
  const std::size_t half = width / 2;
  const double pos = simd::relu_dot(w2.data(), z.data(), half);
  const double neg = simd::relu_dot(w2.data() + half, z.data() + half, half);
  return out_scale() * (pos - neg);
}

std::vector<double> FiniteNet::forward_batch(const Dataset& data) const {
  std::vector<double> out(data.size());
  parallel_for(data.size(), [&](std::size_t i0, std::size_t i1) {
    for (std::size_t i = i0; i < i1; ++i) out[i] = forward(data.x.row(i));
  });
  return out;
}

void FiniteNet::param_grad(std::span<const double> x, std::span<double> out) const {
  if (out.size() != param_count()) throw std::invalid_argument("param_grad: output size");
  std::vector<double> z(width);
  preactivations(*this, x, z);
  const double kappa = out_scale();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(input_dim));
  double* gw1 = out.data();
  double* gw2 = out.data() + width * input_dim;
  for (std::size_t u = 0; u < width; ++u) {
    const double s = head_sign(u);
    gw2[u] = s * kappa * (z[u] > 0.0 ? z[u] : 0.0);
    double* row = gw1 + u * input_dim;
    if (z[u] > 0.0) {
      const double coef = s * kappa * w2[u] * inv_sqrt_d;
      for (std::size_t j = 0; j < input_dim; ++j) row[j] = coef * x[j];
    } else {
      std::fill_n(row, input_dim, 0.0);
    }
  }
}

std::vector<double> FiniteNet::input_grad(std::span<const double> x) const {
  std::vector<double> z(width);
  preactivations(*this, x, z);
  const double kappa = out_scale();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(input_dim));
  std::vector<double> g(input_dim, 0.0);
  for (std::size_t u = 0; u < width; ++u) {
    if (z[u] <= 0.0) continue;
    simd::axpy(head_sign(u) * kappa * w2[u] * inv_sqrt_d, w1.row(u).data(), g.data(), input_dim);
  }
  return g;
}

std::vector<double> FiniteNet::pack_params() const {
  std::vector<double> p;
  p.reserve(param_count());
  p.insert(p.end(), w1.data.begin(), w1.data.end());
  p.insert(p.end(), w2.begin(), w2.end());
  return p;
}

void FiniteNet::add_scaled(std::span<const double> direction, double step) {
  if (direction.size() != param_count()) throw std::invalid_argument("add_scaled: size mismatch");
  simd::axpy(step, direction.data(), w1.data.data(), w1.data.size());
  simd::axpy(step, direction.data() + w1.data.size(), w2.data(), w2.size());
}

void save_net(const FiniteNet& net, const std::string& stem) {
  write_matrix_bin(stem + ".w1.bin", net.w1);
  Matrix w2(1, net.width);
  std::copy(net.w2.begin(), net.w2.end(), w2.data.begin());
  write_matrix_bin(stem + ".w2.bin", w2);
}

FiniteNet load_net(const std::string& stem, double c_norm) {
  FiniteNet net;
  net.w1 = read_matrix_bin(stem + ".w1.bin");
  const Matrix w2 = read_matrix_bin(stem + ".w2.bin");
  if (w2.rows != 1 || w2.cols != net.w1.rows)
    throw std::runtime_error("load_net: weight shapes are inconsistent");
  net.width = net.w1.rows;
  net.input_dim = net.w1.cols;
  net.c_norm = c_norm;
  net.w2 = w2.data;
  if (net.width % 2 != 0) throw std::runtime_error("load_net: width must be even");
  return net;
}

Matrix empirical_ntk(const FiniteNet& net, const Dataset& a, const Dataset& b) {
  if (a.dim() != net.input_dim || b.dim() != net.input_dim)
    throw std::invalid_argument("empirical_ntk: dimension mismatch");
  const bool same = &a == &b;
  const std::size_t m = net.width;
  const double cm = net.c_norm / static_cast<double>(m);
  const double inv_d = 1.0 / static_cast<double>(net.input_dim);

  // per-point unit activations for the explicit sum (path a)
  auto activations = [&](const Dataset& ds, Matrix& act, Matrix& gate) {
    act = Matrix(ds.size(), m);
    gate = Matrix(ds.size(), m);
    parallel_for(ds.size(), [&](std::size_t i0, std::size_t i1) {
      std::vector<double> z(m);
      for (std::size_t i = i0; i < i1; ++i) {
        preactivations(net, ds.x.row(i), z);
        for (std::size_t u = 0; u < m; ++u) {
          act(i, u) = z[u] > 0.0 ? z[u] : 0.0;
          gate(i, u) = z[u] > 0.0 ? net.w2[u] * net.w2[u] : 0.0;
        }
      }
    });
  };
  Matrix act_a, gate_a, act_b, gate_b;
  activations(a, act_a, gate_a);
  if (!same) activations(b, act_b, gate_b);
  const Matrix& ab = same ? act_a : act_b;
  const Matrix& gb = same ? gate_a : gate_b;

  // binary gate of b-side for the w2^2-weighted product
  Matrix gate_b_bin(ab.rows, m);
  for (std::size_t i = 0; i < ab.rows; ++i)
    for (std::size_t u = 0; u < m; ++u) gate_b_bin(i, u) = gb(i, u) != 0.0 ? 1.0 : 0.0;

  // packed gradients for the inner-product route (path b)
  const std::size_t p_count = net.param_count();
  Matrix grad_a(a.size(), p_count), grad_b;
  parallel_for(a.size(), [&](std::size_t i0, std::size_t i1) {
    for (std::size_t i = i0; i < i1; ++i) net.param_grad(a.x.row(i), grad_a.row(i));
  });
  if (!same) {
    grad_b = Matrix(b.size(), p_count);
    parallel_for(b.size(), [&](std::size_t i0, std::size_t i1) {
      for (std::size_t i = i0; i < i1; ++i) net.param_grad(b.x.row(i), grad_b.row(i));
    });
  }
  const Matrix& gradb = same ? grad_a : grad_b;

  Matrix k(a.size(), b.size());
  parallel_for(a.size(), [&](std::size_t r0, std::size_t r1) {
    for (std::size_t i = r0; i < r1; ++i) {
      const std::size_t j0 = same ? i : 0;
      for (std::size_t j = j0; j < b.size(); ++j) {
        const double xdot = simd::dot(a.x.row(i), b.x.row(j)) * inv_d;
        const double explicit_sum =
            cm * (simd::dot(act_a.row(i), ab.row(j)) +
                  xdot * simd::dot(gate_a.row(i), gate_b_bin.row(j)));
        const double grad_dot = simd::dot(grad_a.row(i), gradb.row(j));
        const double scale = std::max({std::abs(explicit_sum), std::abs(grad_dot), 1e-12});
        if (std::abs(explicit_sum - grad_dot) > 1e-10 * scale) {
          throw std::runtime_error(
              "empirical_ntk: unit-sum and gradient-product routes disagree (" +
              std::to_string(explicit_sum) + " vs " + std::to_string(grad_dot) + ")");
        }
        k(i, j) = explicit_sum;
      }
    }
  });
  if (same) {
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < i; ++j) k(i, j) = k(j, i);
  }
  return k;
}

namespace {

// gradient of (1/2)|f(X) - Y|^2 over all parameters
std::vector<double> loss_grad(const FiniteNet& net, const Dataset& train,
                              std::span<const double> residual) {
  const std::size_t m = net.width;
  const std::size_t d = net.input_dim;
  const double kappa = net.out_scale();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  Matrix z(train.size(), m);
  parallel_for(train.size(), [&](std::size_t i0, std::size_t i1) {
    for (std::size_t i = i0; i < i1; ++i) preactivations(net, train.x.row(i), z.row(i));
  });

  std::vector<double> g(net.param_count(), 0.0);
  double* gw1 = g.data();
  double* gw2 = g.data() + m * d;
  parallel_for(m, [&](std::size_t u0, std::size_t u1) {
    for (std::size_t u = u0; u < u1; ++u) {
      const double s = net.head_sign(u);
      double acc2 = 0.0;
      double* row = gw1 + u * d;
      for (std::size_t i = 0; i < train.size(); ++i) {
        const double zu = z(i, u);
        if (zu <= 0.0) continue;
        acc2 += residual[i] * zu;
        simd::axpy(s * kappa * net.w2[u] * inv_sqrt_d * residual[i], train.x.row(i).data(), row, d);
      }
      gw2[u] = s * kappa * acc2;
    }
  });
  return g;
}

}  // namespace

TrainTrace train_gd(FiniteNet& net, const Dataset& train, double eta, std::size_t steps,
                    std::size_t kernel_every, const Matrix* kernel_ref) {
  if (eta < 0.0) throw std::invalid_argument("train_gd: eta must be >= 0");
  const std::vector<double> theta0 = net.pack_params();
  const double theta0_norm = norm2(theta0);
  Matrix k0;
  if (kernel_every > 0) k0 = empirical_ntk(net, train, train);

  TrainTrace trace;
  double initial_loss = -1.0;
  for (std::size_t t = 0; t <= steps; ++t) {
    const std::vector<double> f = net.forward_batch(train);
    std::vector<double> residual(f.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      residual[i] = f[i] - train.y[i];
      loss += residual[i] * residual[i];
    }
    if (initial_loss < 0.0) initial_loss = loss;
    if (loss > 1e6 * initial_loss)
      throw std::runtime_error("train_gd: divergence at step " + std::to_string(t) + " (loss " +
                               std::to_string(loss) + ")");

    const std::vector<double> theta = net.pack_params();
    double dist_sq = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double d = theta[i] - theta0[i];
      dist_sq += d * d;
    }
    trace.loss.push_back(loss);
    trace.param_dist.push_back(std::sqrt(dist_sq));
    trace.param_dist_rel.push_back(std::sqrt(dist_sq) / theta0_norm);
    trace.predictions.push_back(f);
    if (kernel_every > 0 && t % kernel_every == 0) {
      const Matrix kt = empirical_ntk(net, train, train);
      trace.kernel_drift.push_back(frobenius_distance(kt, k0));
      if (kernel_ref != nullptr)
        trace.kernel_gap_ref.push_back(frobenius_distance(kt, *kernel_ref));
      trace.kernel_steps.push_back(t);
    }

    if (t == steps) break;
    const std::vector<double> g = loss_grad(net, train, residual);
    net.add_scaled(g, -eta);
  }
  return trace;
}

namespace {

double fit_loglog_slope(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double denom = n * sxx - sx * sx;
  return (n * sxy - sx * sy) / denom;
}

}  // namespace

WidthScanResult width_scaling_experiment(std::span<const std::size_t> widths, const Dataset& train,
                                         double eta, std::size_t steps,
                                         std::span<const std::uint64_t> seeds) {
  if (widths.size() < 3)
    throw std::invalid_argument("width_scaling_experiment: need at least 3 widths");
  std::size_t wmin = widths[0], wmax = widths[0];
  for (std::size_t w : widths) {
    wmin = std::min(wmin, w);
    wmax = std::max(wmax, w);
  }
  if (std::log10(static_cast<double>(wmax) / static_cast<double>(wmin)) < 1.5)
    throw std::invalid_argument("width_scaling_experiment: widths must span >= 1.5 decades");
  if (seeds.empty()) throw std::invalid_argument("width_scaling_experiment: need >= 1 seed");

  // the kernel deviation is measured against the infinite-width limit (the
  // analytic Gram), matching the bound this experiment probes
  const Matrix k_limit = gram(KernelSpec::relu_l1(train.dim()), train, train);

  WidthScanResult result;
  for (std::size_t w : widths) {
    WidthScanRow row;
    row.width = w;
    for (std::uint64_t seed : seeds) {
      FiniteNet net = FiniteNet::init(w, train.dim(), seed);
      const TrainTrace trace = train_gd(net, train, eta, steps, /*kernel_every=*/2, &k_limit);
      double disp = 0.0, disp_rel = 0.0, drift = 0.0;
      for (double v : trace.param_dist) disp = std::max(disp, v);
      for (double v : trace.param_dist_rel) disp_rel = std::max(disp_rel, v);
      for (double v : trace.kernel_gap_ref) drift = std::max(drift, v);
      row.displacement += disp;
      row.displacement_rel += disp_rel;
      row.kernel_drift += drift;
    }
    const double inv = 1.0 / static_cast<double>(seeds.size());
    row.displacement *= inv;
    row.displacement_rel *= inv;
    row.kernel_drift *= inv;
    result.rows.push_back(row);
  }

  std::vector<double> ws, disp, disp_rel, drift;
  for (const auto& row : result.rows) {
    ws.push_back(static_cast<double>(row.width));
    disp.push_back(row.displacement);
    disp_rel.push_back(row.displacement_rel);
    drift.push_back(row.kernel_drift);
  }
  result.slope_displacement_abs = fit_loglog_slope(ws, disp);
  result.slope_displacement_rel = fit_loglog_slope(ws, disp_rel);
  result.slope_kernel_drift = fit_loglog_slope(ws, drift);
  return result;
}

OneStepGrad one_step_outer_grad(const FiniteNet& net0, const Matrix& xs, std::span<const double> ys,
                                const Dataset& target, double eta) {
  if (xs.cols != net0.input_dim || ys.size() != xs.rows)
    throw std::invalid_argument("one_step_outer_grad: support shape mismatch");
  const std::size_t m = net0.width;
  const std::size_t d = net0.input_dim;
  const double kappa = net0.out_scale();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  // inner step on the support set
  std::vector<double> r_s(xs.rows);
  std::vector<double> g(net0.param_count(), 0.0);
  {
    double* gw1 = g.data();
    double* gw2 = g.data() + m * d;
    std::vector<double> z(m);
    for (std::size_t j = 0; j < xs.rows; ++j) {
      preactivations(net0, xs.row(j), z);
      const std::size_t half = m / 2;
      const double f = kappa * (simd::relu_dot(net0.w2.data(), z.data(), half) -
                                simd::relu_dot(net0.w2.data() + half, z.data() + half, half));
      r_s[j] = f - ys[j];
      for (std::size_t u = 0; u < m; ++u) {
        if (z[u] <= 0.0) continue;
        const double s = net0.head_sign(u);
        gw2[u] += s * kappa * r_s[j] * z[u];
        simd::axpy(s * kappa * net0.w2[u] * inv_sqrt_d * r_s[j], xs.row(j).data(), gw1 + u * d, d);
      }
    }
  }

  FiniteNet net1 = net0;
  net1.add_scaled(g, -eta);

  // outer loss |f(X_T; theta_1) - Y_T|^2 and its parameter gradient v
  const std::vector<double> f_t = net1.forward_batch(target);
  double outer_loss = 0.0;
  std::vector<double> rho(target.size());
  for (std::size_t i = 0; i < target.size(); ++i) {
    rho[i] = f_t[i] - target.y[i];
    outer_loss += rho[i] * rho[i];
  }
  std::vector<double> v = loss_grad(net1, target, rho);
  simd::scale(2.0, v.data(), v.size());  // gradient of the unhalved squared norm

  OneStepGrad out;
  out.outer_loss = outer_loss;
  out.d_eta = -simd::dot(v.data(), g.data(), g.size());

  // d/dx_j of (g . v) with v held fixed:
  //   phi(x_j) grad_x f(x_j; theta0) + r_j grad_x phi(x_j),
  // phi(x) = grad_theta f(x; theta0) . v
  const double* vw1 = v.data();
  const double* vw2 = v.data() + m * d;
  out.d_xs = Matrix(xs.rows, d);
  std::vector<double> z(m);
  for (std::size_t j = 0; j < xs.rows; ++j) {
    preactivations(net0, xs.row(j), z);
    double phi = 0.0;
    std::vector<double> grad_f(d, 0.0), grad_phi(d, 0.0);
    for (std::size_t u = 0; u < m; ++u) {
      const double s = net0.head_sign(u);
      if (z[u] > 0.0) {
        const double vw1_dot_x = simd::dot(vw1 + u * d, xs.row(j).data(), d);
        phi += s * kappa * (vw2[u] * z[u] + net0.w2[u] * inv_sqrt_d * vw1_dot_x);
        simd::axpy(s * kappa * net0.w2[u] * inv_sqrt_d, net0.w1.row(u).data(), grad_f.data(), d);
        simd::axpy(s * kappa * inv_sqrt_d * vw2[u], net0.w1.row(u).data(), grad_phi.data(), d);
        simd::axpy(s * kappa * inv_sqrt_d * net0.w2[u], vw1 + u * d, grad_phi.data(), d);
      }
    }
    auto row = out.d_xs.row(j);
    for (std::size_t c = 0; c < d; ++c) row[c] = -eta * (phi * grad_f[c] + r_s[j] * grad_phi[c]);
  }
  return out;
}

OneStepDistillResult one_step_distill(const FiniteNet& net0, Matrix xs, std::span<const double> ys,
                                      const Dataset& target, double eta, double alpha,
                                      std::size_t outer_steps) {
  if (alpha < 0.0) throw std::invalid_argument("one_step_distill: alpha must be >= 0");
  OneStepDistillResult result;
  result.eta = eta;
  result.outer_loss.reserve(outer_steps);
  double initial = -1.0;
  for (std::size_t t = 0; t < outer_steps; ++t) {
    const OneStepGrad grad = one_step_outer_grad(net0, xs, ys, target, result.eta);
    result.outer_loss.push_back(grad.outer_loss);
    if (initial < 0.0) initial = grad.outer_loss;
    if (grad.outer_loss > 1e6 * std::max(initial, 1e-300))
      throw std::runtime_error("one_step_distill: outer loss diverged at step " +
                               std::to_string(t));
    for (std::size_t i = 0; i < xs.data.size(); ++i) xs.data[i] -= alpha * grad.d_xs.data[i];
    result.eta -= alpha * grad.d_eta;
  }
  result.xs = std::move(xs);
  return result;
}

}  // namespace ntklab
