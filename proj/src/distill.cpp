#include "ntklab/distill.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "ntklab/linalg.hpp"
#include "ntklab/parallel.hpp"
#include "ntklab/simd.hpp"

namespace ntklab {

namespace {

Dataset raw_dataset(Matrix x, std::vector<double> y, std::string name) {
  // learned support points may coincide; skip Dataset::create's duplicate check
  Dataset ds;
  ds.x = std::move(x);
  ds.y = std::move(y);
  ds.name = std::move(name);
  ds.generator = "support_set";
  return ds;
}

}  // namespace

Dataset SupportSet::as_dataset(const std::string& name) const {
  return raw_dataset(xs, ys, name);
}

SingularSupportGram::SingularSupportGram(std::size_t iter)
    : std::runtime_error("support Gram singular at iteration " + std::to_string(iter) +
                         "; optimization cannot continue at ridge 0"),
      iteration(iter) {}

namespace {

struct KipCore {
  Matrix g;                   // K_SS + ridge I
  Matrix l;                   // cholesky of g
  Matrix k_ts;                // n x s
  std::vector<double> alpha;  // G^{-1} Y_S
  std::vector<double> residual;  // Y_T - K_TS alpha
  double loss = 0.0;
};

KipCore kip_core(const KernelSpec& spec, const SupportSet& support, const Matrix& target_x,
                 std::span<const double> target_y) {
  spec.validate();
  const std::size_t s = support.size();
  const std::size_t n = target_x.rows;
  if (support.xs.cols != spec.input_dim || target_x.cols != spec.input_dim)
    throw std::invalid_argument("kip: dimension mismatch with kernel input_dim");
  if (support.ys.size() != s) throw std::invalid_argument("kip: support label count");
  const double inv_d = 1.0 / static_cast<double>(spec.input_dim);

  std::vector<double> qs(s);
  for (std::size_t j = 0; j < s; ++j) qs[j] = simd::sum_sq(support.xs.row(j)) * inv_d;

  KipCore core;
  core.g = Matrix(s, s);
  for (std::size_t j = 0; j < s; ++j) {
    for (std::size_t l2 = j; l2 < s; ++l2) {
      const double qab = simd::dot(support.xs.row(j), support.xs.row(l2)) * inv_d;
      const double v = ntk_eval_dual(spec, qs[j], qs[l2], qab).value;
      core.g(j, l2) = v;
      core.g(l2, j) = v;
    }
    core.g(j, j) += support.ridge;
  }
  try {
    core.l = cholesky(core.g);
  } catch (const NotPositiveDefinite&) {
    throw SingularSupportGram(support.step);
  }
  core.alpha = cholesky_solve(core.l, support.ys);

  core.k_ts = Matrix(n, s);
  parallel_for(n, [&](std::size_t i0, std::size_t i1) {
    for (std::size_t i = i0; i < i1; ++i) {
      const double qt = simd::sum_sq(target_x.row(i)) * inv_d;
      for (std::size_t j = 0; j < s; ++j) {
        const double qab = simd::dot(target_x.row(i), support.xs.row(j)) * inv_d;
        core.k_ts(i, j) = ntk_eval_dual(spec, qt, qs[j], qab).value;
      }
    }
  });

  core.residual.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    core.residual[i] = target_y[i] - simd::dot(core.k_ts.row(i), core.alpha);
    core.loss += core.residual[i] * core.residual[i];
  }
  return core;
}

KipGrad kip_grad_impl(const KernelSpec& spec, const SupportSet& support, const Matrix& target_x,
                      std::span<const double> target_y) {
  const std::size_t s = support.size();
  const std::size_t n = target_x.rows;
  const std::size_t d = spec.input_dim;
  const double inv_d = 1.0 / static_cast<double>(d);
  const KipCore core = kip_core(spec, support, target_x, target_y);

  // b = G^{-1} K_TS^T e
  std::vector<double> w(s, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    simd::axpy(core.residual[i], core.k_ts.row(i).data(), w.data(), s);
  const std::vector<double> b = cholesky_solve(core.l, w);

  std::vector<double> qs(s);
  for (std::size_t j = 0; j < s; ++j) qs[j] = simd::sum_sq(support.xs.row(j)) * inv_d;

  KipGrad out;
  out.loss = core.loss;
  out.d_xs = Matrix(s, d);
  parallel_for(s, [&](std::size_t j0, std::size_t j1) {
    for (std::size_t j = j0; j < j1; ++j) {
      auto xj = support.xs.row(j);
      auto gj = out.d_xs.row(j);
      // target coupling: -2 alpha_j sum_i e_i grad_{x_j} K(t_i, x_j)
      for (std::size_t i = 0; i < n; ++i) {
        const auto ti = target_x.row(i);
        const double qt = simd::sum_sq(ti) * inv_d;
        const double qab = simd::dot(ti, xj) * inv_d;
        const NtkValue kd = ntk_eval_dual(spec, qt, qs[j], qab);
        const double ce = -2.0 * core.alpha[j] * core.residual[i];
        for (std::size_t c = 0; c < d; ++c) {
          gj[c] += ce * (kd.d_qb * 2.0 * xj[c] + kd.d_qab * ti[c]) * inv_d;
        }
      }
      // support coupling: +2 [(b_j a_l + b_l a_j) grad_1 K(x_j, x_l) + b_j a_j dK(x_j,x_j)/dx_j]
      for (std::size_t l2 = 0; l2 < s; ++l2) {
        if (l2 == j) {
          const NtkValue kd = ntk_eval_dual(spec, qs[j], qs[j], qs[j]);
          const double cw =
              2.0 * b[j] * core.alpha[j] * (kd.d_qa + kd.d_qb + kd.d_qab) * 2.0 * inv_d;
          for (std::size_t c = 0; c < d; ++c) gj[c] += cw * xj[c];
        } else {
          const auto xl = support.xs.row(l2);
          const double qab = simd::dot(xj, xl) * inv_d;
          const NtkValue kd = ntk_eval_dual(spec, qs[j], qs[l2], qab);
          const double cw = 2.0 * (b[j] * core.alpha[l2] + b[l2] * core.alpha[j]);
          for (std::size_t c = 0; c < d; ++c) {
            gj[c] += cw * (kd.d_qa * 2.0 * xj[c] + kd.d_qab * xl[c]) * inv_d;
          }
        }
      }
    }
  });
  out.d_ys.assign(s, 0.0);
  for (std::size_t j = 0; j < s; ++j) out.d_ys[j] = -2.0 * b[j];
  return out;
}

}  // namespace

double kip_loss(const KernelSpec& spec, const SupportSet& support, const Dataset& target) {
  return kip_core(spec, support, target.x, target.y).loss;
}

KipGrad kip_grad(const KernelSpec& spec, const SupportSet& support, const Dataset& target) {
  return kip_grad_impl(spec, support, target.x, target.y);
}

KernelPredictor support_predictor(const KernelSpec& spec, const SupportSet& support,
                                  const std::string& name) {
  const KipCore core = kip_core(spec, support, Matrix(0, spec.input_dim), {});
  KernelPredictor p;
  p.spec = spec;
  p.support = support.as_dataset(name);
  p.alpha = core.alpha;
  p.ridge = support.ridge;
  return p;
}

namespace {

double auto_ridge(const KernelSpec& spec, const Matrix& xs) {
  const double inv_d = 1.0 / static_cast<double>(spec.input_dim);
  double trace = 0.0;
  for (std::size_t j = 0; j < xs.rows; ++j) {
    const double q = simd::sum_sq(xs.row(j)) * inv_d;
    trace += ntk_eval_dual(spec, q, q, q).value;
  }
  return 1e-6 * trace / static_cast<double>(xs.rows);
}

SupportSet init_support(const Dataset& target, const DistillOptions& options) {
  if (options.s < 1 || options.s > target.size())
    throw std::invalid_argument("distill: need 1 <= s <= n");
  target.require_classification_labels();
  SupportSet support;
  support.learn_labels = options.learn_labels;
  support.ys.resize(options.s);
  const std::size_t n_pos = (options.s + 1) / 2;
  for (std::size_t j = 0; j < options.s; ++j) support.ys[j] = j < n_pos ? 1.0 : -1.0;

  Rng rng = Rng(options.seed).split(0xd157);
  if (options.init == SupportInit::subsample) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < target.size(); ++i) (target.y[i] > 0 ? pos : neg).push_back(i);
    auto shuffle = [&rng](std::vector<std::size_t>& v) {
      for (std::size_t i = 0; i + 1 < v.size(); ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(v.size() - i));
        std::swap(v[i], v[j]);
      }
    };
    shuffle(pos);
    shuffle(neg);
    if (pos.size() < n_pos || neg.size() < options.s - n_pos)
      throw std::invalid_argument("distill: not enough points per class for a balanced subsample");
    support.xs = Matrix(options.s, target.dim());
    for (std::size_t j = 0; j < options.s; ++j) {
      const std::size_t src = j < n_pos ? pos[j] : neg[j - n_pos];
      std::copy_n(target.x.row(src).data(), target.dim(), support.xs.row(j).data());
    }
  } else {
    // noise init matched to the target's scale
    double mean = simd::sum(target.x.data.data(), target.x.data.size()) /
                  static_cast<double>(target.x.data.size());
    double var = 0.0;
    for (double v : target.x.data) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(target.x.data.size()));
    support.xs = Matrix(options.s, target.dim());
    for (double& v : support.xs.data) v = mean + sd * rng.normal();
  }
  return support;
}


std::pair<SupportSet, DistillTrace> descend(const KernelSpec& spec, const Dataset& target,
                                            const AttackConfig* attack,
                                            const DistillOptions& options) {
  SupportSet support = init_support(target, options);
  auto refresh_ridge = [&](SupportSet& s) {
    s.ridge = options.ridge < 0.0 ? auto_ridge(spec, s.xs) : options.ridge;
  };
  refresh_ridge(support);

  DistillTrace trace;
  SupportSet best = support;
  double best_loss = std::numeric_limits<double>::infinity();
  double lr = options.lr;

  for (std::size_t iter = 0; iter < options.iters; ++iter) {
    support.step = iter;
    // cold-start inner maximization: fresh perturbations from delta = 0
    Matrix target_x = target.x;
    if (attack != nullptr) {
      target_x = adv_perturb_targets(spec, support, target, *attack);
    }
    const KipGrad grad = kip_grad_impl(spec, support, target_x, target.y);

    double gn_sq = simd::sum_sq(grad.d_xs.data.data(), grad.d_xs.data.size());
    if (support.learn_labels) gn_sq += simd::sum_sq(grad.d_ys.data(), grad.d_ys.size());
    trace.loss.push_back(grad.loss);
    trace.grad_norm.push_back(std::sqrt(gn_sq));
    if (options.heldout != nullptr) {
      trace.heldout_acc.push_back(accuracy(support_predictor(spec, support), *options.heldout));
    }
    if (grad.loss < best_loss) {
      best_loss = grad.loss;
      best = support;
      trace.best_iteration = iter;
    }

    // halving backtracking against the same (fixed-perturbation) objective
    SupportSet candidate = support;
    for (int halving = 0; halving <= 20; ++halving) {
      candidate = support;
      if (candidate.learn_inputs) {
        simd::axpy(-lr, grad.d_xs.data.data(), candidate.xs.data.data(), candidate.xs.data.size());
      }
      if (candidate.learn_labels) {
        simd::axpy(-lr, grad.d_ys.data(), candidate.ys.data(), candidate.ys.size());
      }
      refresh_ridge(candidate);
      const double candidate_loss =
          kip_core(spec, candidate, target_x, target.y).loss;
      if (candidate_loss <= grad.loss || halving == 20) break;
      lr *= 0.5;
    }
    support = std::move(candidate);
  }
  support.step = options.iters;
  best.step = options.iters;
  return {best, trace};
}

}  // namespace

Matrix adv_perturb_targets(const KernelSpec& spec, const SupportSet& support,
                           const Dataset& target, const AttackConfig& attack) {
  const KernelPredictor predictor = support_predictor(spec, support);
  const DifferentiableModel model = model_from_predictor(predictor);
  Matrix adv(target.size(), target.dim());
  parallel_for(target.size(), [&](std::size_t i0, std::size_t i1) {
    for (std::size_t i = i0; i < i1; ++i) {
      AttackConfig point_cfg = attack;
      point_cfg.seed = Rng(attack.seed).split(i).next_u64();
      const PgdResult res = pgd(model, target.x.row(i), target.y[i], point_cfg);
      std::copy(res.x_adv.begin(), res.x_adv.end(), adv.row(i).begin());
    }
  });
  return adv;
}

double adv_kip_loss_sq(const KernelSpec& spec, const SupportSet& support, const Dataset& target,
                       const AttackConfig& attack) {
  const Matrix adv = adv_perturb_targets(spec, support, target, attack);
  return kip_core(spec, support, adv, target.y).loss;
}

double adv_kip_loss(const KernelSpec& spec, const SupportSet& support, const Dataset& target,
                    const AttackConfig& attack) {
  return std::sqrt(adv_kip_loss_sq(spec, support, target, attack));
}

std::pair<SupportSet, DistillTrace> distill(const KernelSpec& spec, const Dataset& target,
                                            const DistillOptions& options) {
  return descend(spec, target, nullptr, options);
}

std::pair<SupportSet, DistillTrace> adv_distill(const KernelSpec& spec, const Dataset& target,
                                                const AttackConfig& attack,
                                                const DistillOptions& options) {
  attack.validate();
  return descend(spec, target, &attack, options);
}

}  // namespace ntklab
