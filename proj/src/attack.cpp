#include "ntklab/attack.hpp"

#include <cmath>
#include <stdexcept>

#include "ntklab/parallel.hpp"
#include "ntklab/simd.hpp"

namespace ntklab {

void AttackConfig::validate() const {
  if (epsilon < 0.0) throw std::invalid_argument("AttackConfig: epsilon must be >= 0");
  if (steps > 0 && alpha <= 0.0)
    throw std::invalid_argument("AttackConfig: alpha must be positive when steps > 0");
}

std::string to_string(AttackNorm n) { return n == AttackNorm::linf ? "linf" : "l2"; }
std::string to_string(AttackLoss l) { return l == AttackLoss::square ? "square" : "logistic"; }

AttackNorm attack_norm_from_string(const std::string& s) {
  if (s == "linf") return AttackNorm::linf;
  if (s == "l2") return AttackNorm::l2;
  throw std::invalid_argument("unknown attack norm '" + s + "'");
}

AttackLoss attack_loss_from_string(const std::string& s) {
  if (s == "square") return AttackLoss::square;
  if (s == "logistic") return AttackLoss::logistic;
  throw std::invalid_argument("unknown attack loss '" + s + "'");
}

DifferentiableModel model_from_predictor(const KernelPredictor& p) {
  DifferentiableModel m;
  m.value = [p](std::span<const double> x) { return predict_one(p, x); };
  m.grad = [p](std::span<const double> x) { return predict_grad(p, x); };
  return m;
}

DifferentiableModel linear_model(std::vector<double> w) {
  DifferentiableModel m;
  m.value = [w](std::span<const double> x) { return simd::dot(w.data(), x.data(), x.size()); };
  m.grad = [w](std::span<const double>) { return w; };
  return m;
}

double attack_loss_value(AttackLoss loss, double f, double y) {
  switch (loss) {
    case AttackLoss::square:
      return (f - y) * (f - y);
    case AttackLoss::logistic:
      return std::log1p(std::exp(-y * f));
  }
  return 0.0;
}

double attack_loss_dvalue(AttackLoss loss, double f, double y) {
  switch (loss) {
    case AttackLoss::square:
      return 2.0 * (f - y);
    case AttackLoss::logistic:
      return -y / (1.0 + std::exp(y * f));
  }
  return 0.0;
}

namespace {

inline double sign_or_zero(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void project(std::span<double> x, std::span<const double> x0, AttackNorm norm, double eps) {
  if (norm == AttackNorm::linf) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = std::min(std::max(x[i], x0[i] - eps), x0[i] + eps);
    }
  } else {
    double dist_sq = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - x0[i];
      dist_sq += d * d;
    }
    const double dist = std::sqrt(dist_sq);
    if (dist > eps) {
      const double shrink = eps / dist;
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = x0[i] + (x[i] - x0[i]) * shrink;
    }
  }
}

}  // namespace

std::vector<double> fgsm(const DifferentiableModel& model, std::span<const double> x, double y,
                         const AttackConfig& cfg) {
  cfg.validate();
  const double f = model.value(x);
  const double dl = attack_loss_dvalue(cfg.loss, f, y);
  const std::vector<double> g = model.grad(x);
  std::vector<double> out(x.begin(), x.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] += cfg.epsilon * sign_or_zero(dl * g[i]);
  }
  return out;
}

PgdResult pgd_maximize(const std::function<double(std::span<const double>)>& objective,
                       const std::function<std::vector<double>(std::span<const double>)>& grad,
                       std::span<const double> x0, const AttackConfig& cfg) {
  cfg.validate();
  std::vector<double> x(x0.begin(), x0.end());
  if (cfg.random_start && cfg.epsilon > 0.0) {
    Rng rng = Rng(cfg.seed).split(0xadd);
    if (cfg.norm == AttackNorm::linf) {
      for (double& v : x) v += cfg.epsilon * (2.0 * rng.uniform() - 1.0);
    } else {
      // direction uniform on the sphere, radius by the d-th root rule
      std::vector<double> dir(x.size());
      for (double& v : dir) v = rng.normal();
      const double nrm = std::max(norm2(dir), 1e-300);
      const double radius =
          cfg.epsilon * std::pow(rng.uniform(), 1.0 / static_cast<double>(x.size()));
      for (std::size_t i = 0; i < x.size(); ++i) x[i] += radius * dir[i] / nrm;
    }
    project(x, x0, cfg.norm, cfg.epsilon);
  }

  PgdResult result;
  result.objective_trace.reserve(cfg.steps + 1);
  double best = objective(x);
  result.objective_trace.push_back(best);
  result.x_adv = x;
  // keep the untouched start competitive when a random start was used
  if (cfg.random_start) {
    const double at_start = objective(x0);
    if (at_start > best) {
      best = at_start;
      result.x_adv.assign(x0.begin(), x0.end());
    }
  }

  for (std::size_t t = 0; t < cfg.steps; ++t) {
    const std::vector<double> g = grad(x);
    if (cfg.norm == AttackNorm::linf) {
      for (std::size_t i = 0; i < x.size(); ++i) x[i] += cfg.alpha * sign_or_zero(g[i]);
    } else {
      const double nrm = norm2(g);
      if (nrm > 0.0) {
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += cfg.alpha * g[i] / nrm;
      }
    }
    project(x, x0, cfg.norm, cfg.epsilon);
    const double val = objective(x);
    result.objective_trace.push_back(val);
    if (val > best) {
      best = val;
      result.x_adv = x;
    }
  }
  return result;
}

PgdResult pgd(const DifferentiableModel& model, std::span<const double> x, double y,
              const AttackConfig& cfg) {
  auto objective = [&](std::span<const double> p) {
    return attack_loss_value(cfg.loss, model.value(p), y);
  };
  auto grad = [&](std::span<const double> p) {
    const double dl = attack_loss_dvalue(cfg.loss, model.value(p), y);
    std::vector<double> g = model.grad(p);
    simd::scale(dl, g.data(), g.size());
    return g;
  };
  return pgd_maximize(objective, grad, x, cfg);
}

AttackSummary attack_dataset(const DifferentiableModel& model, const Dataset& data,
                             const AttackConfig& cfg) {
  cfg.validate();
  data.require_classification_labels();
  Matrix adv(data.size(), data.dim());
  std::vector<int> clean_ok(data.size(), 0), robust_ok(data.size(), 0), flip(data.size(), 0);
  parallel_for(data.size(), [&](std::size_t i0, std::size_t i1) {
    for (std::size_t i = i0; i < i1; ++i) {
      AttackConfig point_cfg = cfg;
      point_cfg.seed = Rng(cfg.seed).split(i).next_u64();
      const auto x = data.x.row(i);
      const double y = data.y[i];
      const double clean_sign = sign_or_zero(model.value(x));
      const PgdResult res = pgd(model, x, y, point_cfg);
      const double adv_sign = sign_or_zero(model.value(res.x_adv));
      std::copy(res.x_adv.begin(), res.x_adv.end(), adv.row(i).begin());
      clean_ok[i] = clean_sign == y ? 1 : 0;
      robust_ok[i] = adv_sign == y ? 1 : 0;
      flip[i] = clean_sign != adv_sign ? 1 : 0;
    }
  });
  AttackSummary summary;
  std::size_t clean = 0, robust = 0;
  summary.flipped.resize(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    clean += clean_ok[i];
    robust += robust_ok[i];
    summary.flipped[i] = flip[i] != 0;
  }
  summary.clean_acc = static_cast<double>(clean) / static_cast<double>(data.size());
  summary.robust_acc = static_cast<double>(robust) / static_cast<double>(data.size());
  // adversarial points can collide only in degenerate cases; bypass the
  // duplicate check by perturbation bookkeeping through a raw Dataset
  Dataset adv_ds;
  adv_ds.x = std::move(adv);
  adv_ds.y = data.y;
  adv_ds.name = data.name + "_adv";
  adv_ds.seed = cfg.seed;
  adv_ds.generator = "attack";
  summary.adversarial = std::move(adv_ds);
  return summary;
}

}  // namespace ntklab
