#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ntklab/dataset.hpp"
#include "ntklab/regression.hpp"

namespace ntklab {

enum class AttackNorm { linf, l2 };
enum class AttackLoss { square, logistic };

struct AttackConfig {
  AttackNorm norm = AttackNorm::linf;
  double epsilon = 0.0;     // budget
  double alpha = 0.0;       // step size
  std::size_t steps = 0;
  AttackLoss loss = AttackLoss::square;
  bool random_start = false;
  std::uint64_t seed = 0;

  void validate() const;
};

std::string to_string(AttackNorm n);
std::string to_string(AttackLoss l);
AttackNorm attack_norm_from_string(const std::string& s);
AttackLoss attack_loss_from_string(const std::string& s);

// A scalar model with an input-gradient oracle; attacks work against any of
// these (kernel machine, linear classifier, eigenfeature, finite net).
struct DifferentiableModel {
  std::function<double(std::span<const double>)> value;
  std::function<std::vector<double>(std::span<const double>)> grad;
};

DifferentiableModel model_from_predictor(const KernelPredictor& p);
DifferentiableModel linear_model(std::vector<double> w);

double attack_loss_value(AttackLoss loss, double f, double y);
double attack_loss_dvalue(AttackLoss loss, double f, double y);  // d loss / d f

// Single signed-gradient step: x + epsilon * sign(grad_x loss(f(x), y)).
// sign(0) maps to 0, so zero-gradient coordinates stay put.
std::vector<double> fgsm(const DifferentiableModel& model, std::span<const double> x, double y,
                         const AttackConfig& cfg);

struct PgdResult {
  std::vector<double> x_adv;           // best iterate visited (never worse than x0)
  std::vector<double> objective_trace;  // objective value at each iterate, start included
};

// Iterated ascent with projection onto the ball around the starting point:
// coordinate clipping for l_inf, radial projection with normalized gradient
// steps for l2.
PgdResult pgd(const DifferentiableModel& model, std::span<const double> x, double y,
              const AttackConfig& cfg);

// Same machinery with a caller-supplied objective (features use this to
// minimize y * f by maximizing its negation).
PgdResult pgd_maximize(const std::function<double(std::span<const double>)>& objective,
                       const std::function<std::vector<double>(std::span<const double>)>& grad,
                       std::span<const double> x0, const AttackConfig& cfg);

struct AttackSummary {
  Dataset adversarial;
  double clean_acc = 0.0;
  double robust_acc = 0.0;
  std::vector<bool> flipped;  // prediction sign changed within budget
};

AttackSummary attack_dataset(const DifferentiableModel& model, const Dataset& data,
                             const AttackConfig& cfg);

}  // namespace ntklab
