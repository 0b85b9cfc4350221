#pragma once

#include <cstdint>
#include <vector>

#include "ntklab/attack.hpp"
#include "ntklab/dataset.hpp"
#include "ntklab/kernel.hpp"
#include "ntklab/regression.hpp"

namespace ntklab {

// Learnable support set for kernel-inducing-point distillation. Unlike
// Dataset, rows are free to move anywhere during optimization.
struct SupportSet {
  Matrix xs;               // s x d
  std::vector<double> ys;  // length s
  bool learn_inputs = true;
  bool learn_labels = false;
  double ridge = 0.0;  // added to K(X_S, X_S); never adjusted silently
  std::size_t step = 0;

  std::size_t size() const { return xs.rows; }
  Dataset as_dataset(const std::string& name) const;
};

struct SingularSupportGram : std::runtime_error {
  std::size_t iteration;
  explicit SingularSupportGram(std::size_t iter);
};

// |Y_T - K(X_T, X_S) (K(X_S, X_S) + ridge I)^{-1} Y_S|^2
double kip_loss(const KernelSpec& spec, const SupportSet& support, const Dataset& target);

struct KipGrad {
  Matrix d_xs;
  std::vector<double> d_ys;
  double loss = 0.0;
};

// Analytic gradient through the kernel entries and the inverse
// (dK^{-1} = -K^{-1} dK K^{-1}); finite-difference checked in tests.
KipGrad kip_grad(const KernelSpec& spec, const SupportSet& support, const Dataset& target);

// Kernel regression predictor fit on the support set at its ridge.
KernelPredictor support_predictor(const KernelSpec& spec, const SupportSet& support,
                                  const std::string& name = "support");

enum class SupportInit { subsample, noise };

struct DistillOptions {
  std::size_t s = 1;
  SupportInit init = SupportInit::subsample;
  double lr = 0.01;
  std::size_t iters = 100;
  std::uint64_t seed = 0;
  double ridge = -1.0;  // < 0: auto 1e-6 * trace(K_SS) / s, refreshed per iteration
  bool learn_labels = false;
  const Dataset* heldout = nullptr;  // optional per-iteration accuracy tracking
};

struct DistillTrace {
  std::vector<double> loss;
  std::vector<double> grad_norm;
  std::vector<double> heldout_acc;  // empty unless options.heldout is set
  std::size_t best_iteration = 0;
};

// Gradient descent on kip_loss with halving backtracking (at most 20
// halvings per step); returns the best-loss iterate, not the last.
std::pair<SupportSet, DistillTrace> distill(const KernelSpec& spec, const Dataset& target,
                                            const DistillOptions& options);

// Worst-case perturbations of the target inputs found by per-point PGD
// against the support predictor.
Matrix adv_perturb_targets(const KernelSpec& spec, const SupportSet& support,
                           const Dataset& target, const AttackConfig& attack);

// Unsquared norm |Y_T - K(X_T + delta~, X_S) (K_SS + ridge I)^{-1} Y_S|_2
// at the PGD-found delta~. The squared form used inside the optimizer is
// adv_kip_loss_sq.
double adv_kip_loss(const KernelSpec& spec, const SupportSet& support, const Dataset& target,
                    const AttackConfig& attack);
double adv_kip_loss_sq(const KernelSpec& spec, const SupportSet& support, const Dataset& target,
                       const AttackConfig& attack);

// Alternates cold-start inner PGD on the target perturbations with an outer
// descent step on X_S holding the perturbations fixed.
std::pair<SupportSet, DistillTrace> adv_distill(const KernelSpec& spec, const Dataset& target,
                                                const AttackConfig& attack,
                                                const DistillOptions& options);

}  // namespace ntklab
