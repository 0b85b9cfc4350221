#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "ntklab/attack.hpp"
#include "ntklab/dataset.hpp"
#include "ntklab/kernel.hpp"

namespace ntklab {

// One rank-one component of the kernel machine along a Gram eigenvector:
//   f_i(x) = K(x, X_T)^T (lambda_i^{-1} V_i V_i^T) Y_T,
// stored through its kernel-space coefficients c_i. scale/offset hold an
// optional affine normalization (identity by default).
struct FeatureFunction {
  std::size_t index = 0;  // position in the descending spectrum
  double lambda = 0.0;
  std::vector<double> eigvec;
  std::vector<double> coeff;  // lambda^{-1} (V_i . Y) V_i  (ridge-shifted if used)
  double scale = 1.0;
  double offset = 0.0;
};

struct FeatureBasis {
  KernelSpec spec;
  Dataset train;
  std::vector<FeatureFunction> features;
  std::size_t dropped_zero_modes = 0;
  double ridge = 0.0;
};

// Features for every eigenvalue above 1e-10 * lambda_max (at ridge 0; with
// a positive ridge all modes are kept and the inverse is ridge-shifted, so
// the sum reconstructs the ridge predictor).
FeatureBasis decompose(const KernelSpec& spec, const Dataset& train, double ridge = 0.0);

double feature_eval(const FeatureBasis& basis, const FeatureFunction& f, std::span<const double> x);
std::vector<double> feature_grad(const FeatureBasis& basis, const FeatureFunction& f,
                                 std::span<const double> x);

// Affine rescaling so the feature has empirical mean 0 and second moment 1
// over the reference set. Idempotent; throws on a constant feature.
FeatureFunction normalize_feature(const FeatureBasis& basis, FeatureFunction f,
                                  const Dataset& reference);

struct Usefulness {
  double value = 0.0;  // empirical mean of y * f(x) (or its PGD-minimized form)
  double std_err = 0.0;
};

// rho: empirical mean of y * f(x) over the evaluation set.
Usefulness usefulness(const FeatureBasis& basis, const FeatureFunction& f, const Dataset& eval);

// gamma estimate: mean over the evaluation set of the PGD-minimized
// y * f(x + delta). PGD finds some perturbation, not the worst one, so this
// is an upper bound on the true robust usefulness; outputs are labeled so.
Usefulness robust_usefulness(const FeatureBasis& basis, const FeatureFunction& f,
                             const Dataset& eval, const AttackConfig& attack);

enum class FeatureClass { robustly_useful, useful_nonrobust, not_useful };
std::string to_string(FeatureClass c);

struct FeatureReportRow {
  std::size_t index = 0;
  double lambda = 0.0;
  double rho = 0.0;
  double rho_se = 0.0;
  double gamma = 0.0;
  double gamma_se = 0.0;
  FeatureClass cls = FeatureClass::not_useful;
};

struct FeatureReport {
  std::vector<FeatureReportRow> rows;
  double rho_threshold = 0.05;
  double gamma_threshold = 0.0;
  std::size_t dropped_zero_modes = 0;
  std::string gamma_note = "gamma is a PGD upper bound on the true robust usefulness";
};

// Normalizes each feature on the evaluation set, measures rho and gamma,
// and classifies: rho >= rho_thr and gamma > gamma_thr -> robustly useful;
// rho >= rho_thr otherwise -> useful non-robust; else not useful. When
// image_dir is nonempty and the input is square, writes per-feature input
// gradient maps (PGM) at the dataset mean plus an SVG montage.
FeatureReport feature_report(const KernelSpec& spec, const Dataset& train, const Dataset& eval,
                             const AttackConfig& attack, double rho_threshold,
                             double gamma_threshold, const std::string& image_dir = "");

nlohmann::json feature_report_to_json(const FeatureReport& report);
FeatureReport feature_report_from_json(const nlohmann::json& j);

}  // namespace ntklab
