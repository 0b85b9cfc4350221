#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "ntklab/dataset.hpp"

namespace ntklab {

struct ExperimentResult {
  std::string name;
  nlohmann::json config;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  struct Verdict {
    std::string name;
    bool pass = false;
    std::string detail;
  };
  std::vector<Verdict> verdicts;
  std::uint64_t seed = 0;

  bool all_pass() const;
  double cell(std::size_t row, const std::string& column) const;
  // writes <stem>.csv and <stem>.verdicts.json
  void write(const std::string& stem) const;
};

// Mean classifier w = (1/n) sum y_i x_i on the Gaussian model: per n,
// closed-form test error Phi(-<theta*, w> / (sigma |w|)) and a Monte-Carlo
// estimate, averaged over trials.
ExperimentResult standard_sample_complexity(std::size_t d, double c_const,
                                            const std::vector<std::size_t>& n_values,
                                            std::size_t trials, std::uint64_t seed);

// Same classifier under the closed-form worst l_inf perturbation
// delta = -epsilon y sign(w) (exact for linear classifiers).
ExperimentResult robust_sample_complexity(std::size_t d, double c_const, double epsilon,
                                          const std::vector<std::size_t>& n_values,
                                          std::size_t trials, std::uint64_t seed);

// Locates the n at which the robust error crosses 50% for each d and fits
// the log-log slope of n*(d); the mean-classifier theory gives 1/2.
ExperimentResult robust_crossing_scaling(const std::vector<std::size_t>& d_values, double c_const,
                                         double epsilon, std::size_t trials, std::uint64_t seed);

// Accuracy/robustness trade-off of the weak-feature average classifier vs
// the single strong feature, streamed so large d * n fits in memory.
ExperimentResult tradeoff_experiment(std::size_t d, std::size_t n, std::uint64_t seed);

// (1) GD on linear regression commutes with input rotations at machine
// precision; (2) the kernel predictor trained on a balanced basis-vector
// task vanishes on test points orthogonal to the training span.
ExperimentResult equivariance_check(std::size_t d, std::size_t n, double eta, std::size_t steps,
                                    std::uint64_t seed);

struct ConvConstructionConfig {
  std::size_t k = 3;      // pattern length, <= 10
  std::size_t q = 0;      // filter count; 0 means ceil(2^{k+3} log(2^k / delta))
  double delta = 0.05;    // coverage failure budget
  std::vector<int> g_table;  // 2^k values in {+-1}; empty means XOR parity
  std::uint64_t seed = 0;

  std::size_t resolved_q() const;
  std::vector<int> resolved_g() const;
};

// Random {+-1/k} filters with bias 1/k - 1: enumerates the pre-activation
// value lattice, measures the coupon-collector coverage rate at q filters,
// and reconstructs g from filter indicators.
ExperimentResult coupon_collector_conv(const ConvConstructionConfig& cfg, std::size_t trials);

}  // namespace ntklab
