#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ntklab/matrix.hpp"
#include "ntklab/rng.hpp"

namespace ntklab {

// An immutable design matrix with labels. Labels are stored as reals even
// for classification (the regression machinery consumes them unchanged);
// sign() is applied only when accuracies are evaluated.
struct Dataset {
  Matrix x;  // n rows, d columns
  std::vector<double> y;
  std::string name;
  std::uint64_t seed = 0;
  std::string generator = "file";

  std::size_t size() const { return x.rows; }
  std::size_t dim() const { return x.cols; }

  // Validates n >= 1, d >= 1, matching label count, finiteness, and that no
  // two rows are identical (duplicates are rejected, not deduplicated).
  static Dataset create(Matrix x, std::vector<double> y, std::string name, std::uint64_t seed,
                        std::string generator);

  // Throws unless every label is exactly +1 or -1.
  void require_classification_labels() const;

  Dataset subset(const std::vector<std::size_t>& rows, std::string new_name) const;
};

struct GaussianModelConfig {
  std::size_t d = 2;       // input dimension
  double sigma = 1.0;      // per-coordinate noise level, >= 0
  double c_const = 1.0;    // bookkeeping constant in sigma <= c * d^(1/4)
  std::size_t n = 1;
  std::uint64_t seed = 0;

  // mean vector is pinned to (sqrt(d), 0, ..., 0)
  double theta_star_first() const;
  static GaussianModelConfig with_c(std::size_t d, double c, std::size_t n, std::uint64_t seed);
};

struct TradeoffModelConfig {
  std::size_t d = 10;        // number of weakly correlated features (columns 1..d)
  double p_flip = 0.1;       // P(x0 = -y)
  double mean_scale = 10.0;  // weak-feature mean is mean_scale * y / sqrt(d)
  std::size_t n = 1;
  std::uint64_t seed = 0;
};

// y ~ Unif{+-1}, x ~ N(y * theta*, sigma^2 I), theta* = (sqrt(d), 0, ..., 0).
Dataset gen_gaussian_model(const GaussianModelConfig& cfg);

// x0 = y w.p. 1 - p_flip else -y; x1..xd iid N(mean_scale * y / sqrt(d), 1).
Dataset gen_tradeoff_model(const TradeoffModelConfig& cfg);
// Streaming form used when n x d is too large to materialize: fills `row`
// (d+1 entries) and returns the label for point `index`. Identical values to
// gen_tradeoff_model at the same cfg/index.
double tradeoff_row(const TradeoffModelConfig& cfg, std::size_t index, std::span<double> row);

// Points e_i * y_i on distinct canonical basis directions; requires n <= d.
Dataset gen_basis_vector_task(std::size_t d, std::size_t n, std::uint64_t seed);
// Same construction with caller-chosen labels (one per point).
Dataset gen_basis_vector_task_labeled(std::size_t d, const std::vector<double>& labels,
                                      std::uint64_t seed);

// x ~ N(0, I_{2d}), y = sign(sum_{i<d} x_i^2 - sum_{i>=d} x_i^2); exact ties
// are resampled.
Dataset gen_quadratic_task(std::size_t half_d, std::size_t n, std::uint64_t seed);

// x ~ Unif{+-1}^d, y = g(x_{j*}, ..., x_{j*+k-1}) with g given as a truth
// table of 2^k values in {+-1} indexed by bits ((x+1)/2), most significant
// bit first. j_star is 1-based.
Dataset gen_hidden_pattern_task(std::size_t d, std::size_t k, std::size_t j_star,
                                const std::vector<int>& g_table, std::size_t n,
                                std::uint64_t seed);

// Binary subset of an IDX image/label pair: pixels scaled to [0,1], rows
// flattened, labels mapped to +1 (class_a) / -1 (class_b). Takes the first
// n_per_class examples of each class in file order.
Dataset load_idx_subset(const std::string& images_path, const std::string& labels_path,
                        int class_a, int class_b, std::size_t n_per_class);

// header x0,...,x{d-1},y plus a JSON metadata sidecar (<path>.meta.json).
void export_dataset_csv(const Dataset& ds, const std::string& path);

}  // namespace ntklab
