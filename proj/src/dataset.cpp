#include "ntklab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"
#include "ntklab/io.hpp"

namespace ntklab {

namespace {

// FNV-1a over a row's values with -0.0 canonicalized to +0.0, so the
// duplicate check sees numerical rather than bitwise identity.
std::uint64_t row_hash(std::span<const double> row) {
  std::uint64_t h = 1469598103934665603ull;
  for (double raw : row) {
    const double v = raw == 0.0 ? 0.0 : raw;
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof(double));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 1099511628211ull;
    }
  }
  return h;
}

bool rows_equal(std::span<const double> a, std::span<const double> b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return false;
  }
  return true;
}

void reject_duplicate_rows(const Matrix& x) {
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;
  buckets.reserve(x.rows * 2);
  for (std::size_t i = 0; i < x.rows; ++i) {
    auto& bucket = buckets[row_hash(x.row(i))];
    for (std::size_t j : bucket) {
      if (rows_equal(x.row(i), x.row(j))) {
        throw std::invalid_argument("Dataset: rows " + std::to_string(j) + " and " +
                                    std::to_string(i) + " are identical");
      }
    }
    bucket.push_back(i);
  }
}

}  // namespace

Dataset Dataset::create(Matrix x, std::vector<double> y, std::string name, std::uint64_t seed,
                        std::string generator) {
  if (x.rows == 0 || x.cols == 0) throw std::invalid_argument("Dataset: empty design matrix");
  if (y.size() != x.rows) throw std::invalid_argument("Dataset: label count mismatch");
  for (double v : x.data)
    if (!std::isfinite(v)) throw std::invalid_argument("Dataset: non-finite feature");
  for (double v : y)
    if (!std::isfinite(v)) throw std::invalid_argument("Dataset: non-finite label");
  reject_duplicate_rows(x);
  Dataset ds;
  ds.x = std::move(x);
  ds.y = std::move(y);
  ds.name = std::move(name);
  ds.seed = seed;
  ds.generator = std::move(generator);
  return ds;
}

void Dataset::require_classification_labels() const {
  for (double v : y) {
    if (v != 1.0 && v != -1.0)
      throw std::invalid_argument("Dataset '" + name + "': labels are not exactly +-1");
  }
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows, std::string new_name) const {
  Matrix xs(rows.size(), dim());
  std::vector<double> ys(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= size()) throw std::out_of_range("Dataset::subset: row index");
    std::copy_n(x.row(rows[i]).data(), dim(), xs.row(i).data());
    ys[i] = y[rows[i]];
  }
  return create(std::move(xs), std::move(ys), std::move(new_name), seed, generator);
}

double GaussianModelConfig::theta_star_first() const { return std::sqrt(static_cast<double>(d)); }

GaussianModelConfig GaussianModelConfig::with_c(std::size_t d, double c, std::size_t n,
                                                std::uint64_t seed) {
  GaussianModelConfig cfg;
  cfg.d = d;
  cfg.c_const = c;
  cfg.sigma = c * std::pow(static_cast<double>(d), 0.25);
  cfg.n = n;
  cfg.seed = seed;
  return cfg;
}

Dataset gen_gaussian_model(const GaussianModelConfig& cfg) {
  if (cfg.d < 1 || cfg.n < 1) throw std::invalid_argument("gen_gaussian_model: invalid dimensions");
  if (cfg.sigma < 0.0) throw std::invalid_argument("gen_gaussian_model: sigma < 0");
  const double mean = cfg.theta_star_first();
  Matrix x(cfg.n, cfg.d);
  std::vector<double> y(cfg.n);
  Rng root(cfg.seed);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    Rng point = root.split(i);
    y[i] = point.sign();
    auto row = x.row(i);
    row[0] = y[i] * mean + cfg.sigma * point.normal();
    for (std::size_t j = 1; j < cfg.d; ++j) row[j] = cfg.sigma * point.normal();
  }
  return Dataset::create(std::move(x), std::move(y), "gaussian_model", cfg.seed, "gaussian_model");
}

double tradeoff_row(const TradeoffModelConfig& cfg, std::size_t index, std::span<double> row) {
  if (row.size() != cfg.d + 1) throw std::invalid_argument("tradeoff_row: row span size");
  Rng point = Rng(cfg.seed).split(index);
  const double y = point.sign();
  row[0] = point.uniform() < cfg.p_flip ? -y : y;
  const double mean = cfg.mean_scale * y / std::sqrt(static_cast<double>(cfg.d));
  for (std::size_t j = 1; j <= cfg.d; ++j) row[j] = mean + point.normal();
  return y;
}

Dataset gen_tradeoff_model(const TradeoffModelConfig& cfg) {
  if (cfg.d < 1 || cfg.n < 1) throw std::invalid_argument("gen_tradeoff_model: invalid dimensions");
  if (cfg.p_flip < 0.0 || cfg.p_flip > 1.0)
    throw std::invalid_argument("gen_tradeoff_model: p_flip outside [0,1]");
  Matrix x(cfg.n, cfg.d + 1);
  std::vector<double> y(cfg.n);
  for (std::size_t i = 0; i < cfg.n; ++i) y[i] = tradeoff_row(cfg, i, x.row(i));
  return Dataset::create(std::move(x), std::move(y), "tradeoff_model", cfg.seed, "tradeoff_model");
}

Dataset gen_basis_vector_task_labeled(std::size_t d, const std::vector<double>& labels,
                                      std::uint64_t seed) {
  const std::size_t n = labels.size();
  if (n < 1 || n > d) throw std::invalid_argument("gen_basis_vector_task: need 1 <= n <= d");
  // choose n distinct basis indices by a seeded partial Fisher-Yates
  std::vector<std::size_t> idx(d);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(d - i));
    std::swap(idx[i], idx[j]);
  }
  Matrix x(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != 1.0 && labels[i] != -1.0)
      throw std::invalid_argument("gen_basis_vector_task: labels must be +-1");
    x(i, idx[i]) = labels[i];
  }
  return Dataset::create(std::move(x), labels, "basis_vector_task", seed, "basis_vector_task");
}

Dataset gen_basis_vector_task(std::size_t d, std::size_t n, std::uint64_t seed) {
  Rng rng = Rng(seed).split(0xb1a5);
  std::vector<double> labels(n);
  for (double& v : labels) v = rng.sign();
  return gen_basis_vector_task_labeled(d, labels, seed);
}

Dataset gen_quadratic_task(std::size_t half_d, std::size_t n, std::uint64_t seed) {
  if (half_d < 1 || n < 1) throw std::invalid_argument("gen_quadratic_task: invalid sizes");
  const std::size_t d = 2 * half_d;
  Matrix x(n, d);
  std::vector<double> y(n);
  Rng root(seed);
  for (std::size_t i = 0; i < n; ++i) {
    // ties (measure zero) get a fresh attempt substream
    for (std::uint64_t attempt = 0;; ++attempt) {
      Rng point = root.split(i).split(attempt);
      auto row = x.row(i);
      for (std::size_t j = 0; j < d; ++j) row[j] = point.normal();
      double diff = 0.0;
      for (std::size_t j = 0; j < half_d; ++j) diff += row[j] * row[j];
      for (std::size_t j = half_d; j < d; ++j) diff -= row[j] * row[j];
      if (diff != 0.0) {
        y[i] = diff > 0.0 ? 1.0 : -1.0;
        break;
      }
    }
  }
  return Dataset::create(std::move(x), std::move(y), "quadratic_task", seed, "quadratic_task");
}

Dataset gen_hidden_pattern_task(std::size_t d, std::size_t k, std::size_t j_star,
                                const std::vector<int>& g_table, std::size_t n,
                                std::uint64_t seed) {
  if (d < 1 || k < 1 || k > d) throw std::invalid_argument("gen_hidden_pattern_task: bad k/d");
  if (j_star < 1 || j_star > d - k + 1)
    throw std::invalid_argument("gen_hidden_pattern_task: j_star outside 1..d-k+1");
  if (g_table.size() != (std::size_t{1} << k))
    throw std::invalid_argument("gen_hidden_pattern_task: g_table needs 2^k entries");
  for (int v : g_table)
    if (v != 1 && v != -1) throw std::invalid_argument("gen_hidden_pattern_task: g values not +-1");
  if (d < 64 && n > (std::size_t{1} << d))
    throw std::invalid_argument("gen_hidden_pattern_task: more points than distinct inputs");

  Matrix x(n, d);
  std::vector<double> y(n);
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> seen;  // for redrawing collisions
  Rng root(seed);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::uint64_t attempt = 0;; ++attempt) {
      Rng point = root.split(i).split(attempt);
      auto row = x.row(i);
      for (std::size_t j = 0; j < d; ++j) row[j] = point.sign();
      const std::uint64_t h = row_hash(row);
      auto& bucket = seen[h];
      const bool dup = std::any_of(bucket.begin(), bucket.end(), [&](std::size_t prev) {
        return rows_equal(x.row(prev), row);
      });
      if (!dup) {
        bucket.push_back(i);
        break;
      }
    }
    std::size_t bits = 0;
    for (std::size_t j = 0; j < k; ++j) {
      bits = (bits << 1) | (x(i, j_star - 1 + j) > 0.0 ? 1u : 0u);
    }
    y[i] = static_cast<double>(g_table[bits]);
  }
  return Dataset::create(std::move(x), std::move(y), "hidden_pattern_task", seed,
                         "hidden_pattern_task");
}

namespace {

std::uint32_t read_be32(std::ifstream& f, const std::string& path) {
  unsigned char b[4];
  if (!f.read(reinterpret_cast<char*>(b), 4))
    throw std::runtime_error("IDX: truncated file " + path);
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

}  // namespace

Dataset load_idx_subset(const std::string& images_path, const std::string& labels_path,
                        int class_a, int class_b, std::size_t n_per_class) {
  if (class_a == class_b) throw std::invalid_argument("load_idx_subset: classes must differ");
  if (n_per_class == 0) throw std::invalid_argument("load_idx_subset: n_per_class == 0");

  std::ifstream imgf(images_path, std::ios::binary);
  if (!imgf) throw std::runtime_error("IDX: cannot open " + images_path);
  if (read_be32(imgf, images_path) != 0x00000803u)
    throw std::runtime_error("IDX: bad image magic in " + images_path);
  const std::uint32_t n_images = read_be32(imgf, images_path);
  const std::uint32_t n_rows = read_be32(imgf, images_path);
  const std::uint32_t n_cols = read_be32(imgf, images_path);

  std::ifstream labf(labels_path, std::ios::binary);
  if (!labf) throw std::runtime_error("IDX: cannot open " + labels_path);
  if (read_be32(labf, labels_path) != 0x00000801u)
    throw std::runtime_error("IDX: bad label magic in " + labels_path);
  const std::uint32_t n_labels = read_be32(labf, labels_path);
  if (n_labels != n_images) throw std::runtime_error("IDX: image/label count mismatch");

  std::vector<unsigned char> labels(n_labels);
  if (!labf.read(reinterpret_cast<char*>(labels.data()), n_labels))
    throw std::runtime_error("IDX: truncated file " + labels_path);

  const std::size_t pixels = std::size_t{n_rows} * n_cols;
  std::vector<unsigned char> buf(pixels);
  Matrix x(2 * n_per_class, pixels);
  std::vector<double> y;
  y.reserve(2 * n_per_class);
  std::size_t got_a = 0, got_b = 0, out_row = 0;
  for (std::uint32_t i = 0; i < n_images && (got_a < n_per_class || got_b < n_per_class); ++i) {
    if (!imgf.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels)))
      throw std::runtime_error("IDX: truncated file " + images_path);
    const int cls = labels[i];
    double lab = 0.0;
    if (cls == class_a && got_a < n_per_class) {
      lab = 1.0;
      ++got_a;
    } else if (cls == class_b && got_b < n_per_class) {
      lab = -1.0;
      ++got_b;
    } else {
      continue;
    }
    auto row = x.row(out_row++);
    for (std::size_t p = 0; p < pixels; ++p) row[p] = buf[p] / 255.0;
    y.push_back(lab);
  }
  if (got_a == 0 || got_b == 0)
    throw std::runtime_error("IDX: requested class absent from " + labels_path);
  if (got_a < n_per_class || got_b < n_per_class)
    throw std::runtime_error("IDX: fewer than n_per_class examples available");

  // restore file order: rows were appended in file order already
  return Dataset::create(std::move(x), std::move(y),
                         "idx_" + std::to_string(class_a) + "v" + std::to_string(class_b), 0,
                         "idx_subset");
}

void export_dataset_csv(const Dataset& ds, const std::string& path) {
  std::vector<std::string> cols;
  cols.reserve(ds.dim() + 1);
  for (std::size_t j = 0; j < ds.dim(); ++j) cols.push_back("x" + std::to_string(j));
  cols.push_back("y");
  CsvWriter csv(path, cols);
  std::vector<double> row(ds.dim() + 1);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    std::copy_n(ds.x.row(i).data(), ds.dim(), row.begin());
    row.back() = ds.y[i];
    csv.append(row);
  }
  csv.close();

  nlohmann::json meta{{"name", ds.name},
                      {"seed", ds.seed},
                      {"generator", ds.generator},
                      {"n", ds.size()},
                      {"d", ds.dim()},
                      {"rng", std::string(kRngAlgorithm)}};
  std::ofstream out(path + ".meta.json");
  out << meta.dump(2) << "\n";
}

}  // namespace ntklab
