#include "ntklab/features.hpp"

#include <cmath>
#include <stdexcept>

#include "ntklab/io.hpp"
#include "ntklab/parallel.hpp"
#include "ntklab/simd.hpp"

namespace ntklab {

FeatureBasis decompose(const KernelSpec& spec, const Dataset& train, double ridge) {
  if (ridge < 0.0) throw std::invalid_argument("decompose: ridge must be >= 0");
  const GramEigen eigen = eigendecompose(gram(spec, train, train));
  const double lambda_max = eigen.values.empty() ? 0.0 : eigen.values.front();
  if (lambda_max + ridge <= 0.0)
    throw std::invalid_argument("decompose: all eigenvalues are zero");

  FeatureBasis basis;
  basis.spec = spec;
  basis.train = train;
  basis.ridge = ridge;
  for (std::size_t i = 0; i < eigen.n(); ++i) {
    const double lambda = eigen.values[i];
    if (ridge == 0.0 && lambda <= 1e-10 * lambda_max) {
      ++basis.dropped_zero_modes;
      continue;
    }
    FeatureFunction f;
    f.index = i;
    f.lambda = lambda;
    f.eigvec = eigen.eigenvector(i);
    const double projection = simd::dot(f.eigvec.data(), train.y.data(), train.y.size());
    f.coeff.resize(train.size());
    const double w = projection / (lambda + ridge);
    for (std::size_t r = 0; r < train.size(); ++r) f.coeff[r] = w * f.eigvec[r];
    basis.features.push_back(std::move(f));
  }
  return basis;
}

double feature_eval(const FeatureBasis& basis, const FeatureFunction& f,
                    std::span<const double> x) {
  double acc = 0.0;
  for (std::size_t r = 0; r < basis.train.size(); ++r) {
    if (f.coeff[r] == 0.0) continue;
    acc += f.coeff[r] * ntk_eval(basis.spec, x, basis.train.x.row(r));
  }
  return f.scale * acc + f.offset;
}

std::vector<double> feature_grad(const FeatureBasis& basis, const FeatureFunction& f,
                                 std::span<const double> x) {
  std::vector<double> g(x.size(), 0.0);
  for (std::size_t r = 0; r < basis.train.size(); ++r) {
    if (f.coeff[r] == 0.0) continue;
    const std::vector<double> gr = ntk_grad_x(basis.spec, x, basis.train.x.row(r));
    simd::axpy(f.coeff[r], gr.data(), g.data(), g.size());
  }
  simd::scale(f.scale, g.data(), g.size());
  return g;
}

FeatureFunction normalize_feature(const FeatureBasis& basis, FeatureFunction f,
                                  const Dataset& reference) {
  if (reference.size() == 0) throw std::invalid_argument("normalize_feature: empty reference");
  std::vector<double> values(reference.size());
  parallel_for(reference.size(), [&](std::size_t i0, std::size_t i1) {
    for (std::size_t i = i0; i < i1; ++i) values[i] = feature_eval(basis, f, reference.x.row(i));
  });
  const double n = static_cast<double>(values.size());
  const double mean = simd::sum(values.data(), values.size()) / n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  if (sd <= 0.0)
    throw std::invalid_argument("normalize_feature: feature is constant on the reference set");
  f.scale /= sd;
  f.offset = (f.offset - mean) / sd;
  return f;
}

Usefulness usefulness(const FeatureBasis& basis, const FeatureFunction& f, const Dataset& eval) {
  if (eval.size() == 0) throw std::invalid_argument("usefulness: empty evaluation set");
  eval.require_classification_labels();
  std::vector<double> samples(eval.size());
  parallel_for(eval.size(), [&](std::size_t i0, std::size_t i1) {
    for (std::size_t i = i0; i < i1; ++i)
      samples[i] = eval.y[i] * feature_eval(basis, f, eval.x.row(i));
  });
  const double n = static_cast<double>(samples.size());
  Usefulness u;
  u.value = simd::sum(samples.data(), samples.size()) / n;
  if (samples.size() > 1) {
    double var = 0.0;
    for (double v : samples) var += (v - u.value) * (v - u.value);
    u.std_err = std::sqrt(var / (n - 1.0) / n);
  }
  return u;
}

Usefulness robust_usefulness(const FeatureBasis& basis, const FeatureFunction& f,
                             const Dataset& eval, const AttackConfig& attack) {
  if (eval.size() == 0) throw std::invalid_argument("robust_usefulness: empty evaluation set");
  eval.require_classification_labels();
  attack.validate();
  std::vector<double> samples(eval.size());
  parallel_for(eval.size(), [&](std::size_t i0, std::size_t i1) {
    for (std::size_t i = i0; i < i1; ++i) {
      const double y = eval.y[i];
      // minimize y f(x + delta) = maximize its negation
      auto objective = [&](std::span<const double> p) {
        return -y * feature_eval(basis, f, p);
      };
      auto grad = [&](std::span<const double> p) {
        std::vector<double> g = feature_grad(basis, f, p);
        simd::scale(-y, g.data(), g.size());
        return g;
      };
      AttackConfig point_cfg = attack;
      point_cfg.seed = Rng(attack.seed).split(i).next_u64();
      const PgdResult res = pgd_maximize(objective, grad, eval.x.row(i), point_cfg);
      samples[i] = y * feature_eval(basis, f, res.x_adv);
    }
  });
  const double n = static_cast<double>(samples.size());
  Usefulness u;
  u.value = simd::sum(samples.data(), samples.size()) / n;
  if (samples.size() > 1) {
    double var = 0.0;
    for (double v : samples) var += (v - u.value) * (v - u.value);
    u.std_err = std::sqrt(var / (n - 1.0) / n);
  }
  return u;
}

std::string to_string(FeatureClass c) {
  switch (c) {
    case FeatureClass::robustly_useful:
      return "robustly_useful";
    case FeatureClass::useful_nonrobust:
      return "useful_nonrobust";
    case FeatureClass::not_useful:
      return "not_useful";
  }
  return "not_useful";
}

namespace {

FeatureClass classify(double rho, double gamma, double rho_thr, double gamma_thr) {
  if (rho >= rho_thr) {
    return gamma > gamma_thr ? FeatureClass::robustly_useful : FeatureClass::useful_nonrobust;
  }
  return FeatureClass::not_useful;
}

void export_feature_images(const FeatureBasis& basis, const std::string& dir) {
  const std::size_t d = basis.train.dim();
  const std::size_t side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(d))));
  if (side * side != d) return;  // only image-shaped inputs get a rendering

  std::vector<double> mean_point(d, 0.0);
  for (std::size_t i = 0; i < basis.train.size(); ++i)
    simd::axpy(1.0 / static_cast<double>(basis.train.size()), basis.train.x.row(i).data(),
               mean_point.data(), d);

  std::vector<std::vector<double>> tiles;
  std::vector<std::string> captions;
  for (const FeatureFunction& f : basis.features) {
    const std::vector<double> g = feature_grad(basis, f, mean_point);
    double lo = g[0], hi = g[0];
    for (double v : g) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi - lo < 1e-300) hi = lo + 1.0;
    std::vector<unsigned char> pixels(d);
    for (std::size_t p = 0; p < d; ++p)
      pixels[p] = static_cast<unsigned char>(std::lround(255.0 * (g[p] - lo) / (hi - lo)));
    write_pgm(dir + "/feature_" + std::to_string(f.index) + ".pgm", pixels, side, side);
    tiles.push_back(g);
    captions.push_back("i=" + std::to_string(f.index));
  }
  svg_gray_montage(dir + "/features.svg", tiles, side, side, captions);
}

}  // namespace

FeatureReport feature_report(const KernelSpec& spec, const Dataset& train, const Dataset& eval,
                             const AttackConfig& attack, double rho_threshold,
                             double gamma_threshold, const std::string& image_dir) {
  if (rho_threshold <= 0.0)
    throw std::invalid_argument("feature_report: rho threshold must be positive");
  FeatureBasis basis = decompose(spec, train);
  FeatureReport report;
  report.rho_threshold = rho_threshold;
  report.gamma_threshold = gamma_threshold;
  report.dropped_zero_modes = basis.dropped_zero_modes;
  for (FeatureFunction& f : basis.features) {
    FeatureReportRow row;
    row.index = f.index;
    row.lambda = f.lambda;
    FeatureFunction nf = normalize_feature(basis, f, eval);
    const Usefulness rho = usefulness(basis, nf, eval);
    const Usefulness gamma = robust_usefulness(basis, nf, eval, attack);
    row.rho = rho.value;
    row.rho_se = rho.std_err;
    row.gamma = gamma.value;
    row.gamma_se = gamma.std_err;
    row.cls = classify(row.rho, row.gamma, rho_threshold, gamma_threshold);
    report.rows.push_back(row);
  }
  if (!image_dir.empty()) export_feature_images(basis, image_dir);
  return report;
}

nlohmann::json feature_report_to_json(const FeatureReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : report.rows) {
    rows.push_back({{"index", row.index},
                    {"lambda", row.lambda},
                    {"rho", row.rho},
                    {"rho_se", row.rho_se},
                    {"gamma", row.gamma},
                    {"gamma_se", row.gamma_se},
                    {"class", to_string(row.cls)}});
  }
  return nlohmann::json{{"rows", rows},
                        {"rho_threshold", report.rho_threshold},
                        {"gamma_threshold", report.gamma_threshold},
                        {"dropped_zero_modes", report.dropped_zero_modes},
                        {"gamma_note", report.gamma_note}};
}

FeatureReport feature_report_from_json(const nlohmann::json& j) {
  FeatureReport report;
  report.rho_threshold = j.at("rho_threshold").get<double>();
  report.gamma_threshold = j.at("gamma_threshold").get<double>();
  report.dropped_zero_modes = j.at("dropped_zero_modes").get<std::size_t>();
  report.gamma_note = j.at("gamma_note").get<std::string>();
  for (const auto& row_json : j.at("rows")) {
    FeatureReportRow row;
    row.index = row_json.at("index").get<std::size_t>();
    row.lambda = row_json.at("lambda").get<double>();
    row.rho = row_json.at("rho").get<double>();
    row.rho_se = row_json.at("rho_se").get<double>();
    row.gamma = row_json.at("gamma").get<double>();
    row.gamma_se = row_json.at("gamma_se").get<double>();
    const std::string cls = row_json.at("class").get<std::string>();
    if (cls == "robustly_useful") {
      row.cls = FeatureClass::robustly_useful;
    } else if (cls == "useful_nonrobust") {
      row.cls = FeatureClass::useful_nonrobust;
    } else if (cls == "not_useful") {
      row.cls = FeatureClass::not_useful;
    } else {
      throw std::invalid_argument("feature_report_from_json: unknown class '" + cls + "'");
    }
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace ntklab
