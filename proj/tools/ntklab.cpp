// ntklab command-line entry point: config-driven runs of the kernel,
// regression, dynamics, finite-net, distillation, attack, feature, and
// experiment machinery. Every run writes its artifacts plus a manifest.json
// holding the fully resolved configuration, a content hash per artifact, and
// any scientific verdicts.
//
// Exit codes: 0 success, 1 verdict/assertion failure, 2 usage error.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "ntklab/attack.hpp"
#include "ntklab/dataset.hpp"
#include "ntklab/distill.hpp"
#include "ntklab/dynamics.hpp"
#include "ntklab/experiments.hpp"
#include "ntklab/features.hpp"
#include "ntklab/finite_net.hpp"
#include "ntklab/io.hpp"
#include "ntklab/kernel.hpp"
#include "ntklab/parallel.hpp"
#include "ntklab/regression.hpp"
#include "ntklab/simd.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ntklab;

namespace {

constexpr const char* kVersion = "ntklab 0.1.0";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw UsageError(where + ": expected a JSON object");
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key())) {
      throw UsageError(where + ": unknown key '" + item.key() + "'");
    }
  }
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback) {
  if (obj.contains(key)) return obj.at(key).get<T>();
  return fallback;
}

void require_key(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) throw UsageError(where + ": missing required field '" + key + "'");
}

// ---------------------------------------------------------------------------
// dataset blocks

json default_dataset(const std::string& generator, json extra) {
  extra["generator"] = generator;
  return extra;
}

Dataset build_dataset(const json& block, std::uint64_t seed, const std::string& where) {
  require_key(block, "generator", where);
  const std::string generator = block.at("generator").get<std::string>();
  if (generator == "gaussian") {
    check_keys(block, {"generator", "d", "n", "sigma", "c"}, where);
    GaussianModelConfig cfg;
    cfg.d = get_or<std::size_t>(block, "d", 10);
    cfg.n = get_or<std::size_t>(block, "n", 100);
    if (block.contains("c")) {
      cfg = GaussianModelConfig::with_c(cfg.d, block.at("c").get<double>(), cfg.n, seed);
    } else {
      cfg.sigma = get_or<double>(block, "sigma", 1.0);
      cfg.seed = seed;
    }
    return gen_gaussian_model(cfg);
  }
  if (generator == "tradeoff") {
    check_keys(block, {"generator", "d", "n"}, where);
    TradeoffModelConfig cfg;
    cfg.d = get_or<std::size_t>(block, "d", 10);
    cfg.n = get_or<std::size_t>(block, "n", 100);
    cfg.seed = seed;
    return gen_tradeoff_model(cfg);
  }
  if (generator == "basis") {
    check_keys(block, {"generator", "d", "n"}, where);
    return gen_basis_vector_task(get_or<std::size_t>(block, "d", 16),
                                 get_or<std::size_t>(block, "n", 6), seed);
  }
  if (generator == "quadratic") {
    check_keys(block, {"generator", "half_d", "n"}, where);
    return gen_quadratic_task(get_or<std::size_t>(block, "half_d", 4),
                              get_or<std::size_t>(block, "n", 100), seed);
  }
  if (generator == "hidden") {
    check_keys(block, {"generator", "d", "k", "j_star", "g_table", "n"}, where);
    const std::size_t k = get_or<std::size_t>(block, "k", 2);
    std::vector<int> g_table;
    if (block.contains("g_table")) {
      g_table = block.at("g_table").get<std::vector<int>>();
    } else {
      for (std::size_t bits = 0; bits < (std::size_t{1} << k); ++bits)
        g_table.push_back(__builtin_parityll(bits) ? -1 : 1);
    }
    return gen_hidden_pattern_task(get_or<std::size_t>(block, "d", 64), k,
                                   get_or<std::size_t>(block, "j_star", 1), g_table,
                                   get_or<std::size_t>(block, "n", 100), seed);
  }
  if (generator == "idx") {
    check_keys(block, {"generator", "images", "labels", "class_a", "class_b", "n_per_class"},
               where);
    require_key(block, "images", where);
    require_key(block, "labels", where);
    return load_idx_subset(block.at("images").get<std::string>(),
                           block.at("labels").get<std::string>(),
                           get_or<int>(block, "class_a", 0), get_or<int>(block, "class_b", 1),
                           get_or<std::size_t>(block, "n_per_class", 10));
  }
  throw UsageError(where + ": unknown generator '" + generator + "'");
}

AttackConfig build_attack(const json& block, std::uint64_t seed, const std::string& where) {
  check_keys(block, {"norm", "epsilon", "alpha", "steps", "loss", "random_start"}, where);
  AttackConfig cfg;
  cfg.norm = attack_norm_from_string(get_or<std::string>(block, "norm", "linf"));
  cfg.epsilon = get_or<double>(block, "epsilon", 0.1);
  cfg.alpha = get_or<double>(block, "alpha", cfg.epsilon / 4.0);
  cfg.steps = get_or<std::size_t>(block, "steps", 20);
  cfg.loss = attack_loss_from_string(get_or<std::string>(block, "loss", "square"));
  cfg.random_start = get_or<bool>(block, "random_start", false);
  cfg.seed = seed;
  cfg.validate();
  return cfg;
}

json attack_to_json(const AttackConfig& cfg) {
  return json{{"norm", to_string(cfg.norm)}, {"epsilon", cfg.epsilon},
              {"alpha", cfg.alpha},          {"steps", cfg.steps},
              {"loss", to_string(cfg.loss)}, {"random_start", cfg.random_start}};
}

// ---------------------------------------------------------------------------
// run context: output directory, artifact tracking, manifest

struct RunContext {
  std::string command;
  fs::path out_dir;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  json resolved;
  std::vector<std::string> artifacts;
  std::vector<ExperimentResult::Verdict> verdicts;

  std::string path(const std::string& name) {
    artifacts.push_back((out_dir / name).string());
    return artifacts.back();
  }

  void verdict(const std::string& name, bool pass, const std::string& detail = "") {
    verdicts.push_back({name, pass, detail});
    std::cout << (pass ? "pass  " : "FAIL  ") << name << (detail.empty() ? "" : "  [" + detail + "]")
              << "\n";
  }

  void absorb(const ExperimentResult& result) {
    for (const auto& v : result.verdicts) verdict(v.name, v.pass, v.detail);
  }

  bool all_pass() const {
    for (const auto& v : verdicts)
      if (!v.pass) return false;
    return true;
  }

  int finish() {
    json verdicts_json = json::array();
    for (const auto& v : verdicts)
      verdicts_json.push_back({{"name", v.name}, {"pass", v.pass}, {"detail", v.detail}});
    json artifacts_json = json::array();
    for (const auto& a : artifacts)
      artifacts_json.push_back({{"path", fs::path(a).filename().string()},
                                {"fnv1a64", file_hash_hex(a)}});
    json manifest{{"version", kVersion},
                  {"command", command},
                  {"seed", seed},
                  {"threads", threads},
                  {"config", resolved},
                  {"artifacts", artifacts_json},
                  {"verdicts", verdicts_json},
                  {"all_pass", all_pass()}};
    std::ofstream out(out_dir / "manifest.json");
    out << manifest.dump(2) << "\n";
    std::cout << "wrote " << (out_dir / "manifest.json").string() << "\n";
    return all_pass() ? 0 : 1;
  }
};

RunContext make_context(const std::string& command, const std::string& out, std::uint64_t seed,
                        unsigned threads, json resolved) {
  RunContext ctx;
  ctx.command = command;
  ctx.out_dir = out.empty() ? fs::path("runs") / command : fs::path(out);
  fs::create_directories(ctx.out_dir);
  ctx.seed = seed;
  ctx.threads = threads;
  ctx.resolved = std::move(resolved);
  set_max_threads(threads);
  std::cout << command << ": seed=" << seed << " out=" << ctx.out_dir.string()
            << " simd=" << simd::active_isa() << "\n";
  return ctx;
}

std::uint64_t derived_seed(std::uint64_t global, std::uint64_t role) {
  return Rng(global).split(role).next_u64();
}

void export_gram_csv(const Matrix& m, const std::string& path) {
  std::vector<std::string> cols;
  for (std::size_t j = 0; j < m.cols; ++j) cols.push_back("k" + std::to_string(j));
  CsvWriter csv(path, cols);
  for (std::size_t i = 0; i < m.rows; ++i) csv.append(m.row(i));
  csv.close();
}

// ---------------------------------------------------------------------------
// commands

int cmd_kernel(const json& params, RunContext& ctx) {
  check_keys(params, {"dataset", "depth", "mc_check", "mc_samples", "mc_pairs"}, "kernel");
  const json ds_block = get_or<json>(params, "dataset",
                                     default_dataset("gaussian", {{"d", 8}, {"n", 24}, {"c", 1.0}}));
  const Dataset data = build_dataset(ds_block, derived_seed(ctx.seed, 1), "kernel.dataset");
  KernelSpec spec = KernelSpec::relu_l1(data.dim());
  spec.depth = get_or<int>(params, "depth", 1);
  ctx.resolved["params"] = {{"dataset", ds_block},
                            {"depth", spec.depth},
                            {"mc_check", get_or<bool>(params, "mc_check", false)},
                            {"mc_samples", get_or<std::size_t>(params, "mc_samples", 200000)},
                            {"mc_pairs", get_or<std::size_t>(params, "mc_pairs", 20)}};

  const Matrix k = gram(spec, data, data);
  export_gram_csv(k, ctx.path("gram.csv"));
  write_matrix_bin(ctx.path("gram.bin"), k);
  const GramEigen eigen = eigendecompose(k);
  {
    CsvWriter csv(ctx.path("spectrum.csv"), {"index", "lambda"});
    for (std::size_t i = 0; i < eigen.n(); ++i)
      csv.append(std::vector<double>{static_cast<double>(i), eigen.values[i]});
    csv.close();
  }
  ctx.verdict("gram_psd", eigen.values.back() >= -1e-8 * eigen.values.front(),
              "lambda_min=" + format_double(eigen.values.back()));

  if (get_or<bool>(params, "mc_check", false)) {
    if (spec.depth != 1) throw UsageError("kernel: mc_check supports depth 1 only");
    const std::size_t samples = get_or<std::size_t>(params, "mc_samples", 200000);
    const std::size_t pairs = get_or<std::size_t>(params, "mc_pairs", 20);
    Rng rng = Rng(ctx.seed).split(99);
    bool ok = true;
    CsvWriter csv(ctx.path("mc_check.csv"), {"pair", "analytic", "mc", "mc_se"});
    for (std::size_t p = 0; p < pairs; ++p) {
      const std::size_t i = rng.below(data.size());
      std::size_t j = rng.below(data.size());
      const double analytic = ntk_eval(spec, data.x.row(i), data.x.row(j));
      const McEstimate mc =
          ntk_eval_mc(spec, data.x.row(i), data.x.row(j), samples, rng.next_u64());
      csv.append(std::vector<double>{static_cast<double>(p), analytic, mc.mean, mc.std_err});
      if (std::abs(analytic - mc.mean) > 3.0 * mc.std_err) ok = false;
    }
    csv.close();
    ctx.verdict("analytic_matches_mc_3se", ok);
  }
  return ctx.finish();
}

int cmd_fit(const json& params, RunContext& ctx) {
  check_keys(params, {"train", "test", "depth", "ridge"}, "fit");
  const json train_block = get_or<json>(
      params, "train", default_dataset("gaussian", {{"d", 20}, {"n", 40}, {"c", 0.5}}));
  const json test_block = get_or<json>(
      params, "test", default_dataset("gaussian", {{"d", 20}, {"n", 400}, {"c", 0.5}}));
  const Dataset train = build_dataset(train_block, derived_seed(ctx.seed, 1), "fit.train");
  const Dataset test = build_dataset(test_block, derived_seed(ctx.seed, 2), "fit.test");
  KernelSpec spec = KernelSpec::relu_l1(train.dim());
  spec.depth = get_or<int>(params, "depth", 1);
  const double ridge = get_or<double>(params, "ridge", 0.0);
  ctx.resolved["params"] = {
      {"train", train_block}, {"test", test_block}, {"depth", spec.depth}, {"ridge", ridge}};

  const KernelPredictor predictor = fit(spec, train, ridge);
  {
    std::ofstream out(ctx.path("predictor.json"));
    out << predictor_to_json(predictor).dump(2) << "\n";
  }
  const std::vector<double> preds = predict(predictor, test);
  {
    CsvWriter csv(ctx.path("predictions.csv"), {"index", "prediction", "label"});
    for (std::size_t i = 0; i < preds.size(); ++i)
      csv.append(std::vector<double>{static_cast<double>(i), preds[i], test.y[i]});
    csv.close();
  }
  const double train_acc = accuracy(predictor, train);
  const double test_acc = accuracy(predictor, test);
  std::cout << "train_acc=" << train_acc << " test_acc=" << test_acc << "\n";
  ctx.resolved["result"] = {{"train_acc", train_acc}, {"test_acc", test_acc}};
  if (ridge == 0.0) {
    const std::vector<double> fitted = predict(predictor, train);
    double residual = 0.0;
    for (std::size_t i = 0; i < fitted.size(); ++i)
      residual = std::max(residual, std::abs(fitted[i] - train.y[i]));
    ctx.verdict("interpolates_training_labels", residual <= 1e-6 * inf_norm(train.y),
                "residual=" + format_double(residual));
  }
  return ctx.finish();
}

int cmd_dynamics(const json& params, RunContext& ctx) {
  check_keys(params, {"dataset", "depth", "eta", "n_times", "t_max_factor"}, "dynamics");
  const json ds_block = get_or<json>(
      params, "dataset", default_dataset("gaussian", {{"d", 10}, {"n", 30}, {"c", 1.0}}));
  const Dataset data = build_dataset(ds_block, derived_seed(ctx.seed, 1), "dynamics.dataset");
  KernelSpec spec = KernelSpec::relu_l1(data.dim());
  spec.depth = get_or<int>(params, "depth", 1);

  const GramEigen eigen = eigendecompose(gram(spec, data, data));
  const ConditionReport cond = condition_report(eigen);
  double eta = get_or<double>(params, "eta", 0.0);
  if (eta <= 0.0) eta = 0.5 * cond.eta_bound;
  const std::size_t n_times = get_or<std::size_t>(params, "n_times", 48);
  const double t_max_factor = get_or<double>(params, "t_max_factor", 1.0);

  double lambda_small = cond.lambda_max;
  for (double v : eigen.values)
    if (v > 0.0) lambda_small = std::min(lambda_small, v);
  const double t_max = t_max_factor * 12.0 / (eta * lambda_small);
  std::vector<double> times{0.0};
  for (std::size_t i = 0; i < n_times; ++i) {
    times.push_back(t_max * std::pow(10.0, -4.0 * (1.0 - static_cast<double>(i) /
                                                             static_cast<double>(n_times - 1))));
  }
  ctx.resolved["params"] = {{"dataset", ds_block},
                            {"depth", spec.depth},
                            {"eta", eta},
                            {"n_times", n_times},
                            {"t_max_factor", t_max_factor}};
  ctx.resolved["condition"] = {{"lambda_min", cond.lambda_min},
                               {"lambda_max", cond.lambda_max},
                               {"kappa", cond.kappa},
                               {"eta_bound", cond.eta_bound}};

  const DynamicsTrace trace = solve_linearized(eigen, data.y, eta, times);
  const SpectralCurve curve = spectral_loss_curve(eigen, data.y, eta, times);
  {
    std::vector<std::string> cols{"t", "loss"};
    for (std::size_t i = 0; i < eigen.n(); ++i) cols.push_back("mode_" + std::to_string(i + 1));
    CsvWriter csv(ctx.path("loss_curve.csv"), cols);
    std::vector<double> row(cols.size());
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
      row[0] = times[ti];
      row[1] = curve.loss[ti];
      for (std::size_t i = 0; i < eigen.n(); ++i) row[2 + i] = curve.mode_terms(ti, i);
      csv.append(row);
    }
    csv.close();
  }
  svg_line_plot(ctx.path("loss_curve.svg"), "linearized training loss", "t", "loss",
                {{"loss", times, curve.loss}}, /*log_y=*/true);

  double max_gap = 0.0;
  for (std::size_t ti = 0; ti < times.size(); ++ti)
    max_gap = std::max(max_gap, std::abs(trace.loss[ti] - curve.loss[ti]));
  ctx.verdict("mode_sum_matches_trajectory", max_gap <= 1e-10 * std::max(1.0, curve.loss[0]),
              "max gap=" + format_double(max_gap));
  double y_sq = 0.0;
  for (double v : data.y) y_sq += v * v;
  ctx.verdict("t0_loss_equals_label_norm", std::abs(curve.loss[0] - y_sq) <= 1e-10 * y_sq,
              "loss(0)=" + format_double(curve.loss[0]));
  return ctx.finish();
}

int cmd_widthscan(const json& params, RunContext& ctx) {
  check_keys(params, {"dataset", "widths", "seeds", "eta_frac", "steps"}, "widthscan");
  const json ds_block = get_or<json>(
      params, "dataset", default_dataset("gaussian", {{"d", 8}, {"n", 20}, {"c", 0.5}}));
  const Dataset data = build_dataset(ds_block, derived_seed(ctx.seed, 1), "widthscan.dataset");
  const std::vector<std::size_t> widths =
      get_or<std::vector<std::size_t>>(params, "widths", {64, 256, 1024, 4096});
  const std::size_t n_seeds = get_or<std::size_t>(params, "seeds", 5);
  const double eta_frac = get_or<double>(params, "eta_frac", 0.5);
  const std::size_t steps = get_or<std::size_t>(params, "steps", 60);
  ctx.resolved["params"] = {{"dataset", ds_block},
                            {"widths", widths},
                            {"seeds", n_seeds},
                            {"eta_frac", eta_frac},
                            {"steps", steps}};

  const KernelSpec spec = KernelSpec::relu_l1(data.dim());
  const ConditionReport cond = condition_report(eigendecompose(gram(spec, data, data)));
  const double eta = eta_frac * cond.eta_bound;
  std::vector<std::uint64_t> seeds;
  for (std::size_t s = 0; s < n_seeds; ++s) seeds.push_back(derived_seed(ctx.seed, 100 + s));

  const WidthScanResult scan = width_scaling_experiment(widths, data, eta, steps, seeds);
  {
    CsvWriter csv(ctx.path("widthscan.csv"),
                  {"width", "displacement", "displacement_rel", "kernel_drift"});
    for (const auto& row : scan.rows)
      csv.append(std::vector<double>{static_cast<double>(row.width), row.displacement,
                                     row.displacement_rel, row.kernel_drift});
    csv.close();
  }
  {
    std::vector<double> ws, rel, drift;
    for (const auto& row : scan.rows) {
      ws.push_back(std::log2(static_cast<double>(row.width)));
      rel.push_back(row.displacement_rel);
      drift.push_back(row.kernel_drift);
    }
    svg_line_plot(ctx.path("widthscan.svg"), "lazy-training width scaling", "log2 width",
                  "max drift", {{"relative displacement", ws, rel}, {"kernel drift", ws, drift}},
                  /*log_y=*/true);
  }
  // a full training trace and the trained weights at the largest width
  {
    const std::size_t m = *std::max_element(widths.begin(), widths.end());
    FiniteNet net = FiniteNet::init(m, data.dim(), seeds.front());
    const TrainTrace trace = train_gd(net, data, eta, steps, /*kernel_every=*/2);
    CsvWriter csv(ctx.path("train_trace.csv"),
                  {"step", "loss", "param_dist", "param_dist_rel"});
    for (std::size_t t = 0; t < trace.loss.size(); ++t) {
      csv.append(std::vector<double>{static_cast<double>(t), trace.loss[t],
                                     trace.param_dist[t], trace.param_dist_rel[t]});
    }
    csv.close();
    save_net(net, (ctx.out_dir / "trained_net").string());
    ctx.artifacts.push_back((ctx.out_dir / "trained_net.w1.bin").string());
    ctx.artifacts.push_back((ctx.out_dir / "trained_net.w2.bin").string());
  }
  std::cout << "slope(displacement_rel)=" << scan.slope_displacement_rel
            << " slope(kernel_drift)=" << scan.slope_kernel_drift
            << " slope(displacement_abs)=" << scan.slope_displacement_abs << "\n";
  ctx.resolved["result"] = {{"slope_displacement_rel", scan.slope_displacement_rel},
                            {"slope_kernel_drift", scan.slope_kernel_drift},
                            {"slope_displacement_abs", scan.slope_displacement_abs}};
  ctx.verdict("displacement_slope_minus_half",
              std::abs(scan.slope_displacement_rel + 0.5) <= 0.15,
              "slope=" + format_double(scan.slope_displacement_rel));
  ctx.verdict("kernel_drift_slope_minus_half", std::abs(scan.slope_kernel_drift + 0.5) <= 0.15,
              "slope=" + format_double(scan.slope_kernel_drift));
  return ctx.finish();
}

DistillOptions distill_options_from(const json& params, std::uint64_t seed,
                                    const Dataset* heldout) {
  DistillOptions options;
  options.s = get_or<std::size_t>(params, "s", 4);
  const std::string init = get_or<std::string>(params, "init", "subsample");
  if (init == "subsample") {
    options.init = SupportInit::subsample;
  } else if (init == "noise") {
    options.init = SupportInit::noise;
  } else {
    throw UsageError("distill: init must be 'subsample' or 'noise'");
  }
  options.lr = get_or<double>(params, "lr", 0.5);
  options.iters = get_or<std::size_t>(params, "iters", 150);
  options.ridge = get_or<double>(params, "ridge", -1.0);
  options.learn_labels = get_or<bool>(params, "learn_labels", false);
  options.seed = seed;
  options.heldout = heldout;
  return options;
}

void write_distill_outputs(RunContext& ctx, const KernelSpec& spec, const SupportSet& support,
                           const DistillTrace& trace, const Dataset* heldout) {
  {
    std::vector<std::string> cols;
    for (std::size_t j = 0; j < support.xs.cols; ++j) cols.push_back("x" + std::to_string(j));
    cols.push_back("y");
    CsvWriter csv(ctx.path("support.csv"), cols);
    std::vector<double> row(cols.size());
    for (std::size_t i = 0; i < support.size(); ++i) {
      std::copy_n(support.xs.row(i).data(), support.xs.cols, row.begin());
      row.back() = support.ys[i];
      csv.append(row);
    }
    csv.close();
  }
  {
    std::vector<std::string> cols{"iter", "loss", "grad_norm"};
    if (!trace.heldout_acc.empty()) cols.push_back("heldout_acc");
    CsvWriter csv(ctx.path("trace.csv"), cols);
    for (std::size_t i = 0; i < trace.loss.size(); ++i) {
      std::vector<double> row{static_cast<double>(i), trace.loss[i], trace.grad_norm[i]};
      if (!trace.heldout_acc.empty()) row.push_back(trace.heldout_acc[i]);
      csv.append(row);
    }
    csv.close();
  }
  {
    std::vector<double> iters(trace.loss.size());
    for (std::size_t i = 0; i < iters.size(); ++i) iters[i] = static_cast<double>(i);
    svg_line_plot(ctx.path("trace.svg"), "distillation loss", "iteration", "loss",
                  {{"kip loss", iters, trace.loss}}, /*log_y=*/true);
  }
  ctx.verdict("best_loss_not_above_init",
              trace.loss[trace.best_iteration] <= trace.loss.front(),
              "init=" + format_double(trace.loss.front()) +
                  " best=" + format_double(trace.loss[trace.best_iteration]));
  if (heldout != nullptr) {
    const double acc = accuracy(support_predictor(spec, support), *heldout);
    std::cout << "heldout accuracy of distilled support: " << acc << "\n";
    ctx.resolved["result"]["heldout_acc"] = acc;
  }
}

int cmd_distill(const json& params, RunContext& ctx, bool adversarial) {
  std::set<std::string> allowed{"target", "heldout", "depth", "s",     "init",
                                "lr",     "iters",   "ridge", "learn_labels"};
  if (adversarial) allowed.insert("attack");
  check_keys(params, allowed, ctx.command);
  const json target_block = get_or<json>(
      params, "target", default_dataset("gaussian", {{"d", 10}, {"n", 400}, {"sigma", 4.0}}));
  const json heldout_block = get_or<json>(
      params, "heldout", default_dataset("gaussian", {{"d", 10}, {"n", 1000}, {"sigma", 4.0}}));
  const Dataset target = build_dataset(target_block, derived_seed(ctx.seed, 1), "distill.target");
  const Dataset heldout =
      build_dataset(heldout_block, derived_seed(ctx.seed, 2), "distill.heldout");
  KernelSpec spec = KernelSpec::relu_l1(target.dim());
  spec.depth = get_or<int>(params, "depth", 1);
  const DistillOptions options =
      distill_options_from(params, derived_seed(ctx.seed, 3), &heldout);

  ctx.resolved["params"] = {{"target", target_block},
                            {"heldout", heldout_block},
                            {"depth", spec.depth},
                            {"s", options.s},
                            {"init", get_or<std::string>(params, "init", "subsample")},
                            {"lr", options.lr},
                            {"iters", options.iters},
                            {"ridge", options.ridge},
                            {"learn_labels", options.learn_labels}};

  if (adversarial) {
    const AttackConfig attack = build_attack(get_or<json>(params, "attack", json::object()),
                                             derived_seed(ctx.seed, 4), "advdistill.attack");
    ctx.resolved["params"]["attack"] = attack_to_json(attack);
    const auto [support, trace] = adv_distill(spec, target, attack, options);
    write_distill_outputs(ctx, spec, support, trace, &heldout);
    const double final_adv_loss = adv_kip_loss(spec, support, target, attack);
    ctx.resolved["result"]["adv_kip_loss"] = final_adv_loss;
  } else {
    const auto [support, trace] = distill(spec, target, options);
    write_distill_outputs(ctx, spec, support, trace, &heldout);
    ctx.resolved["result"]["kip_loss"] = trace.loss[trace.best_iteration];
  }
  return ctx.finish();
}

int cmd_attack(const json& params, RunContext& ctx) {
  check_keys(params, {"train", "eval", "depth", "ridge", "attack"}, "attack");
  const json train_block = get_or<json>(
      params, "train", default_dataset("gaussian", {{"d", 100}, {"n", 20}, {"c", 0.5}}));
  const json eval_block = get_or<json>(
      params, "eval", default_dataset("gaussian", {{"d", 100}, {"n", 500}, {"c", 0.5}}));
  const Dataset train = build_dataset(train_block, derived_seed(ctx.seed, 1), "attack.train");
  const Dataset eval_set = build_dataset(eval_block, derived_seed(ctx.seed, 2), "attack.eval");
  KernelSpec spec = KernelSpec::relu_l1(train.dim());
  spec.depth = get_or<int>(params, "depth", 1);
  const double ridge = get_or<double>(params, "ridge", 0.0);
  const AttackConfig attack = build_attack(get_or<json>(params, "attack", json::object()),
                                           derived_seed(ctx.seed, 3), "attack.attack");
  ctx.resolved["params"] = {{"train", train_block},
                            {"eval", eval_block},
                            {"depth", spec.depth},
                            {"ridge", ridge},
                            {"attack", attack_to_json(attack)}};

  const KernelPredictor predictor = fit(spec, train, ridge);
  const AttackSummary summary = attack_dataset(model_from_predictor(predictor), eval_set, attack);
  export_dataset_csv(summary.adversarial, ctx.path("adversarial.csv"));
  ctx.artifacts.push_back((ctx.out_dir / "adversarial.csv.meta.json").string());
  {
    json flips = json::array();
    for (bool f : summary.flipped) flips.push_back(f);
    std::ofstream out(ctx.path("attack_report.json"));
    out << json{{"clean_acc", summary.clean_acc},
                {"robust_acc", summary.robust_acc},
                {"attack", attack_to_json(attack)},
                {"flipped", flips}}
               .dump(2)
        << "\n";
  }
  std::cout << "clean_acc=" << summary.clean_acc << " robust_acc=" << summary.robust_acc << "\n";
  ctx.resolved["result"] = {{"clean_acc", summary.clean_acc}, {"robust_acc", summary.robust_acc}};
  return ctx.finish();
}

int cmd_features(const json& params, RunContext& ctx) {
  check_keys(params, {"train", "eval", "depth", "attack", "rho_threshold", "gamma_threshold",
                      "export_images"},
             "features");
  const json train_block = get_or<json>(
      params, "train", default_dataset("tradeoff", {{"d", 49}, {"n", 80}}));
  const json eval_block = get_or<json>(
      params, "eval", default_dataset("tradeoff", {{"d", 49}, {"n", 300}}));
  const Dataset train = build_dataset(train_block, derived_seed(ctx.seed, 1), "features.train");
  const Dataset eval_set = build_dataset(eval_block, derived_seed(ctx.seed, 2), "features.eval");
  KernelSpec spec = KernelSpec::relu_l1(train.dim());
  spec.depth = get_or<int>(params, "depth", 1);
  json attack_block = get_or<json>(params, "attack", json::object());
  if (!attack_block.contains("epsilon")) {
    attack_block["epsilon"] = 20.0 / std::sqrt(static_cast<double>(train.dim() - 1));
  }
  const AttackConfig attack =
      build_attack(attack_block, derived_seed(ctx.seed, 3), "features.attack");
  const double rho_thr = get_or<double>(params, "rho_threshold", 0.05);
  const double gamma_thr = get_or<double>(params, "gamma_threshold", 0.0);
  const bool export_images = get_or<bool>(params, "export_images", false);
  ctx.resolved["params"] = {{"train", train_block},
                            {"eval", eval_block},
                            {"depth", spec.depth},
                            {"attack", attack_to_json(attack)},
                            {"rho_threshold", rho_thr},
                            {"gamma_threshold", gamma_thr},
                            {"export_images", export_images}};

  const FeatureReport report =
      feature_report(spec, train, eval_set, attack, rho_thr, gamma_thr,
                     export_images ? ctx.out_dir.string() : "");
  {
    std::ofstream out(ctx.path("feature_report.json"));
    out << feature_report_to_json(report).dump(2) << "\n";
  }
  {
    CsvWriter csv(ctx.path("feature_report.csv"),
                  {"index", "lambda", "rho", "rho_se", "gamma", "gamma_se", "class"});
    for (const auto& row : report.rows) {
      csv.append(std::vector<double>{static_cast<double>(row.index), row.lambda, row.rho,
                                     row.rho_se, row.gamma, row.gamma_se,
                                     static_cast<double>(row.cls)});
    }
    csv.close();
  }
  if (export_images) {
    const std::size_t side =
        static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(train.dim()))));
    if (side * side == train.dim()) {
      ctx.artifacts.push_back((ctx.out_dir / "features.svg").string());
      for (const auto& row : report.rows)
        ctx.artifacts.push_back(
            (ctx.out_dir / ("feature_" + std::to_string(row.index) + ".pgm")).string());
    }
  }
  std::size_t useful_nonrobust = 0;
  for (const auto& row : report.rows)
    if (row.cls == FeatureClass::useful_nonrobust) ++useful_nonrobust;
  std::cout << "features: " << report.rows.size() << " total, " << useful_nonrobust
            << " useful non-robust (gamma is a PGD upper bound)\n";
  ctx.resolved["result"] = {{"n_features", report.rows.size()},
                            {"useful_nonrobust", useful_nonrobust}};
  return ctx.finish();
}

int cmd_experiment(const json& params, RunContext& ctx) {
  check_keys(params, {"name", "d", "n", "c", "epsilon", "trials", "n_values", "d_values", "eta",
                      "steps", "k", "q", "delta", "g_table"},
             "experiment");
  require_key(params, "name", "experiment");
  const std::string name = params.at("name").get<std::string>();
  ExperimentResult result;
  if (name == "standard_sc") {
    result = standard_sample_complexity(
        get_or<std::size_t>(params, "d", 400), get_or<double>(params, "c", 0.5),
        get_or<std::vector<std::size_t>>(params, "n_values", {1, 2, 4, 8, 16}),
        get_or<std::size_t>(params, "trials", 50), ctx.seed);
  } else if (name == "robust_sc") {
    result = robust_sample_complexity(
        get_or<std::size_t>(params, "d", 2500), get_or<double>(params, "c", 0.5),
        get_or<double>(params, "epsilon", 2.0),
        get_or<std::vector<std::size_t>>(params, "n_values", {1, 2, 4, 8, 16, 32, 64, 128}),
        get_or<std::size_t>(params, "trials", 50), ctx.seed);
  } else if (name == "robust_crossing") {
    result = robust_crossing_scaling(
        get_or<std::vector<std::size_t>>(params, "d_values", {400, 1600, 6400}),
        get_or<double>(params, "c", 0.5), get_or<double>(params, "epsilon", 2.0),
        get_or<std::size_t>(params, "trials", 48), ctx.seed);
  } else if (name == "tradeoff") {
    result = tradeoff_experiment(get_or<std::size_t>(params, "d", 10000),
                                 get_or<std::size_t>(params, "n", 100000), ctx.seed);
  } else if (name == "equivariance") {
    result = equivariance_check(get_or<std::size_t>(params, "d", 50),
                                get_or<std::size_t>(params, "n", 20),
                                get_or<double>(params, "eta", 0.0),
                                get_or<std::size_t>(params, "steps", 200), ctx.seed);
  } else if (name == "coupon") {
    ConvConstructionConfig cfg;
    cfg.k = get_or<std::size_t>(params, "k", 3);
    cfg.q = get_or<std::size_t>(params, "q", 0);
    cfg.delta = get_or<double>(params, "delta", 0.05);
    if (params.contains("g_table")) cfg.g_table = params.at("g_table").get<std::vector<int>>();
    cfg.seed = ctx.seed;
    result = coupon_collector_conv(cfg, get_or<std::size_t>(params, "trials", 1000));
  } else {
    throw UsageError("experiment: unknown name '" + name +
                     "' (standard_sc, robust_sc, robust_crossing, tradeoff, equivariance, coupon)");
  }

  ctx.resolved["params"] = params;
  ctx.resolved["experiment_config"] = result.config;
  result.write((ctx.out_dir / result.name).string());
  ctx.artifacts.push_back((ctx.out_dir / (result.name + ".csv")).string());
  ctx.artifacts.push_back((ctx.out_dir / (result.name + ".verdicts.json")).string());

  // error-vs-n plot where the table has that shape
  if (!result.rows.empty() && result.columns.size() >= 3 && result.columns[0] == "n") {
    std::vector<double> ns, cf, mc;
    for (const auto& row : result.rows) {
      ns.push_back(std::log2(row[0]));
      cf.push_back(row[1]);
      mc.push_back(row[2]);
    }
    svg_line_plot(ctx.path(result.name + ".svg"), result.name, "log2 n", "error",
                  {{"closed form", ns, cf}, {"monte carlo", ns, mc}});
  }
  ctx.absorb(result);
  return ctx.finish();
}

// ---------------------------------------------------------------------------
// config plumbing

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path + "'");
  json config;
  try {
    in >> config;
  } catch (const json::exception& e) {
    throw UsageError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return config;
}

const std::set<std::string> kTopLevelKeys{"command", "seed", "out", "threads", "params"};
const std::set<std::string> kCommands{"kernel",  "fit",    "dynamics", "widthscan", "distill",
                                      "advdistill", "attack", "features", "experiment"};

struct ResolvedRun {
  std::string command;
  std::uint64_t seed = 0;
  std::string out;
  unsigned threads = 0;
  json params = json::object();
};

ResolvedRun resolve_config(const json& config) {
  check_keys(config, kTopLevelKeys, "config");
  require_key(config, "command", "config");
  ResolvedRun run;
  run.command = config.at("command").get<std::string>();
  if (!kCommands.count(run.command))
    throw UsageError("config: unknown command '" + run.command + "'");
  run.seed = get_or<std::uint64_t>(config, "seed", 0);
  run.out = get_or<std::string>(config, "out", "");
  run.threads = get_or<unsigned>(config, "threads", 0);
  run.params = get_or<json>(config, "params", json::object());
  return run;
}

int dispatch(const ResolvedRun& run) {
  json resolved{{"command", run.command}, {"seed", run.seed}, {"threads", run.threads}};
  RunContext ctx = make_context(run.command, run.out, run.seed, run.threads, resolved);
  if (run.command == "kernel") return cmd_kernel(run.params, ctx);
  if (run.command == "fit") return cmd_fit(run.params, ctx);
  if (run.command == "dynamics") return cmd_dynamics(run.params, ctx);
  if (run.command == "widthscan") return cmd_widthscan(run.params, ctx);
  if (run.command == "distill") return cmd_distill(run.params, ctx, false);
  if (run.command == "advdistill") return cmd_distill(run.params, ctx, true);
  if (run.command == "attack") return cmd_attack(run.params, ctx);
  if (run.command == "features") return cmd_features(run.params, ctx);
  if (run.command == "experiment") return cmd_experiment(run.params, ctx);
  throw UsageError("unknown command '" + run.command + "'");
}

// dry-run validation: strict key checking per command without executing
void validate_params(const std::string& command, const json& params) {
  if (command == "kernel") {
    check_keys(params, {"dataset", "depth", "mc_check", "mc_samples", "mc_pairs"}, "kernel");
  } else if (command == "fit") {
    check_keys(params, {"train", "test", "depth", "ridge"}, "fit");
  } else if (command == "dynamics") {
    check_keys(params, {"dataset", "depth", "eta", "n_times", "t_max_factor"}, "dynamics");
  } else if (command == "widthscan") {
    check_keys(params, {"dataset", "widths", "seeds", "eta_frac", "steps"}, "widthscan");
  } else if (command == "distill") {
    check_keys(params, {"target", "heldout", "depth", "s", "init", "lr", "iters", "ridge",
                        "learn_labels"},
               "distill");
  } else if (command == "advdistill") {
    check_keys(params, {"target", "heldout", "depth", "s", "init", "lr", "iters", "ridge",
                        "learn_labels", "attack"},
               "advdistill");
  } else if (command == "attack") {
    check_keys(params, {"train", "eval", "depth", "ridge", "attack"}, "attack");
  } else if (command == "features") {
    check_keys(params, {"train", "eval", "depth", "attack", "rho_threshold", "gamma_threshold",
                        "export_images"},
               "features");
  } else if (command == "experiment") {
    check_keys(params, {"name", "d", "n", "c", "epsilon", "trials", "n_values", "d_values", "eta",
                        "steps", "k", "q", "delta", "g_table"},
               "experiment");
    require_key(params, "name", "experiment");
  }
  // nested dataset/attack blocks get checked too
  for (const char* key : {"dataset", "train", "test", "target", "heldout", "eval"}) {
    if (params.contains(key)) build_dataset(params.at(key), 0, std::string(key));
  }
  if (params.contains("attack")) build_attack(params.at("attack"), 0, "attack");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string(kVersion) +
               " -- analytic tangent-kernel laboratory: kernel regression, linearized dynamics, "
               "dataset distillation, adversarial attacks, eigenfeature analysis"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  bool seed_given = false, out_given = false, threads_given = false;
  std::vector<std::string> param_overrides;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file (flags override its values)");
    sub->add_option("--seed", seed, "global seed; propagates to every nested generator")
        ->each([&](const std::string&) { seed_given = true; });
    sub->add_option("--out", out_dir, "output directory")->each([&](const std::string&) {
      out_given = true;
    });
    sub->add_option("--threads", threads, "worker cap (0 = hardware)")
        ->each([&](const std::string&) { threads_given = true; });
    sub->add_option("--param", param_overrides,
                    "set a command parameter, key=value with a JSON value "
                    "(e.g. --param d=10000 --param 'widths=[64,256,1024]')");
  };

  CLI::App* run_cmd = app.add_subcommand("run", "execute a config file");
  add_common(run_cmd);

  CLI::App* validate_cmd = app.add_subcommand("validate", "check a config without running it");
  validate_cmd->add_option("--config", config_path, "JSON config file")->required();

  std::map<std::string, CLI::App*> direct;
  for (const std::string& name : kCommands) {
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " command");
    add_common(sub);
    direct[name] = sub;
  }
  // frequently used direct flags
  std::string experiment_name;
  direct["experiment"]->add_option("--name", experiment_name,
                                   "standard_sc | robust_sc | robust_crossing | tradeoff | "
                                   "equivariance | coupon");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (validate_cmd->parsed()) {
      const json config = load_config(config_path);
      const ResolvedRun run = resolve_config(config);
      validate_params(run.command, run.params);
      json resolved{{"command", run.command},
                    {"seed", run.seed},
                    {"out", run.out.empty() ? std::string("runs/") + run.command : run.out},
                    {"threads", run.threads},
                    {"params", run.params}};
      std::cout << resolved.dump(2) << "\n";
      return 0;
    }

    json config = json::object();
    if (!config_path.empty()) config = load_config(config_path);
    for (const auto& [name, sub] : direct) {
      if (sub->parsed()) {
        if (config.contains("command") &&
            config.at("command").get<std::string>() != name) {
          throw UsageError("config names command '" +
                           config.at("command").get<std::string>() + "' but subcommand is '" +
                           name + "'");
        }
        config["command"] = name;
      }
    }
    if (run_cmd->parsed() && !config.contains("command"))
      throw UsageError("run: config must name a command");
    if (seed_given) config["seed"] = seed;
    if (out_given) config["out"] = out_dir;
    if (threads_given) config["threads"] = threads;
    if (!experiment_name.empty()) config["params"]["name"] = experiment_name;
    for (const std::string& kv : param_overrides) {
      const std::size_t eq = kv.find('=');
      if (eq == std::string::npos || eq == 0)
        throw UsageError("--param expects key=value, got '" + kv + "'");
      const std::string key = kv.substr(0, eq);
      const std::string raw = kv.substr(eq + 1);
      const json parsed = json::parse(raw, nullptr, /*allow_exceptions=*/false);
      config["params"][key] = parsed.is_discarded() ? json(raw) : parsed;
    }

    const ResolvedRun run = resolve_config(config);
    return dispatch(run);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
