#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "calsharp/checks.hpp"
#include "calsharp/diagram.hpp"
#include "calsharp/io.hpp"
#include "calsharp/metrics.hpp"
#include "calsharp/recalibrate.hpp"

namespace fs = std::filesystem;
using namespace calsharp;

namespace {

const std::vector<std::string> kMethodOrder = {"none", "ts", "hb", "ir", "mrr"};

struct CommonOpts {
  std::string input;
  std::string format = "auto";
  double split_fraction = 0.2;
  std::uint64_t seed = 0;
  std::string divergence = "brier";
  std::string kernel = "gaussian";
  double bandwidth = 0.05;
  int bins = 15;
  std::vector<std::string> recal;
  std::string out = ".";
  bool parallel = false;

  CLI::Option* seed_opt = nullptr;

  void attach(CLI::App* app) {
    app->add_option("--input", input, "prediction dump to evaluate")->required();
    app->add_option("--format", format, "input format: csv, jsonl or auto")
        ->check(CLI::IsMember({"csv", "jsonl", "auto"}));
    app->add_option("--split", split_fraction, "calibration fraction of the input")
        ->check(CLI::Range(0.0, 1.0));
    seed_opt = app->add_option("--seed", seed, "split/subsampling seed (default: CALSHARP_SEED or 0)");
    app->add_option("--divergence", divergence, "bregman divergence: brier or kl")
        ->check(CLI::IsMember({"brier", "kl"}));
    app->add_option("--kernel", kernel, "smoothing kernel: gaussian or epanechnikov")
        ->check(CLI::IsMember({"gaussian", "epanechnikov"}));
    app->add_option("--bandwidth", bandwidth, "kernel bandwidth")->check(CLI::PositiveNumber);
    app->add_option("--bins", bins, "bin count for binned metrics")->check(CLI::PositiveNumber);
    app->add_option("--recal", recal, "recalibrators to run (repeatable): none, ts, hb, ir, mrr")
        ->check(CLI::IsMember(kMethodOrder));
    app->add_option("--out", out, "output directory");
    app->add_flag("--parallel", parallel, "process methods concurrently");
  }

  //! Applies the CALSHARP_SEED fallback after parsing.
  void resolve_seed() {
    if (seed_opt && seed_opt->count() > 0) return;
    const char* env = std::getenv("CALSHARP_SEED");
    if (!env) return;
    const std::string s(env);
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
      throw Error("CALSHARP_SEED is not an unsigned integer: '" + s + "'");
    seed = v;
  }

  std::vector<std::string> methods() const {
    if (recal.empty()) return kMethodOrder;
    std::vector<std::string> picked;
    for (const std::string& name : kMethodOrder)
      if (std::find(recal.begin(), recal.end(), name) != recal.end()) picked.push_back(name);
    return picked;
  }

  InputFormat resolved_format() const {
    if (format == "csv") return InputFormat::csv;
    if (format == "jsonl") return InputFormat::jsonl;
    return infer_format(input);
  }

  MetricsConfig metrics_config() const {
    MetricsConfig config;
    config.bins = bins;
    config.kernel = KernelSpec{kernel_from_name(kernel), bandwidth};
    config.divergence = BregmanSpec{divergence_from_name(divergence)};
    config.subsample.seed = seed;
    return config;
  }
};

Recalibrator fit_by_name(const std::string& name, const PredictionSet& calib, int bins) {
  if (name == "ts") return fit_temperature(calib);
  if (name == "hb") return fit_histogram_binning(calib, bins);
  if (name == "ir") return fit_isotonic(calib);
  if (name == "mrr") return fit_mrr(calib);
  throw Error("unknown recalibrator '" + name + "'");
}

//! Evaluation-side data for one method: the transformed set and its view.
struct MethodData {
  PredictionSet data;
  ConfidenceView view;
  nlohmann::json recal_params;
};

MethodData prepare_method(const std::string& name, const PredictionSet& calib,
                          const PredictionSet& eval, int bins) {
  if (name == "none") return {eval, confidence_view(eval), nullptr};
  if (calib.n == 0) throw Error("recalibrator '" + name + "' needs a non-empty calibration split");
  const Recalibrator recal = fit_by_name(name, calib, bins);
  RecalibratedPredictionSet rps = apply(recal, eval);
  ConfidenceView view = confidence_view(rps);
  return {std::move(rps.data), std::move(view), recal.to_json()};
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << content;
  if (!out) throw Error("failed writing " + path.string());
}

template <typename Fn>
std::vector<std::invoke_result_t<Fn, std::string>> over_methods(
    const std::vector<std::string>& names, bool parallel, Fn fn) {
  using R = std::invoke_result_t<Fn, std::string>;
  std::vector<R> results;
  results.reserve(names.size());
  if (!parallel) {
    for (const auto& name : names) results.push_back(fn(name));
    return results;
  }
  std::vector<std::future<R>> futures;
  futures.reserve(names.size());
  for (const auto& name : names)
    futures.push_back(std::async(std::launch::async, fn, name));
  for (auto& f : futures) results.push_back(f.get());
  return results;
}

nlohmann::json run_config(const CommonOpts& opts, const PredictionSet& full,
                          const PredictionSet& calib, const PredictionSet& eval) {
  nlohmann::json j;
  j["input"] = opts.input;
  j["n_total"] = full.n;
  j["n_calib"] = calib.n;
  j["n_eval"] = eval.n;
  j["k"] = full.k;
  j["split_fraction"] = opts.split_fraction;
  j["seed"] = opts.seed;
  j["divergence"] = opts.divergence;
  j["kernel"] = opts.kernel;
  j["bandwidth"] = opts.bandwidth;
  j["bins"] = opts.bins;
  j["prob_clamp"] = kProbClamp;
  j["ace_convention"] = "mean over nonempty equal-mass bins, ties to the lower bin";
  return j;
}

int cmd_evaluate(const CommonOpts& opts) {
  const PredictionSet full = load_predictions(opts.input, opts.resolved_format());
  const auto [calib, eval] = split(full, SplitSpec{opts.split_fraction, opts.seed});
  if (eval.n == 0) throw Error("evaluation split is empty; lower --split");
  const MetricsConfig config = opts.metrics_config();
  const auto names = opts.methods();

  auto one = [&](const std::string& name) {
    const MethodData md = prepare_method(name, calib, eval, opts.bins);
    return metrics_table(md.data, md.view, config);
  };
  const auto tables = over_methods(names, opts.parallel, one);

  nlohmann::json out_json;
  out_json["config"] = run_config(opts, full, calib, eval);
  for (std::size_t i = 0; i < names.size(); ++i)
    out_json["methods"][names[i]] = metrics_to_json(tables[i]);
  const std::string table = format_metrics_table(names, tables);

  fs::create_directories(opts.out);
  write_text(fs::path(opts.out) / "metrics.json", out_json.dump(2) + "\n");
  write_text(fs::path(opts.out) / "table.txt", table);
  std::cout << table;
  return 0;
}

struct DiagramOpts {
  bool align_y = false;
  bool reliability = false;
};

int cmd_diagram(const CommonOpts& opts, const DiagramOpts& dopts) {
  const PredictionSet full = load_predictions(opts.input, opts.resolved_format());
  const auto [calib, eval] = split(full, SplitSpec{opts.split_fraction, opts.seed});
  if (eval.n == 0) throw Error("evaluation split is empty; lower --split");
  const auto names = opts.methods();
  const BregmanSpec spec{divergence_from_name(opts.divergence)};
  const KernelSpec kernel{kernel_from_name(opts.kernel), opts.bandwidth};
  const auto grid = uniform_grid();

  struct Prepared {
    MethodData md;
    CurveEstimate curve;
    DecompositionReport report;
  };
  auto one = [&](const std::string& name) {
    Prepared p{prepare_method(name, calib, eval, opts.bins), {}, {}};
    SubsamplePolicy policy;
    policy.seed = opts.seed;
    p.curve = pointwise_sharpness_gap(p.md.data, p.md.view, spec, kernel, grid);
    p.report = decomposition_report(p.md.data, p.md.view, spec, kernel, policy);
    return p;
  };
  const auto prepared = over_methods(names, opts.parallel, one);

  DiagramStyle style;
  if (dopts.align_y) {
    std::pair<double, double> range{0.0, 1.0};
    for (const auto& p : prepared) {
      const auto r = natural_y_range(p.curve);
      range.first = std::min(range.first, r.first);
      range.second = std::max(range.second, r.second);
    }
    style.align_y = range;
  }

  fs::create_directories(opts.out);
  for (std::size_t i = 0; i < names.size(); ++i) {
    const Diagram d = render_calibration_sharpness(prepared[i].curve, prepared[i].report, style);
    nlohmann::json sidecar = d.sidecar;
    sidecar["method"] = names[i];
    if (!prepared[i].md.recal_params.is_null()) sidecar["recalibrator"] = prepared[i].md.recal_params;
    write_text(fs::path(opts.out) / (names[i] + ".svg"), d.svg);
    write_text(fs::path(opts.out) / (names[i] + ".json"), sidecar.dump(2) + "\n");
    if (dopts.reliability) {
      const std::string svg = render_reliability(prepared[i].md.view, opts.bins, style);
      write_text(fs::path(opts.out) / (names[i] + "_reliability.svg"), svg);
    }
    std::cout << "wrote " << (fs::path(opts.out) / (names[i] + ".svg")).string() << "\n";
  }
  return 0;
}

int cmd_synthcheck(const std::string& suite, std::uint64_t seed) {
  const auto results = checks::run_suite(suite, seed);
  int failures = 0;
  for (const auto& r : results) {
    std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail << "\n";
    if (!r.pass) ++failures;
  }
  return failures;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"calibration-sharpness diagnostics for classifier prediction dumps"};
  app.require_subcommand(1);

  CommonOpts eval_opts;
  auto* eval_cmd = app.add_subcommand("evaluate", "compute the metrics table per method");
  eval_opts.attach(eval_cmd);

  CommonOpts diag_opts;
  DiagramOpts diag_extra;
  auto* diag_cmd = app.add_subcommand("diagram", "render calibration-sharpness diagrams");
  diag_opts.attach(diag_cmd);
  diag_cmd->add_flag("--align-y", diag_extra.align_y, "share one y range across methods");
  diag_cmd->add_flag("--reliability", diag_extra.reliability, "also render reliability diagrams");

  std::string suite;
  std::uint64_t check_seed = 0;
  auto* check_cmd = app.add_subcommand("synthcheck", "run a self-check suite on synthetic worlds");
  check_cmd->add_option("--suite", suite, "decomposition, lowerbound, scaling, consistency or pava")
      ->required();
  auto* check_seed_opt = check_cmd->add_option("--seed", check_seed, "world generation seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (eval_cmd->parsed()) {
      eval_opts.resolve_seed();
      return cmd_evaluate(eval_opts);
    }
    if (diag_cmd->parsed()) {
      diag_opts.resolve_seed();
      return cmd_diagram(diag_opts, diag_extra);
    }
    if (check_seed_opt->count() == 0) {
      if (const char* env = std::getenv("CALSHARP_SEED")) check_seed = std::strtoull(env, nullptr, 10);
    }
    return cmd_synthcheck(suite, check_seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
