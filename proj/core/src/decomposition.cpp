#include "calsharp/decomposition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace calsharp {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

double clamp_unit(double p, double clamp) { return std::min(std::max(p, clamp), 1.0 - clamp); }

nlohmann::json masked_array(const std::vector<double>& vals,
                            const std::vector<std::uint8_t>& defined) {
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t i = 0; i < vals.size(); ++i) {
    if (defined[i])
      arr.push_back(vals[i]);
    else
      arr.push_back(nullptr);
  }
  return arr;
}

nlohmann::json estimate_json(const EstimateWithSpread& e) {
  nlohmann::json j;
  j["mean"] = std::isinf(e.mean) ? nlohmann::json("inf") : nlohmann::json(e.mean);
  j["std"] = e.std;
  j["reps"] = e.reps;
  return j;
}

}  // namespace

std::vector<double> label_divergences(const PredictionSet& ps, const BregmanSpec& spec) {
  std::vector<double> d(ps.n);
  for (std::size_t i = 0; i < ps.n; ++i)
    d[i] = spec.pointwise_label_divergence(ps.labels[i], ps.row(i));
  return d;
}

CurveEstimate pointwise_sharpness_gap(const PredictionSet& ps, const ConfidenceView& view,
                                      const BregmanSpec& spec, const KernelSpec& kernel,
                                      std::span<const double> grid, bool reflect_regression,
                                      double clamp) {
  if (ps.n != view.size()) throw Error("pointwise_sharpness_gap: view does not match set");
  if (ps.n == 0) throw Error("pointwise_sharpness_gap: empty sample");
  const bool is_kl = spec.kind == Divergence::kl;

  std::vector<double> hits(ps.n);
  for (std::size_t i = 0; i < ps.n; ++i) hits[i] = view.hit[i];
  std::vector<double> divs = label_divergences(ps, spec);
  if (is_kl) {
    // cap at -log(clamp); equivalent to clamping the label probability below
    const double cap = -std::log(clamp);
    for (double& d : divs) d = std::min(d, cap);
  }

  CurveEstimate c;
  c.grid.assign(grid.begin(), grid.end());
  c.divergence = spec.name();
  c.kernel = kernel;
  c.reflect_regression = reflect_regression;
  c.density = kde(view.conf, kernel, grid);
  const auto cal = nw_regress(view.conf, hits, kernel, grid, reflect_regression);
  const auto cond = nw_regress(view.conf, divs, kernel, grid, reflect_regression);

  const std::size_t m = grid.size();
  c.cal_curve.assign(m, kNaN);
  c.cond_div.assign(m, kNaN);
  c.rho.assign(m, kNaN);
  c.rho_clamped.assign(m, kNaN);
  c.defined.assign(m, 0);
  for (std::size_t i = 0; i < m; ++i) {
    if (!cal[i] || !cond[i]) continue;
    c.defined[i] = 1;
    c.cal_curve[i] = *cal[i];
    c.cond_div[i] = *cond[i];
    double a = *cal[i];
    double p = grid[i];
    if (is_kl) {
      a = clamp_unit(a, clamp);
      p = clamp_unit(p, clamp);
    }
    c.rho[i] = *cond[i] - spec.divergence_1d(a, p);
    c.rho_clamped[i] = std::max(c.rho[i], 0.0);
  }
  return c;
}

CurveEstimate pointwise_sharpness_gap(const PredictionSet& ps, const BregmanSpec& spec,
                                      const KernelSpec& kernel, std::span<const double> grid,
                                      bool reflect_regression, double clamp) {
  return pointwise_sharpness_gap(ps, confidence_view(ps), spec, kernel, grid,
                                 reflect_regression, clamp);
}

DecompositionReport decomposition_report(const PredictionSet& ps, const ConfidenceView& view,
                                         const BregmanSpec& spec, const KernelSpec& kernel,
                                         const SubsamplePolicy& policy, double clamp) {
  if (ps.n != view.size()) throw Error("decomposition_report: view does not match set");
  const std::vector<double> divs = label_divergences(ps, spec);
  DecompositionReport r;
  r.divergence = spec.name();
  r.kernel = kernel;
  double s = 0.0;
  for (double d : divs) s += d;
  r.total_direct = s / static_cast<double>(ps.n);
  if (std::isinf(r.total_direct)) {
    r.total = {kInf, 0.0, 1};
  } else {
    auto estimator = [&](std::span<const std::size_t> idx) {
      double acc = 0.0;
      for (std::size_t i : idx) acc += divs[i];
      return acc / static_cast<double>(idx.size());
    };
    r.total = subsample_mean_estimate(estimator, ps.n, policy);
  }
  r.cal = plugin_calibration_error(view, spec, kernel, policy, clamp);
  r.sharp_gap = r.total.mean - r.cal.mean;
  return r;
}

DecompositionReport decomposition_report(const PredictionSet& ps, const BregmanSpec& spec,
                                         const KernelSpec& kernel, const SubsamplePolicy& policy,
                                         double clamp) {
  return decomposition_report(ps, confidence_view(ps), spec, kernel, policy, clamp);
}

nlohmann::json to_json(const CurveEstimate& c) {
  nlohmann::json j;
  j["config"] = {{"divergence", c.divergence},
                 {"kernel", c.kernel.name()},
                 {"bandwidth", c.kernel.bandwidth},
                 {"reflect_regression", c.reflect_regression},
                 {"grid_points", c.grid.size()}};
  j["grid"] = c.grid;
  j["density"] = c.density;
  j["cal_curve"] = masked_array(c.cal_curve, c.defined);
  j["cond_div"] = masked_array(c.cond_div, c.defined);
  j["rho"] = masked_array(c.rho, c.defined);
  j["rho_clamped"] = masked_array(c.rho_clamped, c.defined);
  return j;
}

nlohmann::json to_json(const DecompositionReport& r) {
  nlohmann::json j;
  j["divergence"] = r.divergence;
  j["kernel"] = {{"name", r.kernel.name()}, {"bandwidth", r.kernel.bandwidth}};
  j["total"] = estimate_json(r.total);
  j["total_direct"] = std::isinf(r.total_direct) ? nlohmann::json("inf")
                                                 : nlohmann::json(r.total_direct);
  j["cal"] = estimate_json(r.cal);
  j["sharp_gap"] = std::isinf(r.sharp_gap) ? nlohmann::json("inf")
                                           : nlohmann::json(r.sharp_gap);
  return j;
}

}  // namespace calsharp
