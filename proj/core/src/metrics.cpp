#include "calsharp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

namespace calsharp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double clamp_unit(double p, double clamp) { return std::min(std::max(p, clamp), 1.0 - clamp); }

void check_view(const ConfidenceView& view) {
  if (view.size() == 0) throw Error("metric on an empty sample");
}

std::vector<double> hits_as_double(const ConfidenceView& view) {
  std::vector<double> h(view.size());
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = view.hit[i];
  return h;
}

}  // namespace

double accuracy(const ConfidenceView& view) {
  check_view(view);
  double s = 0.0;
  for (auto h : view.hit) s += h;
  return s / static_cast<double>(view.size());
}

double binned_ece(const ConfidenceView& view, int bins) {
  check_view(view);
  if (bins < 1) throw Error("binned_ece: bins must be >= 1");
  const auto b = static_cast<std::size_t>(bins);
  std::vector<double> conf_sum(b, 0.0), hit_sum(b, 0.0), count(b, 0.0);
  for (std::size_t i = 0; i < view.size(); ++i) {
    auto bin = static_cast<std::size_t>(view.conf[i] * bins);
    if (bin >= b) bin = b - 1;  // confidence exactly 1 lands in the last bin
    conf_sum[bin] += view.conf[i];
    hit_sum[bin] += view.hit[i];
    count[bin] += 1.0;
  }
  double e = 0.0;
  const double n = static_cast<double>(view.size());
  for (std::size_t j = 0; j < b; ++j) {
    if (count[j] == 0.0) continue;
    e += (count[j] / n) * std::abs(hit_sum[j] / count[j] - conf_sum[j] / count[j]);
  }
  return e;
}

double ace(const ConfidenceView& view, int bins) {
  check_view(view);
  if (bins < 1) throw Error("ace: bins must be >= 1");
  const std::size_t n = view.size();
  if (n < static_cast<std::size_t>(bins))
    throw Error("ace: fewer samples than bins");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t c) { return view.conf[a] < view.conf[c]; });

  const auto b = static_cast<std::size_t>(bins);
  std::vector<double> conf_sum(b, 0.0), hit_sum(b, 0.0), count(b, 0.0);
  std::size_t r = 0;
  while (r < n) {
    // a run of equal confidences is assigned as a whole to the run head's bin
    std::size_t r2 = r;
    while (r2 < n && view.conf[order[r2]] == view.conf[order[r]]) ++r2;
    const std::size_t bin = r * b / n;
    for (std::size_t t = r; t < r2; ++t) {
      conf_sum[bin] += view.conf[order[t]];
      hit_sum[bin] += view.hit[order[t]];
      count[bin] += 1.0;
    }
    r = r2;
  }
  double e = 0.0;
  std::size_t nonempty = 0;
  for (std::size_t j = 0; j < b; ++j) {
    if (count[j] == 0.0) continue;
    e += std::abs(hit_sum[j] / count[j] - conf_sum[j] / count[j]);
    ++nonempty;
  }
  return e / static_cast<double>(nonempty);
}

double smoothed_ece(const ConfidenceView& view, const KernelSpec& kernel,
                    std::size_t grid_points) {
  check_view(view);
  const auto grid = uniform_grid(grid_points);
  const auto hits = hits_as_double(view);
  const auto m = nw_regress(view.conf, hits, kernel, grid);
  const auto dens = kde(view.conf, kernel, grid);
  std::vector<double> f(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (dens[i] <= 0.0) {
      f[i] = 0.0;
      continue;
    }
    if (!m[i])
      throw Error("smoothed_ece: regression undefined where the density is positive");
    f[i] = std::abs(*m[i] - grid[i]) * dens[i];
  }
  double integral = 0.0;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i)
    integral += 0.5 * (f[i] + f[i + 1]) * (grid[i + 1] - grid[i]);
  return integral;
}

double nll(const PredictionSet& ps) {
  if (ps.n == 0) throw Error("metric on an empty sample");
  double s = 0.0;
  for (std::size_t i = 0; i < ps.n; ++i) {
    const double p = ps.row(i)[static_cast<std::size_t>(ps.labels[i])];
    if (p <= 0.0) return kInf;
    s -= std::log(p);
  }
  return s / static_cast<double>(ps.n);
}

double brier(const PredictionSet& ps) {
  if (ps.n == 0) throw Error("metric on an empty sample");
  const BregmanSpec spec = BregmanSpec::brier();
  double s = 0.0;
  for (std::size_t i = 0; i < ps.n; ++i)
    s += spec.pointwise_label_divergence(ps.labels[i], ps.row(i));
  return s / static_cast<double>(ps.n);
}

double plugin_calibration_error_direct(const ConfidenceView& view, const BregmanSpec& spec,
                                       const KernelSpec& kernel, double clamp) {
  check_view(view);
  const auto hits = hits_as_double(view);
  const auto m = nw_regress(view.conf, hits, kernel, view.conf);
  const bool is_kl = spec.kind == Divergence::kl;
  double s = 0.0;
  for (std::size_t i = 0; i < view.size(); ++i) {
    if (!m[i]) throw Error("plugin estimator: zero kernel mass at a sample point");
    const double h = view.conf[i];
    const double hc = is_kl ? clamp_unit(h, clamp) : h;
    const double mc = is_kl ? clamp_unit(*m[i], clamp) : *m[i];
    s += spec.phi1(mc) - spec.phi1(hc) - spec.dphi1(hc) * (hits[i] - h);
  }
  return s / static_cast<double>(view.size());
}

EstimateWithSpread plugin_calibration_error(const ConfidenceView& view, const BregmanSpec& spec,
                                            const KernelSpec& kernel,
                                            const SubsamplePolicy& policy, double clamp) {
  check_view(view);
  auto estimator = [&](std::span<const std::size_t> idx) {
    const ConfidenceView sub = subset_view(view, idx);
    return plugin_calibration_error_direct(sub, spec, kernel, clamp);
  };
  return subsample_mean_estimate(estimator, view.size(), policy);
}

MetricsTable metrics_table(const PredictionSet& ps, const ConfidenceView& view,
                           const MetricsConfig& config) {
  if (ps.n != view.size()) throw Error("metrics_table: view does not match prediction set");
  MetricsTable t;
  t.accuracy = accuracy(view);
  t.ece_binned = binned_ece(view, config.bins);
  t.ace = ace(view, config.bins);
  t.smoothed_ece = smoothed_ece(view, config.kernel);
  t.nll = nll(ps);
  t.brier = brier(ps);
  t.plugin_cal_error =
      plugin_calibration_error(view, config.divergence, config.kernel, config.subsample);
  return t;
}

MetricsTable metrics_table(const PredictionSet& ps, const MetricsConfig& config) {
  return metrics_table(ps, confidence_view(ps), config);
}

namespace {

nlohmann::json number_or_inf(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

std::string cell(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * v);
  return buf;
}

}  // namespace

nlohmann::json metrics_to_json(const MetricsTable& t) {
  nlohmann::json j;
  j["accuracy"] = t.accuracy;
  j["ece_binned"] = t.ece_binned;
  j["ace"] = t.ace;
  j["smoothed_ece"] = t.smoothed_ece;
  j["nll"] = number_or_inf(t.nll);
  j["brier"] = number_or_inf(t.brier);
  j["plugin_cal_error"] = number_or_inf(t.plugin_cal_error.mean);
  j["plugin_cal_std"] = t.plugin_cal_error.std;
  j["plugin_reps"] = t.plugin_cal_error.reps;
  return j;
}

std::string format_metrics_table(std::span<const std::string> names,
                                 std::span<const MetricsTable> rows) {
  if (names.size() != rows.size()) throw Error("format_metrics_table: names/rows mismatch");
  static const char* kHeaders[] = {"method",  "acc",   "ece", "ace",
                                   "smooth",  "nll",   "brier", "d_cal"};
  constexpr int kCols = 8;
  std::vector<std::vector<std::string>> cells;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const MetricsTable& t = rows[i];
    cells.push_back({names[i], cell(t.accuracy), cell(t.ece_binned), cell(t.ace),
                     cell(t.smoothed_ece), cell(t.nll), cell(t.brier),
                     cell(t.plugin_cal_error.mean)});
  }
  std::size_t width[kCols];
  for (int c = 0; c < kCols; ++c) {
    width[c] = std::string(kHeaders[c]).size();
    for (const auto& row : cells) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& row) {
    for (int c = 0; c < kCols; ++c) {
      if (c) out << "  ";
      out << row[c];
      if (c + 1 < kCols)
        for (std::size_t p = row[c].size(); p < width[c]; ++p) out << ' ';
    }
    out << '\n';
  };
  emit({kHeaders[0], kHeaders[1], kHeaders[2], kHeaders[3], kHeaders[4], kHeaders[5], kHeaders[6],
        kHeaders[7]});
  for (const auto& row : cells) emit(row);
  return out.str();
}

}  // namespace calsharp
