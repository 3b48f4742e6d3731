#include "calsharp/recalibrate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>

namespace calsharp {

namespace {

constexpr double kLogTMin = -4.605170185988091;  // log 0.01
constexpr double kLogTMax = 4.605170185988091;   // log 100

std::vector<double> log_rows(const PredictionSet& ps) {
  if (ps.logits) return *ps.logits;
  std::vector<double> z(ps.probs.size());
  for (std::size_t i = 0; i < z.size(); ++i)
    z[i] = ps.probs[i] > 0.0 ? std::log(ps.probs[i])
                             : -std::numeric_limits<double>::infinity();
  return z;
}

//! Mean NLL of softmax(z / T) over all rows.
double nll_at_temperature(const std::vector<double>& z, const std::vector<int>& labels,
                          std::size_t k, double temperature) {
  const std::size_t n = labels.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = z.data() + i * k;
    double m = row[0] / temperature;
    for (std::size_t j = 1; j < k; ++j) m = std::max(m, row[j] / temperature);
    double lse = 0.0;
    for (std::size_t j = 0; j < k; ++j) lse += std::exp(row[j] / temperature - m);
    const double zl = row[static_cast<std::size_t>(labels[i])] / temperature;
    s += std::log(lse) - (zl - m);
  }
  return s / static_cast<double>(n);
}

//! Golden-section minimizer on [lo, hi]; f must be unimodal there.
double golden_section(const std::function<double(double)>& f, double lo, double hi, double tol) {
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - gr * (b - a);
  double d = a + gr * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

std::size_t argmax_row(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j)
    if (row[j] > row[best]) best = j;
  return best;
}

std::size_t bin_of(double p, std::size_t bins) {
  auto b = static_cast<std::size_t>(p * static_cast<double>(bins));
  return b >= bins ? bins - 1 : b;
}

//! Renormalizes a transformed row in place; an all-zero row becomes uniform.
void renormalize(std::vector<double>& row) {
  double s = std::accumulate(row.begin(), row.end(), 0.0);
  if (s > 0.0) {
    for (double& v : row) v /= s;
  } else {
    std::fill(row.begin(), row.end(), 1.0 / static_cast<double>(row.size()));
  }
}

}  // namespace

const char* Recalibrator::name() const {
  struct Visitor {
    const char* operator()(const TemperatureScaling&) const { return "ts"; }
    const char* operator()(const HistogramBinning&) const { return "hb"; }
    const char* operator()(const IsotonicRegression&) const { return "ir"; }
    const char* operator()(const MeanReplacement&) const { return "mrr"; }
  };
  return std::visit(Visitor{}, method);
}

ConfidenceView confidence_view(const RecalibratedPredictionSet& rps) {
  ConfidenceView view;
  const std::size_t n = rps.data.n;
  view.pred = rps.stored_pred;
  view.conf.resize(n);
  view.hit.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int p = rps.stored_pred[i];
    view.conf[i] = rps.data.row(i)[static_cast<std::size_t>(p)];
    view.hit[i] = rps.data.labels[i] == p ? 1 : 0;
  }
  return view;
}

std::vector<double> pava(std::span<const double> ys, std::span<const double> weights) {
  if (ys.size() != weights.size()) throw Error("pava: ys and weights differ in length");
  if (ys.empty()) return {};
  for (double w : weights)
    if (!(w > 0.0)) throw Error("pava: weights must be positive");

  // blocks keep (weighted sum, weight, length); means are formed on demand
  struct Block {
    double sum, weight;
    std::size_t len;
  };
  std::vector<Block> blocks;
  blocks.reserve(ys.size());
  for (std::size_t i = 0; i < ys.size(); ++i) {
    blocks.push_back({ys[i] * weights[i], weights[i], 1});
    while (blocks.size() > 1) {
      const Block& prev = blocks[blocks.size() - 2];
      const Block& top = blocks.back();
      if (prev.sum / prev.weight <= top.sum / top.weight) break;
      Block merged{prev.sum + top.sum, prev.weight + top.weight, prev.len + top.len};
      blocks.pop_back();
      blocks.back() = merged;
    }
  }
  std::vector<double> fit;
  fit.reserve(ys.size());
  for (const Block& b : blocks) {
    const double mean = b.sum / b.weight;
    fit.insert(fit.end(), b.len, mean);
  }
  return fit;
}

Recalibrator fit_temperature(const PredictionSet& calib, double tol) {
  if (calib.n == 0) throw Error("fit_temperature: empty calibration set");
  const std::vector<double> z = log_rows(calib);

  bool degenerate = true;
  for (std::size_t i = 0; i < calib.n && degenerate; ++i) {
    const auto r = calib.row(i);
    if (r[argmax_row(r)] < 1.0 - 1e-9) degenerate = false;
  }
  if (degenerate) {
    std::fprintf(stderr, "fit_temperature: calibration rows are one-hot, pinning T to the lower bound\n");
    return {TemperatureScaling{std::exp(kLogTMin)}};
  }

  auto objective = [&](double log_t) {
    return nll_at_temperature(z, calib.labels, calib.k, std::exp(log_t));
  };
  const double log_t = golden_section(objective, kLogTMin, kLogTMax, tol);
  double temperature = std::exp(log_t);
  // never hand back a temperature that fits worse than leaving logits alone
  if (objective(log_t) > objective(0.0)) temperature = 1.0;
  return {TemperatureScaling{temperature}};
}

Recalibrator fit_histogram_binning(const PredictionSet& calib, int bins) {
  if (calib.n == 0) throw Error("fit_histogram_binning: empty calibration set");
  if (bins < 1) throw Error("fit_histogram_binning: bins must be >= 1");
  const auto b = static_cast<std::size_t>(bins);
  HistogramBinning hb;
  hb.k = calib.k;
  hb.edges.resize(b + 1);
  for (std::size_t e = 0; e <= b; ++e)
    hb.edges[e] = static_cast<double>(e) / static_cast<double>(b);
  hb.values.assign(calib.k * b, 0.0);
  std::vector<double> count(calib.k * b, 0.0);
  for (std::size_t i = 0; i < calib.n; ++i) {
    const auto r = calib.row(i);
    for (std::size_t j = 0; j < calib.k; ++j) {
      const std::size_t cell = j * b + bin_of(r[j], b);
      count[cell] += 1.0;
      if (calib.labels[i] == static_cast<int>(j)) hb.values[cell] += 1.0;
    }
  }
  for (std::size_t cell = 0; cell < hb.values.size(); ++cell)
    if (count[cell] > 0.0) hb.values[cell] /= count[cell];
  return {std::move(hb)};
}

Recalibrator fit_isotonic(const PredictionSet& calib) {
  if (calib.n == 0) throw Error("fit_isotonic: empty calibration set");
  IsotonicRegression ir;
  ir.k = calib.k;
  ir.breakpoints.resize(calib.k);
  ir.values.resize(calib.k);
  std::vector<std::size_t> order(calib.n);
  std::vector<double> xs(calib.n), ys(calib.n);
  const std::vector<double> w(calib.n, 1.0);
  for (std::size_t j = 0; j < calib.k; ++j) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) {
      return calib.row(a)[j] < calib.row(c)[j];
    });
    for (std::size_t t = 0; t < calib.n; ++t) {
      xs[t] = calib.row(order[t])[j];
      ys[t] = calib.labels[order[t]] == static_cast<int>(j) ? 1.0 : 0.0;
    }
    const std::vector<double> fit = pava(ys, w);
    // keep the last entry of each run of equal x; it wins the step lookup
    auto& bp = ir.breakpoints[j];
    auto& val = ir.values[j];
    for (std::size_t t = 0; t < calib.n; ++t) {
      if (!bp.empty() && bp.back() == xs[t])
        val.back() = fit[t];
      else {
        bp.push_back(xs[t]);
        val.push_back(fit[t]);
      }
    }
  }
  return {std::move(ir)};
}

Recalibrator fit_mrr(const PredictionSet& calib) {
  if (calib.n == 0) throw Error("fit_mrr: empty calibration set");
  const ConfidenceView view = confidence_view(calib);
  double s = 0.0;
  for (auto h : view.hit) s += h;
  return {MeanReplacement{s / static_cast<double>(calib.n)}};
}

RecalibratedPredictionSet apply(const Recalibrator& recal, const PredictionSet& ps) {
  if (ps.n == 0) throw Error("apply: empty prediction set");
  RecalibratedPredictionSet out;
  const ConfidenceView base = confidence_view(ps);

  std::vector<double> probs(ps.n * ps.k);
  if (const auto* ts = std::get_if<TemperatureScaling>(&recal.method)) {
    const std::vector<double> z = log_rows(ps);
    const double t = ts->temperature;
    std::vector<double> scaled(ps.k);
    for (std::size_t i = 0; i < ps.n; ++i) {
      for (std::size_t j = 0; j < ps.k; ++j) scaled[j] = z[i * ps.k + j] / t;
      const auto p = stable_softmax(scaled);
      std::copy(p.begin(), p.end(), probs.begin() + i * ps.k);
    }
  } else if (const auto* hb = std::get_if<HistogramBinning>(&recal.method)) {
    if (hb->k != ps.k) throw Error("apply: histogram binning fitted for k=" + std::to_string(hb->k));
    const std::size_t b = hb->edges.size() - 1;
    std::vector<double> row(ps.k);
    for (std::size_t i = 0; i < ps.n; ++i) {
      const auto r = ps.row(i);
      for (std::size_t j = 0; j < ps.k; ++j) row[j] = hb->values[j * b + bin_of(r[j], b)];
      renormalize(row);
      std::copy(row.begin(), row.end(), probs.begin() + i * ps.k);
    }
  } else if (const auto* ir = std::get_if<IsotonicRegression>(&recal.method)) {
    if (ir->k != ps.k) throw Error("apply: isotonic map fitted for k=" + std::to_string(ir->k));
    std::vector<double> row(ps.k);
    for (std::size_t i = 0; i < ps.n; ++i) {
      const auto r = ps.row(i);
      for (std::size_t j = 0; j < ps.k; ++j) {
        const auto& bp = ir->breakpoints[j];
        const auto& val = ir->values[j];
        auto it = std::upper_bound(bp.begin(), bp.end(), r[j]);
        const std::size_t pos = it == bp.begin() ? 0 : static_cast<std::size_t>(it - bp.begin()) - 1;
        row[j] = val[pos];
      }
      renormalize(row);
      std::copy(row.begin(), row.end(), probs.begin() + i * ps.k);
    }
  } else {
    const auto& mrr = std::get<MeanReplacement>(recal.method);
    const double other = (1.0 - mrr.h_bar) / static_cast<double>(ps.k - 1);
    for (std::size_t i = 0; i < ps.n; ++i) {
      for (std::size_t j = 0; j < ps.k; ++j) probs[i * ps.k + j] = other;
      probs[i * ps.k + static_cast<std::size_t>(base.pred[i])] = mrr.h_bar;
    }
  }
  out.data = PredictionSet::from_probs(ps.k, std::move(probs), ps.labels);
  out.stored_pred.resize(ps.n);
  if (std::holds_alternative<MeanReplacement>(recal.method)) {
    // flattened rows carry no argmax information; keep the original class
    out.stored_pred = base.pred;
  } else {
    for (std::size_t i = 0; i < ps.n; ++i)
      out.stored_pred[i] = static_cast<int>(argmax_row(out.data.row(i)));
  }
  return out;
}

nlohmann::json Recalibrator::to_json() const {
  nlohmann::json j;
  j["method"] = name();
  if (const auto* ts = std::get_if<TemperatureScaling>(&method)) {
    j["temperature"] = ts->temperature;
  } else if (const auto* hb = std::get_if<HistogramBinning>(&method)) {
    j["k"] = hb->k;
    j["edges"] = hb->edges;
    j["values"] = hb->values;
  } else if (const auto* ir = std::get_if<IsotonicRegression>(&method)) {
    j["k"] = ir->k;
    j["breakpoints"] = ir->breakpoints;
    j["values"] = ir->values;
  } else {
    j["h_bar"] = std::get<MeanReplacement>(method).h_bar;
  }
  return j;
}

Recalibrator Recalibrator::from_json(const nlohmann::json& j) {
  const std::string method = j.at("method").get<std::string>();
  if (method == "ts") return {TemperatureScaling{j.at("temperature").get<double>()}};
  if (method == "hb") {
    HistogramBinning hb;
    hb.k = j.at("k").get<std::size_t>();
    hb.edges = j.at("edges").get<std::vector<double>>();
    hb.values = j.at("values").get<std::vector<double>>();
    return {std::move(hb)};
  }
  if (method == "ir") {
    IsotonicRegression ir;
    ir.k = j.at("k").get<std::size_t>();
    ir.breakpoints = j.at("breakpoints").get<std::vector<std::vector<double>>>();
    ir.values = j.at("values").get<std::vector<std::vector<double>>>();
    return {std::move(ir)};
  }
  if (method == "mrr") return {MeanReplacement{j.at("h_bar").get<double>()}};
  throw Error("unknown recalibrator '" + method + "'");
}

}  // namespace calsharp
