#include "calsharp/predictions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace calsharp {

namespace {

constexpr double kRowSumTol = 1e-4;     // beyond this a row is rejected
constexpr double kRowSumExact = 1e-9;   // below this a row is taken as-is

//! splitmix64 step; a small portable generator used only for the split.
std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

//! Maps a 64-bit word onto [0, bound) by the multiply-shift reduction.
std::uint64_t bounded(std::uint64_t word, std::uint64_t bound) {
  return static_cast<std::uint64_t>(
      (static_cast<unsigned __int128>(word) * bound) >> 64);
}

void normalize_rows(std::size_t n, std::size_t k, std::vector<double>& probs) {
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += probs[i * k + j];
    const double dev = std::abs(s - 1.0);
    if (dev > kRowSumExact && dev <= kRowSumTol) {
      for (std::size_t j = 0; j < k; ++j) probs[i * k + j] /= s;
    }
  }
}

PredictionSet take_rows(const PredictionSet& ps, const std::vector<std::size_t>& idx) {
  PredictionSet out;
  out.n = idx.size();
  out.k = ps.k;
  out.probs.reserve(out.n * ps.k);
  out.labels.reserve(out.n);
  if (ps.logits) out.logits.emplace();
  for (std::size_t i : idx) {
    const auto r = ps.row(i);
    out.probs.insert(out.probs.end(), r.begin(), r.end());
    out.labels.push_back(ps.labels[i]);
    if (ps.logits) {
      const auto z = ps.logit_row(i);
      out.logits->insert(out.logits->end(), z.begin(), z.end());
    }
  }
  return out;
}

}  // namespace

void PredictionSet::validate() const {
  if (k < 2) throw Error("prediction set needs at least 2 classes, got " + std::to_string(k));
  if (probs.size() != n * k) throw Error("probs size does not match n*k");
  if (labels.size() != n) throw Error("labels size does not match n");
  if (logits && logits->size() != n * k) throw Error("logits size does not match n*k");
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double p = probs[i * k + j];
      if (!std::isfinite(p)) throw Error("row " + std::to_string(i) + ": non-finite probability");
      if (p < 0.0) throw Error("row " + std::to_string(i) + ": negative probability");
      s += p;
    }
    if (std::abs(s - 1.0) > kRowSumTol)
      throw Error("row " + std::to_string(i) + ": probabilities sum to " + std::to_string(s));
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= k)
      throw Error("row " + std::to_string(i) + ": label " + std::to_string(y) + " out of range");
  }
}

PredictionSet PredictionSet::from_probs(std::size_t k, std::vector<double> probs,
                                        std::vector<int> labels) {
  PredictionSet ps;
  ps.k = k;
  ps.n = k == 0 ? 0 : probs.size() / k;
  ps.probs = std::move(probs);
  ps.labels = std::move(labels);
  normalize_rows(ps.n, ps.k, ps.probs);
  ps.validate();
  return ps;
}

PredictionSet PredictionSet::from_logits(std::size_t k, std::vector<double> logits,
                                         std::vector<int> labels) {
  PredictionSet ps;
  ps.k = k;
  ps.n = k == 0 ? 0 : logits.size() / k;
  ps.logits = std::move(logits);
  ps.labels = std::move(labels);
  ps.probs.resize(ps.n * k);
  for (std::size_t i = 0; i < ps.n; ++i) {
    const auto p = stable_softmax(ps.logit_row(i));
    std::copy(p.begin(), p.end(), ps.probs.begin() + i * k);
  }
  ps.validate();
  return ps;
}

std::vector<double> stable_softmax(std::span<const double> logits_row) {
  if (logits_row.empty()) throw Error("softmax of an empty row");
  const double m = *std::max_element(logits_row.begin(), logits_row.end());
  if (!std::isfinite(m)) throw Error("softmax requires a finite maximum logit");
  std::vector<double> out(logits_row.size());
  double s = 0.0;
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] = std::exp(logits_row[j] - m);
    s += out[j];
  }
  for (double& v : out) v /= s;
  return out;
}

std::pair<PredictionSet, PredictionSet> split(const PredictionSet& ps, const SplitSpec& spec) {
  if (!(spec.calib_fraction >= 0.0 && spec.calib_fraction <= 1.0))
    throw Error("calib_fraction must lie in [0, 1]");
  const std::size_t n = ps.n;
  const auto m = static_cast<std::size_t>(std::llround(static_cast<double>(n) * spec.calib_fraction));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::uint64_t state = spec.seed;
  for (std::size_t i = n; i > 1; --i) {
    const std::uint64_t j = bounded(splitmix64(state), i);
    std::swap(order[i - 1], order[j]);
  }

  std::vector<std::size_t> calib(order.begin(), order.begin() + m);
  std::vector<std::size_t> eval(order.begin() + m, order.end());
  std::sort(calib.begin(), calib.end());
  std::sort(eval.begin(), eval.end());
  return {take_rows(ps, calib), take_rows(ps, eval)};
}

ConfidenceView confidence_view(const PredictionSet& ps) {
  ConfidenceView view;
  view.pred.resize(ps.n);
  view.conf.resize(ps.n);
  view.hit.resize(ps.n);
  for (std::size_t i = 0; i < ps.n; ++i) {
    const auto r = ps.row(i);
    std::size_t best = 0;
    for (std::size_t j = 1; j < ps.k; ++j)
      if (r[j] > r[best]) best = j;
    view.pred[i] = static_cast<int>(best);
    view.conf[i] = r[best];
    view.hit[i] = ps.labels[i] == view.pred[i] ? 1 : 0;
  }
  return view;
}

ConfidenceView subset_view(const ConfidenceView& view, std::span<const std::size_t> idx) {
  ConfidenceView out;
  out.pred.reserve(idx.size());
  out.conf.reserve(idx.size());
  out.hit.reserve(idx.size());
  for (std::size_t i : idx) {
    out.pred.push_back(view.pred[i]);
    out.conf.push_back(view.conf[i]);
    out.hit.push_back(view.hit[i]);
  }
  return out;
}

}  // namespace calsharp
