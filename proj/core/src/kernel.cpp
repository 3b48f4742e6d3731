#include "calsharp/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "calsharp/predictions.hpp"

namespace calsharp {

namespace {

const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * std::acos(-1.0));

//! Weighted sample points sorted by (x, y); exact duplicates are merged.
//!
//! Dumps with heavy ties (discrete confidence levels) collapse to a handful
//! of weighted points, which keeps repeated kernel sums cheap. Sorting also
//! fixes the summation order, so results do not depend on input order.
struct Collapsed {
  std::vector<double> x, y, w;
};

Collapsed collapse(std::span<const double> xs, std::span<const double> ys) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (xs[a] != xs[b]) return xs[a] < xs[b];
    return ys[a] < ys[b];
  });
  Collapsed c;
  for (std::size_t i : order) {
    if (!c.x.empty() && c.x.back() == xs[i] && c.y.back() == ys[i]) {
      c.w.back() += 1.0;
    } else {
      c.x.push_back(xs[i]);
      c.y.push_back(ys[i]);
      c.w.push_back(1.0);
    }
  }
  return c;
}

//! Adds the kernel mass and response sums for one query position.
void accumulate(const Collapsed& c, const KernelSpec& kernel, double q, double& wsum,
                double& ysum) {
  if (kernel.family == KernelFamily::epanechnikov) {
    const double h = kernel.bandwidth;
    const auto lo = std::lower_bound(c.x.begin(), c.x.end(), q - h) - c.x.begin();
    const auto hi = std::upper_bound(c.x.begin(), c.x.end(), q + h) - c.x.begin();
    for (auto i = static_cast<std::size_t>(lo); i < static_cast<std::size_t>(hi); ++i) {
      const double kv = c.w[i] * kernel.scaled(q - c.x[i]);
      wsum += kv;
      ysum += kv * c.y[i];
    }
  } else {
    for (std::size_t i = 0; i < c.x.size(); ++i) {
      const double kv = c.w[i] * kernel.scaled(q - c.x[i]);
      wsum += kv;
      ysum += kv * c.y[i];
    }
  }
}

void check_kernel(const KernelSpec& kernel) {
  if (!(kernel.bandwidth > 0.0)) throw Error("kernel bandwidth must be positive");
}

}  // namespace

KernelFamily kernel_from_name(const std::string& name) {
  if (name == "gaussian") return KernelFamily::gaussian;
  if (name == "epanechnikov") return KernelFamily::epanechnikov;
  throw Error("unknown kernel '" + name + "' (use gaussian or epanechnikov)");
}

double KernelSpec::eval(double u) const {
  if (family == KernelFamily::gaussian) return kInvSqrt2Pi * std::exp(-0.5 * u * u);
  const double a = std::abs(u);
  return a <= 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
}

double KernelSpec::scaled(double dx) const { return eval(dx / bandwidth) / bandwidth; }

std::vector<double> uniform_grid(std::size_t m) {
  if (m < 2) throw Error("grid needs at least 2 points");
  std::vector<double> g(m);
  for (std::size_t i = 0; i < m; ++i) g[i] = static_cast<double>(i) / static_cast<double>(m - 1);
  return g;
}

std::vector<std::optional<double>> nw_regress(std::span<const double> xs,
                                              std::span<const double> ys,
                                              const KernelSpec& kernel,
                                              std::span<const double> queries, bool reflect) {
  check_kernel(kernel);
  if (xs.size() != ys.size()) throw Error("nw_regress: xs and ys differ in length");
  if (xs.empty()) throw Error("nw_regress: empty sample");
  const Collapsed c = collapse(xs, ys);
  std::vector<std::optional<double>> out(queries.size());
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    const double q = queries[qi];
    double wsum = 0.0, ysum = 0.0;
    accumulate(c, kernel, q, wsum, ysum);
    if (reflect) {
      accumulate(c, kernel, -q, wsum, ysum);
      accumulate(c, kernel, 2.0 - q, wsum, ysum);
    }
    if (wsum > 0.0) out[qi] = ysum / wsum;
  }
  return out;
}

std::vector<double> kde(std::span<const double> xs, const KernelSpec& kernel,
                        std::span<const double> queries) {
  check_kernel(kernel);
  if (xs.empty()) throw Error("kde: empty sample");
  std::vector<double> zeros(xs.size(), 0.0);
  const Collapsed c = collapse(xs, zeros);
  std::vector<double> out(queries.size());
  const double inv_n = 1.0 / static_cast<double>(xs.size());
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    const double q = queries[qi];
    double wsum = 0.0, unused = 0.0;
    accumulate(c, kernel, q, wsum, unused);
    accumulate(c, kernel, -q, wsum, unused);
    accumulate(c, kernel, 2.0 - q, wsum, unused);
    out[qi] = wsum * inv_n;
  }
  return out;
}

EstimateWithSpread subsample_mean_estimate(
    const std::function<double(std::span<const std::size_t>)>& estimator, std::size_t n,
    const SubsamplePolicy& policy) {
  if (n == 0) throw Error("subsample_mean_estimate: empty sample");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (n <= policy.cap) {
    return {estimator(idx), 0.0, 1};
  }
  if (policy.reps < 2) throw Error("subsample_mean_estimate: needs at least 2 repetitions");
  std::mt19937_64 rng(policy.seed);
  std::vector<double> vals(static_cast<std::size_t>(policy.reps));
  std::vector<std::size_t> sub(policy.cap);
  for (auto& v : vals) {
    std::shuffle(idx.begin(), idx.end(), rng);
    std::copy(idx.begin(), idx.begin() + policy.cap, sub.begin());
    std::sort(sub.begin(), sub.end());
    v = estimator(sub);
  }
  const double mean = std::accumulate(vals.begin(), vals.end(), 0.0) / vals.size();
  double ss = 0.0;
  for (double v : vals) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (vals.size() - 1));
  return {mean, sd, policy.reps};
}

}  // namespace calsharp
