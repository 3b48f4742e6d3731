#include "calsharp/checks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "calsharp/decomposition.hpp"
#include "calsharp/metrics.hpp"
#include "calsharp/recalibrate.hpp"

namespace calsharp::checks {

namespace {

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), pattern, a, b, c);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<double> pava_bruteforce(std::span<const double> ys, std::span<const double> weights) {
  const std::size_t n = ys.size();
  if (n == 0) return {};
  if (n > 20) throw Error("pava_bruteforce: input too long for exhaustive search");
  double best_sse = std::numeric_limits<double>::infinity();
  std::vector<double> best, fit(n);
  for (std::uint32_t cuts = 0; cuts < (1u << (n - 1)); ++cuts) {
    // bit b set means a block boundary between positions b and b+1
    bool feasible = true;
    double prev_mean = -std::numeric_limits<double>::infinity();
    std::size_t start = 0;
    for (std::size_t end = 0; end < n && feasible; ++end) {
      const bool boundary = end + 1 == n || (cuts >> end) & 1u;
      if (!boundary) continue;
      double sum = 0.0, weight = 0.0;
      for (std::size_t i = start; i <= end; ++i) {
        sum += ys[i] * weights[i];
        weight += weights[i];
      }
      const double mean = sum / weight;
      if (mean < prev_mean) {
        feasible = false;
        break;
      }
      for (std::size_t i = start; i <= end; ++i) fit[i] = mean;
      prev_mean = mean;
      start = end + 1;
    }
    if (!feasible) continue;
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) sse += weights[i] * (ys[i] - fit[i]) * (ys[i] - fit[i]);
    if (sse < best_sse) {
      best_sse = sse;
      best = fit;
    }
  }
  return best;
}

std::vector<synth::DiscreteWorld> check_discrete_worlds(std::uint64_t seed, std::size_t count) {
  std::mt19937_64 rng(seed);
  std::vector<synth::DiscreteWorld> worlds;
  worlds.reserve(count);
  for (std::size_t i = 0; i < count; ++i) worlds.push_back(synth::random_discrete_world(rng));
  return worlds;
}

std::vector<synth::SimplexWorld> check_simplex_worlds(std::uint64_t seed, std::size_t count) {
  std::mt19937_64 rng(seed);
  std::vector<synth::SimplexWorld> worlds;
  worlds.reserve(count);
  for (std::size_t i = 0; i < count; ++i) worlds.push_back(synth::random_simplex_world(rng));
  return worlds;
}

CheckResult decomposition_identity(std::uint64_t seed) {
  const auto worlds = check_discrete_worlds(seed);
  double max_dev = 0.0;
  for (const auto& world : worlds) {
    const auto simplex = synth::to_simplex(world);
    for (const BregmanSpec spec : {BregmanSpec::brier(), BregmanSpec::kl()}) {
      const auto triple = synth::oracle_discrete_decomposition(world, spec);
      const auto terms = synth::oracle_simplex_decomposition(simplex, spec);
      max_dev = std::max(max_dev, std::abs(triple.total - (triple.cal + triple.sharp)));
      max_dev = std::max(max_dev, std::abs(triple.total - terms.total));
      max_dev = std::max(max_dev, std::abs(terms.total - (terms.sharpness_gap + terms.cal)));
    }
  }
  return {"decomposition identity", max_dev <= 1e-10,
          fmt("max deviation %.3g over ", max_dev) + std::to_string(worlds.size()) +
              " worlds x {brier, kl}"};
}

CheckResult confidence_lower_bound(std::uint64_t seed) {
  const auto worlds = check_simplex_worlds(seed);
  double min_slack = std::numeric_limits<double>::infinity();
  for (const auto& world : worlds) {
    for (const BregmanSpec spec : {BregmanSpec::brier(), BregmanSpec::kl()}) {
      const auto pair = synth::oracle_full_vs_confidence_cal(world, spec);
      min_slack = std::min(min_slack, pair.full_cal - pair.conf_cal);
    }
  }
  return {"confidence lower bound", min_slack >= -1e-10,
          fmt("min slack %.3g over ", min_slack) + std::to_string(worlds.size()) +
              " worlds x {brier, kl}"};
}

CheckResult rho_nonnegativity(std::uint64_t seed) {
  const auto worlds = check_discrete_worlds(seed);
  double min_oracle = std::numeric_limits<double>::infinity();
  double min_est = std::numeric_limits<double>::infinity();
  const KernelSpec kernel{KernelFamily::gaussian, 0.01};
  bool defined_everywhere = true;
  for (std::size_t wi = 0; wi < worlds.size(); ++wi) {
    const auto& world = worlds[wi];
    const auto ps = synth::sample_discrete(world, 20000, seed + 31 * (wi + 1));
    const auto view = confidence_view(ps);
    std::vector<double> level_confs;
    for (const auto& lvl : world.levels) level_confs.push_back(lvl.conf);
    for (const BregmanSpec spec : {BregmanSpec::brier(), BregmanSpec::kl()}) {
      const auto rho = synth::oracle_rho(world, spec);
      for (double r : rho) min_oracle = std::min(min_oracle, r);
      const auto curve = pointwise_sharpness_gap(ps, view, spec, kernel, level_confs);
      for (std::size_t j = 0; j < level_confs.size(); ++j) {
        if (!curve.defined[j]) {
          defined_everywhere = false;
          continue;
        }
        min_est = std::min(min_est, curve.rho[j]);
      }
    }
  }
  const bool pass = defined_everywhere && min_oracle >= 0.0 && min_est >= -5e-3;
  return {"rho nonnegativity", pass,
          fmt("min oracle rho %.3g, min estimated rho %.3g", min_oracle, min_est)};
}

CheckResult always_wrong_scaling() {
  const std::size_t ks[] = {4, 16, 64, 256};
  double prev_ratio = 0.0;
  bool pass = true;
  double worst_exact = 0.0;
  std::string ratios;
  for (std::size_t k : ks) {
    const double eps = 0.5 / static_cast<double>(k);
    const auto aw = synth::always_wrong_world(k, eps, 64);
    const auto view = confidence_view(aw.ps);

    double conf_mse = 0.0;
    for (double h : view.conf) conf_mse += h * h;
    conf_mse /= static_cast<double>(view.size());
    const double plugin = plugin_calibration_error_direct(
        view, BregmanSpec::brier(), KernelSpec{KernelFamily::gaussian, 0.05});
    const double full = brier(aw.ps);

    worst_exact = std::max(worst_exact, std::abs(conf_mse - aw.conf_mse));
    worst_exact = std::max(worst_exact, std::abs(plugin - aw.conf_mse));
    worst_exact = std::max(worst_exact, std::abs(full - aw.full_brier));
    const double kk = static_cast<double>(k);
    const double floor_brier = 0.9 * (1.0 - 1.0 / kk) * (1.0 - 1.0 / kk);
    if (full < floor_brier) pass = false;

    const double ratio = full / conf_mse;
    if (ratio <= prev_ratio) pass = false;
    prev_ratio = ratio;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%.1f", ratios.empty() ? "" : ", ", ratio);
    ratios += buf;
  }
  if (worst_exact > 1e-12) pass = false;
  return {"always-wrong scaling", pass,
          "full/confidence ratios " + ratios + fmt(", max exactness dev %.3g", worst_exact)};
}

CheckResult estimator_consistency(std::uint64_t seed) {
  synth::ContinuousWorld world;
  world.lo = 0.5;
  world.hi = 1.0;
  world.acc = [](double h) { return std::min(1.0, h + 0.1); };
  const std::size_t ns[] = {1000, 10000, 100000};
  std::vector<std::vector<double>> errs(3);
  for (int s = 0; s < 5; ++s) {
    const auto sweep = synth::consistency_sweep(world, ns, seed + 7919ULL * s);
    for (std::size_t t = 0; t < 3; ++t) errs[t].push_back(sweep[t].error);
  }
  const double m0 = median(errs[0]), m1 = median(errs[1]), m2 = median(errs[2]);
  const bool pass = m0 > m1 && m1 > m2 && m2 < 5e-3;
  return {"estimator consistency", pass,
          fmt("median errors %.2g -> %.2g -> %.2g", m0, m1, m2)};
}

CheckResult pava_oracle_equivalence() {
  const double grid[] = {0.0, 1.0, 2.0, 3.0};
  std::size_t checked = 0;
  bool pass = true;
  for (std::size_t n = 1; n <= 8 && pass; ++n) {
    std::vector<std::size_t> digit(n, 0);
    const std::vector<double> w(n, 1.0);
    std::vector<double> ys(n);
    while (true) {
      for (std::size_t i = 0; i < n; ++i) ys[i] = grid[digit[i]];
      const auto fast = pava(ys, w);
      const auto slow = pava_bruteforce(ys, w);
      ++checked;
      if (fast != slow) {
        pass = false;
        break;
      }
      std::size_t pos = 0;
      while (pos < n && digit[pos] == 3) digit[pos++] = 0;
      if (pos == n) break;
      ++digit[pos];
    }
  }
  return {"pava oracle equivalence", pass,
          std::to_string(checked) + " inputs over grid {0,1,2,3}, " +
              (pass ? "all exact" : "mismatch found")};
}

std::vector<CheckResult> run_suite(const std::string& suite, std::uint64_t seed) {
  if (suite == "decomposition") return {decomposition_identity(seed), rho_nonnegativity(seed)};
  if (suite == "lowerbound") return {confidence_lower_bound(seed)};
  if (suite == "scaling") return {always_wrong_scaling()};
  if (suite == "consistency") return {estimator_consistency(seed)};
  if (suite == "pava") return {pava_oracle_equivalence()};
  throw Error("unknown suite '" + suite +
              "' (use decomposition, lowerbound, scaling, consistency or pava)");
}

}  // namespace calsharp::checks
