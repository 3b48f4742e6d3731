#include "calsharp/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "calsharp/metrics.hpp"

namespace calsharp::synth {

namespace {

//! Canonical row of a level: conf on class c, the remainder spread evenly.
std::vector<double> canonical_row(std::size_t k, double conf, std::size_t c) {
  std::vector<double> row(k, (1.0 - conf) / static_cast<double>(k - 1));
  row[c] = conf;
  return row;
}

double mass_sum(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0);
}

//! Mean divergence d_phi(e_Y, g) for a level with predicted class c.
double level_total(const BregmanSpec& spec, std::span<const double> row, std::size_t c,
                   double acc) {
  const std::size_t k = row.size();
  double wrong = 0.0;
  for (std::size_t y = 0; y < k; ++y) {
    if (y == c) continue;
    wrong += spec.pointwise_label_divergence(static_cast<int>(y), row);
  }
  wrong /= static_cast<double>(k - 1);
  const double right = spec.pointwise_label_divergence(static_cast<int>(c), row);
  return acc * right + (1.0 - acc) * wrong;
}

std::size_t argmax_row(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j)
    if (row[j] > row[best]) best = j;
  return best;
}

std::vector<double> dirichlet_uniform(std::mt19937_64& rng, std::size_t k) {
  std::exponential_distribution<double> expo(1.0);
  std::vector<double> v(k);
  double s = 0.0;
  for (double& x : v) {
    x = expo(rng);
    s += x;
  }
  for (double& x : v) x /= s;
  return v;
}

double simpson_recurse(const std::function<double(double)>& f, double a, double m, double b,
                       double fa, double fm, double fb, double whole, double tol, int depth) {
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_recurse(f, a, lm, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_recurse(f, m, rm, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace

void DiscreteWorld::validate() const {
  if (k < 2) throw Error("discrete world needs k >= 2");
  if (levels.empty()) throw Error("discrete world needs at least one level");
  double total_mass = 0.0;
  for (const Level& lvl : levels) {
    if (!(lvl.conf > 1.0 / static_cast<double>(k)) || lvl.conf > 1.0)
      throw Error("level confidence must lie in (1/k, 1]");
    if (lvl.acc < 0.0 || lvl.acc > 1.0) throw Error("level accuracy must lie in [0, 1]");
    if (!(lvl.mass > 0.0)) throw Error("level mass must be positive");
    total_mass += lvl.mass;
  }
  if (std::abs(total_mass - 1.0) > 1e-6) throw Error("level masses must sum to 1");
  if (!rows.empty()) {
    if (rows.size() != levels.size()) throw Error("rows must match levels one to one");
    for (std::size_t j = 0; j < rows.size(); ++j) {
      if (rows[j].size() != k) throw Error("row width must equal k");
      if (std::abs(mass_sum(rows[j]) - 1.0) > 1e-9) throw Error("rows must lie on the simplex");
      if (rows[j][argmax_row(rows[j])] != levels[j].conf)
        throw Error("row argmax must equal the level confidence");
    }
  }
}

void SimplexWorld::validate() const {
  if (k < 2) throw Error("simplex world needs k >= 2");
  if (atoms.empty()) throw Error("simplex world needs at least one atom");
  double total_mass = 0.0;
  for (const Atom& a : atoms) {
    if (a.g.size() != k || a.pi.size() != k) throw Error("atom vectors must have length k");
    for (double v : a.g)
      if (v < 0.0) throw Error("atom g must be nonnegative");
    for (double v : a.pi)
      if (v < 0.0) throw Error("atom pi must be nonnegative");
    if (std::abs(mass_sum(a.g) - 1.0) > 1e-9 || std::abs(mass_sum(a.pi) - 1.0) > 1e-9)
      throw Error("atom vectors must lie on the simplex");
    if (!(a.mass > 0.0)) throw Error("atom mass must be positive");
    total_mass += a.mass;
  }
  if (std::abs(total_mass - 1.0) > 1e-6) throw Error("atom masses must sum to 1");
}

PredictionSet sample_discrete(const DiscreteWorld& world, std::size_t n, std::uint64_t seed) {
  world.validate();
  if (n == 0) throw Error("sample_discrete: n must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> any_class(0, world.k - 1);
  std::uniform_int_distribution<std::size_t> other_class(0, world.k - 2);

  std::vector<double> cum(world.levels.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < world.levels.size(); ++j) {
    acc += world.levels[j].mass;
    cum[j] = acc;
  }

  std::vector<double> probs;
  probs.reserve(n * world.k);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = unit(rng) * acc;
    const std::size_t j =
        std::min(static_cast<std::size_t>(std::lower_bound(cum.begin(), cum.end(), u) - cum.begin()),
                 world.levels.size() - 1);
    std::size_t c;
    std::vector<double> row;
    if (world.rows.empty()) {
      c = any_class(rng);
      row = canonical_row(world.k, world.levels[j].conf, c);
    } else {
      row = world.rows[j];
      c = argmax_row(row);
    }
    const bool correct = unit(rng) < world.levels[j].acc;
    std::size_t label = c;
    if (!correct) {
      const std::size_t r = other_class(rng);
      label = r >= c ? r + 1 : r;
    }
    probs.insert(probs.end(), row.begin(), row.end());
    labels[i] = static_cast<int>(label);
  }
  return PredictionSet::from_probs(world.k, std::move(probs), std::move(labels));
}

ConfidenceView sample_continuous(const ContinuousWorld& world, std::size_t n,
                                 std::uint64_t seed) {
  if (!(world.lo < world.hi)) throw Error("continuous world needs lo < hi");
  if (!world.acc) throw Error("continuous world needs an accuracy function");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> hdist(world.lo, world.hi);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ConfidenceView view;
  view.pred.assign(n, 0);
  view.conf.resize(n);
  view.hit.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double h = hdist(rng);
    view.conf[i] = h;
    view.hit[i] = unit(rng) < world.acc(h) ? 1 : 0;
  }
  return view;
}

DecompositionTriple oracle_discrete_decomposition(const DiscreteWorld& world,
                                                  const BregmanSpec& spec) {
  world.validate();
  DecompositionTriple t;
  for (std::size_t j = 0; j < world.levels.size(); ++j) {
    const Level& lvl = world.levels[j];
    const std::vector<double> row =
        world.rows.empty() ? canonical_row(world.k, lvl.conf, 0) : world.rows[j];
    const std::size_t c = world.rows.empty() ? 0 : argmax_row(row);
    t.total += lvl.mass * level_total(spec, row, c, lvl.acc);
    t.cal += lvl.mass * spec.divergence_1d(lvl.acc, lvl.conf);
  }
  t.sharp = t.total - t.cal;
  return t;
}

std::vector<double> oracle_rho(const DiscreteWorld& world, const BregmanSpec& spec) {
  world.validate();
  std::vector<double> rho(world.levels.size());
  for (std::size_t j = 0; j < world.levels.size(); ++j) {
    const Level& lvl = world.levels[j];
    const std::vector<double> row =
        world.rows.empty() ? canonical_row(world.k, lvl.conf, 0) : world.rows[j];
    const std::size_t c = world.rows.empty() ? 0 : argmax_row(row);
    rho[j] = level_total(spec, row, c, lvl.acc) - spec.divergence_1d(lvl.acc, lvl.conf);
  }
  return rho;
}

SimplexDecomposition oracle_simplex_decomposition(const SimplexWorld& world, const BregmanSpec& spec) {
  world.validate();
  SimplexDecomposition t;
  double mean_phi_z = 0.0;
  std::map<std::vector<double>, std::pair<double, std::vector<double>>> groups;  // g -> (mass, sum m*pi)
  for (const Atom& a : world.atoms) {
    for (std::size_t y = 0; y < world.k; ++y) {
      if (a.pi[y] == 0.0) continue;
      t.total += a.mass * a.pi[y] * spec.pointwise_label_divergence(static_cast<int>(y), a.g);
      std::vector<double> ey(world.k, 0.0);
      ey[y] = 1.0;
      mean_phi_z += a.mass * a.pi[y] * spec.phi(ey);
    }
    auto& slot = groups[a.g];
    if (slot.second.empty()) slot.second.assign(world.k, 0.0);
    slot.first += a.mass;
    for (std::size_t y = 0; y < world.k; ++y) slot.second[y] += a.mass * a.pi[y];
  }
  double mean_phi_cond = 0.0;
  for (const auto& [g, slot] : groups) {
    std::vector<double> pibar(world.k);
    for (std::size_t y = 0; y < world.k; ++y) pibar[y] = slot.second[y] / slot.first;
    mean_phi_cond += slot.first * spec.phi(pibar);
    t.cal += slot.first * spec.divergence(pibar, g);
  }
  t.sharpness_gap = mean_phi_z - mean_phi_cond;
  return t;
}

CalPair oracle_full_vs_confidence_cal(const SimplexWorld& world, const BregmanSpec& spec) {
  world.validate();
  CalPair out;
  std::map<std::vector<double>, std::pair<double, std::vector<double>>> by_g;
  std::map<double, std::pair<double, double>> by_h;  // h -> (mass, sum m*pi_c)
  for (const Atom& a : world.atoms) {
    auto& slot = by_g[a.g];
    if (slot.second.empty()) slot.second.assign(world.k, 0.0);
    slot.first += a.mass;
    for (std::size_t y = 0; y < world.k; ++y) slot.second[y] += a.mass * a.pi[y];

    const std::size_t c = argmax_row(a.g);
    auto& hslot = by_h[a.g[c]];
    hslot.first += a.mass;
    hslot.second += a.mass * a.pi[c];
  }
  for (const auto& [g, slot] : by_g) {
    std::vector<double> pibar(world.k);
    for (std::size_t y = 0; y < world.k; ++y) pibar[y] = slot.second[y] / slot.first;
    out.full_cal += slot.first * spec.divergence(pibar, g);
  }
  for (const auto& [h, hslot] : by_h)
    out.conf_cal += hslot.first * spec.divergence_1d(hslot.second / hslot.first, h);
  return out;
}

double lq_ece_oracle(const SimplexWorld& world, int q) {
  world.validate();
  if (q < 1) throw Error("lq_ece_oracle: q must be >= 1");
  std::map<std::vector<double>, std::pair<double, std::vector<double>>> by_g;
  for (const Atom& a : world.atoms) {
    auto& slot = by_g[a.g];
    if (slot.second.empty()) slot.second.assign(world.k, 0.0);
    slot.first += a.mass;
    for (std::size_t y = 0; y < world.k; ++y) slot.second[y] += a.mass * a.pi[y];
  }
  double e = 0.0;
  for (const auto& [g, slot] : by_g) {
    double norm_q = 0.0;
    for (std::size_t y = 0; y < world.k; ++y) {
      const double diff = std::abs(slot.second[y] / slot.first - g[y]);
      norm_q += std::pow(diff, q);
    }
    e += slot.first * norm_q;
  }
  return e;
}

SimplexWorld to_simplex(const DiscreteWorld& world) {
  world.validate();
  SimplexWorld out;
  out.k = world.k;
  for (std::size_t j = 0; j < world.levels.size(); ++j) {
    const Level& lvl = world.levels[j];
    Atom a;
    a.g = world.rows.empty() ? canonical_row(world.k, lvl.conf, 0) : world.rows[j];
    const std::size_t c = world.rows.empty() ? 0 : argmax_row(a.g);
    a.pi.assign(world.k, (1.0 - lvl.acc) / static_cast<double>(world.k - 1));
    a.pi[c] = lvl.acc;
    a.mass = lvl.mass;
    out.atoms.push_back(std::move(a));
  }
  return out;
}

AlwaysWrong always_wrong_world(std::size_t k, double eps, std::size_t n) {
  if (k < 2) throw Error("always_wrong_world: k must be >= 2");
  if (!(eps > 0.0) || eps >= 1.0 - 1.0 / static_cast<double>(k))
    throw Error("always_wrong_world: eps out of range");
  if (n == 0) throw Error("always_wrong_world: n must be positive");
  const double kk = static_cast<double>(k);
  const double conf = 1.0 / kk + eps;
  const double rest = (1.0 - conf) / (kk - 1.0);
  std::vector<double> probs;
  probs.reserve(n * k);
  std::vector<int> labels(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) probs.push_back(j == 0 ? conf : rest);
  }
  AlwaysWrong out;
  out.ps = PredictionSet::from_probs(k, std::move(probs), std::move(labels));
  out.conf_mse = conf * conf;
  out.full_brier = (1.0 - rest) * (1.0 - rest) + conf * conf +
                   (kk - 2.0) * rest * rest;
  return out;
}

double consistency_bandwidth(std::size_t n) {
  return 0.5 * std::pow(static_cast<double>(n), -0.2);
}

double adaptive_quadrature(const std::function<double(double)>& f, double a, double b,
                           double tol) {
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_recurse(f, a, m, b, fa, fm, fb, whole, tol, 60);
}

double continuous_truth(const ContinuousWorld& world, const BregmanSpec& spec, double tol) {
  if (!(world.lo < world.hi)) throw Error("continuous world needs lo < hi");
  const double density = 1.0 / (world.hi - world.lo);
  auto f = [&](double h) { return spec.divergence_1d(world.acc(h), h) * density; };
  return adaptive_quadrature(f, world.lo, world.hi, tol);
}

std::vector<ConsistencyPoint> consistency_sweep(const ContinuousWorld& world,
                                                std::span<const std::size_t> ns,
                                                std::uint64_t seed) {
  const BregmanSpec spec = BregmanSpec::brier();
  const double truth = continuous_truth(world, spec);
  std::vector<ConsistencyPoint> out;
  out.reserve(ns.size());
  for (std::size_t t = 0; t < ns.size(); ++t) {
    const std::size_t n = ns[t];
    const ConfidenceView view = sample_continuous(world, n, seed + 0x9e37 * (t + 1));
    const KernelSpec kernel{KernelFamily::epanechnikov, consistency_bandwidth(n)};
    const double est = plugin_calibration_error_direct(view, spec, kernel);
    out.push_back({n, kernel.bandwidth, std::abs(est - truth)});
  }
  return out;
}

DiscreteWorld random_discrete_world(std::mt19937_64& rng, const DiscreteWorldOptions& opt) {
  std::uniform_int_distribution<std::size_t> kdist(opt.min_k, opt.max_k);
  std::uniform_int_distribution<std::size_t> ldist(opt.min_levels, opt.max_levels);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  DiscreteWorld world;
  world.k = kdist(rng);
  const std::size_t levels = ldist(rng);
  const double lo = std::max(0.55, 1.0 / static_cast<double>(world.k) + 0.05);
  const double hi = 0.95;

  std::vector<double> confs(levels);
  bool ok = false;
  for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
    for (double& c : confs) c = lo + (hi - lo) * unit(rng);
    std::sort(confs.begin(), confs.end());
    ok = true;
    for (std::size_t j = 1; j < levels; ++j)
      if (confs[j] - confs[j - 1] < opt.min_separation) ok = false;
  }
  if (!ok) {
    for (std::size_t j = 0; j < levels; ++j)
      confs[j] = lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(std::max<std::size_t>(levels - 1, 1));
  }

  double total_mass = 0.0;
  world.levels.resize(levels);
  for (std::size_t j = 0; j < levels; ++j) {
    Level& lvl = world.levels[j];
    lvl.conf = confs[j];
    if (opt.near_calibrated) {
      lvl.acc = std::clamp(lvl.conf + 0.1 * (unit(rng) - 0.5), 0.05, 0.95);
    } else {
      lvl.acc = opt.acc_lo + (opt.acc_hi - opt.acc_lo) * unit(rng);
    }
    lvl.mass = 0.5 + unit(rng);
    total_mass += lvl.mass;
  }
  for (Level& lvl : world.levels) lvl.mass /= total_mass;
  world.validate();
  return world;
}

SimplexWorld random_simplex_world(std::mt19937_64& rng, std::size_t max_k,
                                  std::size_t max_atoms) {
  std::uniform_int_distribution<std::size_t> kdist(2, max_k);
  std::uniform_int_distribution<std::size_t> adist(2, max_atoms);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SimplexWorld world;
  world.k = kdist(rng);
  const std::size_t atoms = adist(rng);
  double total_mass = 0.0;
  world.atoms.resize(atoms);
  for (Atom& a : world.atoms) {
    a.g = dirichlet_uniform(rng, world.k);
    a.pi = dirichlet_uniform(rng, world.k);
    a.mass = 0.5 + unit(rng);
    total_mass += a.mass;
  }
  for (Atom& a : world.atoms) a.mass /= total_mass;
  world.validate();
  return world;
}

nlohmann::json to_json(const DiscreteWorld& world) {
  nlohmann::json j;
  j["k"] = world.k;
  j["levels"] = nlohmann::json::array();
  for (const Level& lvl : world.levels)
    j["levels"].push_back({{"conf", lvl.conf}, {"acc", lvl.acc}, {"mass", lvl.mass}});
  if (!world.rows.empty()) j["rows"] = world.rows;
  return j;
}

nlohmann::json to_json(const SimplexWorld& world) {
  nlohmann::json j;
  j["k"] = world.k;
  j["atoms"] = nlohmann::json::array();
  for (const Atom& a : world.atoms)
    j["atoms"].push_back({{"g", a.g}, {"pi", a.pi}, {"mass", a.mass}});
  return j;
}

DiscreteWorld discrete_world_from_json(const nlohmann::json& j) {
  DiscreteWorld world;
  world.k = j.at("k").get<std::size_t>();
  for (const auto& lj : j.at("levels"))
    world.levels.push_back(
        {lj.at("conf").get<double>(), lj.at("acc").get<double>(), lj.at("mass").get<double>()});
  if (j.contains("rows")) world.rows = j.at("rows").get<std::vector<std::vector<double>>>();
  world.validate();
  return world;
}

SimplexWorld simplex_world_from_json(const nlohmann::json& j) {
  SimplexWorld world;
  world.k = j.at("k").get<std::size_t>();
  for (const auto& aj : j.at("atoms")) {
    Atom a;
    a.g = aj.at("g").get<std::vector<double>>();
    a.pi = aj.at("pi").get<std::vector<double>>();
    a.mass = aj.at("mass").get<double>();
    world.atoms.push_back(std::move(a));
  }
  world.validate();
  return world;
}

}  // namespace calsharp::synth
