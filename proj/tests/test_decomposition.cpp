#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "calsharp/decomposition.hpp"
#include "calsharp/synth.hpp"

using namespace calsharp;

namespace {

PredictionSet binary_logistic_set(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> probs(2 * n);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double p = 0.5 + 0.5 * unit(rng);
    probs[2 * i] = p;
    probs[2 * i + 1] = 1.0 - p;
    labels[i] = unit(rng) < p - 0.08 ? 0 : 1;
  }
  return PredictionSet::from_probs(2, std::move(probs), std::move(labels));
}

}  // namespace

TEST_CASE("curve recovers the closed-form values of a two-level world") {
  synth::DiscreteWorld w;
  w.k = 5;
  w.levels = {{0.65, 0.6, 0.5}, {0.9, 0.8, 0.5}};
  const auto ps = synth::sample_discrete(w, 100000, 404);
  const double queries[] = {0.65, 0.9};
  const KernelSpec ks{KernelFamily::gaussian, 0.05};
  for (const auto& spec : {BregmanSpec::brier(), BregmanSpec::kl()}) {
    const auto triple = synth::oracle_discrete_decomposition(w, spec);
    const auto rho = synth::oracle_rho(w, spec);
    const auto c = pointwise_sharpness_gap(ps, spec, ks, queries);
    REQUIRE(c.defined[0] == 1);
    REQUIRE(c.defined[1] == 1);
    CHECK(c.cal_curve[0] == doctest::Approx(0.6).epsilon(0.02));
    CHECK(c.cal_curve[1] == doctest::Approx(0.8).epsilon(0.02));
    CHECK(c.rho[0] == doctest::Approx(rho[0]).epsilon(0.05));
    CHECK(c.rho[1] == doctest::Approx(rho[1]).epsilon(0.05));
    // mass-weighted conditional divergence adds up to the total loss
    const double mixed = 0.5 * c.cond_div[0] + 0.5 * c.cond_div[1];
    CHECK(mixed == doctest::Approx(triple.total).epsilon(0.03));
    CHECK(c.rho[0] > -5e-3);
    CHECK(c.rho[1] > -5e-3);
  }
}

TEST_CASE("gaussian smoothing defines the curve on the whole grid") {
  synth::DiscreteWorld w;
  w.k = 3;
  w.levels = {{0.7, 0.6, 1.0}};
  const auto ps = synth::sample_discrete(w, 2000, 1);
  const auto grid = uniform_grid(201);
  const auto c =
      pointwise_sharpness_gap(ps, BregmanSpec::brier(), {KernelFamily::gaussian, 0.05}, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(c.defined[i] == 1);
    CHECK(std::isfinite(c.rho[i]));
    CHECK(c.rho_clamped[i] >= 0.0);
    CHECK(c.rho_clamped[i] == std::max(c.rho[i], 0.0));
  }
}

TEST_CASE("compact kernels mask the curve away from the data") {
  synth::DiscreteWorld w;
  w.k = 4;
  w.levels = {{0.7, 0.55, 1.0}};
  const auto ps = synth::sample_discrete(w, 500, 2);
  const auto grid = uniform_grid(201);
  const auto c = pointwise_sharpness_gap(ps, BregmanSpec::brier(),
                                         {KernelFamily::epanechnikov, 0.05}, grid);
  std::size_t masked = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double dist = std::abs(grid[i] - 0.7);
    if (dist < 0.045) {
      CHECK(c.defined[i] == 1);
      CHECK(c.density[i] > 0.0);
    } else if (dist > 0.055) {
      CHECK(c.defined[i] == 0);
      CHECK(std::isnan(c.cal_curve[i]));
      CHECK(std::isnan(c.rho[i]));
      ++masked;
    }
  }
  CHECK(masked > 150);
  // density still integrates over the occupied stretch but is zero far away
  CHECK(c.density[0] == 0.0);
  CHECK(c.density[40] == 0.0);
}

TEST_CASE("masked points serialize as nulls") {
  synth::DiscreteWorld w;
  w.k = 4;
  w.levels = {{0.7, 0.55, 1.0}};
  const auto ps = synth::sample_discrete(w, 500, 2);
  const auto grid = uniform_grid(101);
  const auto c = pointwise_sharpness_gap(ps, BregmanSpec::brier(),
                                         {KernelFamily::epanechnikov, 0.05}, grid);
  const auto j = to_json(c);
  CHECK(j["grid"].size() == 101);
  CHECK(j["density"].size() == 101);
  CHECK(j["config"]["divergence"] == "brier");
  CHECK(j["config"]["kernel"] == "epanechnikov");
  CHECK(j["config"]["bandwidth"].get<double>() == 0.05);
  CHECK(j["config"]["reflect_regression"].get<bool>() == false);
  CHECK(j["config"]["grid_points"].get<std::size_t>() == 101);
  for (std::size_t i = 0; i < 101; ++i) {
    if (c.defined[i]) {
      CHECK(j["cal_curve"][i].is_number());
      CHECK(j["rho"][i].is_number());
      CHECK(j["rho_clamped"][i].get<double>() >= 0.0);
    } else {
      CHECK(j["cal_curve"][i].is_null());
      CHECK(j["cond_div"][i].is_null());
      CHECK(j["rho"][i].is_null());
      CHECK(j["rho_clamped"][i].is_null());
    }
  }
}

TEST_CASE("reflected regression changes the curve only near the edges") {
  synth::DiscreteWorld w;
  w.k = 10;
  w.levels = {{0.85, 0.6, 0.5}, {0.98, 0.95, 0.5}};
  const auto ps = synth::sample_discrete(w, 5000, 3);
  const double queries[] = {0.97, 0.5};
  const KernelSpec ks{KernelFamily::gaussian, 0.05};
  const auto plain = pointwise_sharpness_gap(ps, BregmanSpec::brier(), ks, queries, false);
  const auto mirrored = pointwise_sharpness_gap(ps, BregmanSpec::brier(), ks, queries, true);
  CHECK(plain.reflect_regression == false);
  CHECK(mirrored.reflect_regression == true);
  // near 1 the mirrored copies shift the level weights; far from the edges
  // they sit many bandwidths away and change nothing measurable
  CHECK(std::abs(plain.cal_curve[0] - mirrored.cal_curve[0]) > 1e-3);
  CHECK(plain.cal_curve[1] == doctest::Approx(mirrored.cal_curve[1]).epsilon(1e-9));
}

TEST_CASE("report satisfies its accounting identities") {
  const auto ps = binary_logistic_set(500, 77);
  const KernelSpec ks{KernelFamily::gaussian, 0.05};
  for (const auto& spec : {BregmanSpec::brier(), BregmanSpec::kl()}) {
    const auto r = decomposition_report(ps, spec, ks);
    const auto divs = label_divergences(ps, spec);
    double s = 0.0;
    for (double d : divs) s += d;
    CHECK(r.total_direct == s / 500.0);
    CHECK(r.total.mean == r.total_direct);
    CHECK(r.total.reps == 1);
    CHECK(r.total.std == 0.0);
    CHECK(r.sharp_gap == r.total.mean - r.cal.mean);
    const auto view = confidence_view(ps);
    CHECK(r.cal.mean == plugin_calibration_error_direct(view, spec, ks));
    CHECK(r.divergence == spec.name());
  }
}

TEST_CASE("report runs are reproducible") {
  const auto ps = binary_logistic_set(6000, 78);
  const KernelSpec ks{KernelFamily::gaussian, 0.05};
  const SubsamplePolicy policy{2000, 4, 11};
  const auto a = decomposition_report(ps, BregmanSpec::brier(), ks, policy);
  const auto b = decomposition_report(ps, BregmanSpec::brier(), ks, policy);
  CHECK(a.total.mean == b.total.mean);
  CHECK(a.cal.mean == b.cal.mean);
  CHECK(a.cal.std == b.cal.std);
  CHECK(a.cal.reps == 4);
  CHECK(a.total.reps == 4);
}

TEST_CASE("a zero-probability label makes the kl total infinite but not the rest") {
  const auto ps = PredictionSet::from_probs(2, {1.0, 0.0, 0.6, 0.4}, {1, 0});
  const auto r = decomposition_report(ps, BregmanSpec::kl(), {KernelFamily::gaussian, 0.05});
  CHECK(std::isinf(r.total.mean));
  CHECK(r.total.reps == 1);
  CHECK(std::isinf(r.total_direct));
  CHECK(std::isfinite(r.cal.mean));
  CHECK(std::isinf(r.sharp_gap));

  const auto j = to_json(r);
  CHECK(j["total_direct"].get<std::string>() == "inf");
  CHECK(j["total"]["mean"].get<std::string>() == "inf");
  CHECK(j["sharp_gap"].get<std::string>() == "inf");
  CHECK(j["cal"]["mean"].is_number());
  CHECK(j["divergence"] == "kl");
  CHECK(j["kernel"]["bandwidth"].get<double>() == 0.05);
}

TEST_CASE("label divergences follow the pointwise form") {
  const auto ps = PredictionSet::from_probs(3, {0.5, 0.3, 0.2, 0.1, 0.8, 0.1}, {0, 2});
  for (const auto& spec : {BregmanSpec::brier(), BregmanSpec::kl()}) {
    const auto d = label_divergences(ps, spec);
    REQUIRE(d.size() == 2);
    CHECK(d[0] == spec.pointwise_label_divergence(0, ps.row(0)));
    CHECK(d[1] == spec.pointwise_label_divergence(2, ps.row(1)));
  }
}
