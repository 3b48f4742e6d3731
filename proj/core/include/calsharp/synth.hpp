#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "calsharp/bregman.hpp"
#include "calsharp/predictions.hpp"

namespace calsharp::synth {

//! One confidence level: predicted-class probability, accuracy and mass.
struct Level {
  double conf = 0.0;
  double acc = 0.0;
  double mass = 0.0;
};

//! A mixture of finitely many confidence levels over k classes.
//!
//! Without explicit rows, level j uses the canonical row that puts conf on
//! the predicted class and spreads the rest evenly; the predicted class is
//! drawn uniformly per sample. With rows given, row j is used verbatim and
//! its argmax is the predicted class. Wrong labels are uniform over the
//! non-predicted classes.
struct DiscreteWorld {
  std::size_t k = 2;
  std::vector<Level> levels;
  std::vector<std::vector<double>> rows;  // optional, one per level

  void validate() const;
};

//! An atom of a finite predictor distribution: the predicted row g, the true
//! conditional label distribution pi, and the atom mass.
struct Atom {
  std::vector<double> g;
  std::vector<double> pi;
  double mass = 0.0;
};

//! A finitely supported joint law of (g(X), Y); everything is enumerable.
struct SimplexWorld {
  std::size_t k = 2;
  std::vector<Atom> atoms;

  void validate() const;
};

//! Confidence h ~ Uniform[lo, hi] with accuracy acc(h); a binary view world.
struct ContinuousWorld {
  double lo = 0.5;
  double hi = 1.0;
  std::function<double(double)> acc;
};

PredictionSet sample_discrete(const DiscreteWorld& world, std::size_t n, std::uint64_t seed);

//! Confidence/hit pairs drawn from a continuous world (pred is always 0).
ConfidenceView sample_continuous(const ContinuousWorld& world, std::size_t n, std::uint64_t seed);

struct DecompositionTriple {
  double total = 0.0;
  double cal = 0.0;
  double sharp = 0.0;  // total - cal by construction
};

//! Closed-form confidence decomposition of a discrete world.
DecompositionTriple oracle_discrete_decomposition(const DiscreteWorld& world,
                                                  const BregmanSpec& spec);

//! Closed-form pointwise sharpness gap at each level, in level order.
std::vector<double> oracle_rho(const DiscreteWorld& world, const BregmanSpec& spec);

//! The three terms of the Bregman decomposition, enumerated independently:
//! total loss, sharpness gap E[phi(e_Y)] - E[phi(E[e_Y|g])], and the
//! full-vector calibration error E d_phi(E[e_Y|g], g).
struct SimplexDecomposition {
  double total = 0.0;
  double sharpness_gap = 0.0;
  double cal = 0.0;
};
SimplexDecomposition oracle_simplex_decomposition(const SimplexWorld& world, const BregmanSpec& spec);

struct CalPair {
  double full_cal = 0.0;
  double conf_cal = 0.0;
};

//! Full-vector vs confidence calibration error of a simplex world.
CalPair oracle_full_vs_confidence_cal(const SimplexWorld& world, const BregmanSpec& spec);

//! Exact ell_q calibration error E || E[e_Y|g] - g ||_q^q.
double lq_ece_oracle(const SimplexWorld& world, int q);

//! Embeds a discrete world as a simplex world over its canonical rows.
SimplexWorld to_simplex(const DiscreteWorld& world);

//! The always-wrong predictor: confidence 1/k + eps, accuracy zero.
struct AlwaysWrong {
  PredictionSet ps;
  double conf_mse = 0.0;    // exact (1/k + eps)^2
  double full_brier = 0.0;  // exact per-sample ||e_y - g||^2
};
AlwaysWrong always_wrong_world(std::size_t k, double eps, std::size_t n);

//! Bandwidth schedule for the consistency sweep.
double consistency_bandwidth(std::size_t n);

//! Exact confidence calibration error of a continuous world by adaptive
//! quadrature.
double continuous_truth(const ContinuousWorld& world, const BregmanSpec& spec,
                        double tol = 1e-10);

struct ConsistencyPoint {
  std::size_t n = 0;
  double bandwidth = 0.0;
  double error = 0.0;  // |plug-in - truth|
};

//! Plug-in estimation error under the shrinking-bandwidth schedule for each
//! sample size, one seeded draw per size.
std::vector<ConsistencyPoint> consistency_sweep(const ContinuousWorld& world,
                                                std::span<const std::size_t> ns,
                                                std::uint64_t seed);

//! Adaptive Simpson quadrature of f over [a, b].
double adaptive_quadrature(const std::function<double(double)>& f, double a, double b,
                           double tol = 1e-10);

struct DiscreteWorldOptions {
  std::size_t min_k = 2, max_k = 8;
  std::size_t min_levels = 2, max_levels = 4;
  double min_separation = 0.1;
  double acc_lo = 0.2, acc_hi = 0.9;
  bool near_calibrated = false;  // acc within 0.05 of conf
};

DiscreteWorld random_discrete_world(std::mt19937_64& rng, const DiscreteWorldOptions& opt = {});
SimplexWorld random_simplex_world(std::mt19937_64& rng, std::size_t max_k = 8,
                                  std::size_t max_atoms = 16);

nlohmann::json to_json(const DiscreteWorld& world);
nlohmann::json to_json(const SimplexWorld& world);
DiscreteWorld discrete_world_from_json(const nlohmann::json& j);
SimplexWorld simplex_world_from_json(const nlohmann::json& j);

}  // namespace calsharp::synth
