#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "calsharp/synth.hpp"

namespace calsharp::checks {

//! Outcome of one self-check: a short name, pass/fail and a detail string
//! carrying the measured extremes.
struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

//! Nondecreasing least-squares fit by exhaustive search over level-set
//! partitions; exact reference for pava on short inputs.
std::vector<double> pava_bruteforce(std::span<const double> ys, std::span<const double> weights);

//! The shared world sets used by the identity and rho checks.
std::vector<synth::DiscreteWorld> check_discrete_worlds(std::uint64_t seed, std::size_t count = 100);
std::vector<synth::SimplexWorld> check_simplex_worlds(std::uint64_t seed, std::size_t count = 100);

//! Bregman decomposition identity on enumerable worlds, both divergences.
CheckResult decomposition_identity(std::uint64_t seed);
//! Full-vector calibration error dominates the confidence one.
CheckResult confidence_lower_bound(std::uint64_t seed);
//! Oracle rho is nonnegative and the kernel estimate stays above -5e-3.
CheckResult rho_nonnegativity(std::uint64_t seed);
//! Always-wrong scaling: exact confidence MSE, near-maximal full Brier.
CheckResult always_wrong_scaling();
//! Plug-in error shrinks with n under the bandwidth schedule.
CheckResult estimator_consistency(std::uint64_t seed);
//! pava equals the exhaustive fit on every short input over a value grid.
CheckResult pava_oracle_equivalence();

//! Runs a named suite: decomposition, lowerbound, scaling, consistency or pava.
std::vector<CheckResult> run_suite(const std::string& suite, std::uint64_t seed);

}  // namespace calsharp::checks
