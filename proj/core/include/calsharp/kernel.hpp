#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace calsharp {

enum class KernelFamily { gaussian, epanechnikov };

KernelFamily kernel_from_name(const std::string& name);

//! A symmetric smoothing kernel with a bandwidth.
struct KernelSpec {
  KernelFamily family = KernelFamily::gaussian;
  double bandwidth = 0.05;

  const char* name() const { return family == KernelFamily::gaussian ? "gaussian" : "epanechnikov"; }

  //! Unscaled profile K(u).
  double eval(double u) const;
  //! Scaled kernel K(dx / bandwidth) / bandwidth.
  double scaled(double dx) const;
};

//! Mean with a spread estimate from repeated subsampling.
struct EstimateWithSpread {
  double mean = 0.0;
  double std = 0.0;
  int reps = 1;
};

//! Subsampling policy for quadratic-cost estimators on large inputs.
struct SubsamplePolicy {
  std::size_t cap = 5000;
  int reps = 10;
  std::uint64_t seed = 0;
};

//! m evenly spaced points spanning [0, 1] inclusive.
std::vector<double> uniform_grid(std::size_t m = 201);

//! Nadaraya-Watson regression of ys on xs evaluated at each query.
//!
//! Queries where the kernel puts zero total mass on the sample have no
//! defined value and come back as nullopt; the caller decides how to treat
//! them. With reflect set, samples are mirrored across both ends of [0, 1]
//! before smoothing (off by default).
std::vector<std::optional<double>> nw_regress(std::span<const double> xs,
                                              std::span<const double> ys,
                                              const KernelSpec& kernel,
                                              std::span<const double> queries,
                                              bool reflect = false);

//! Kernel density estimate on [0, 1] with boundary reflection.
//!
//! Every sample is mirrored across 0 and across 1 so the estimate keeps its
//! mass inside the unit interval.
std::vector<double> kde(std::span<const double> xs, const KernelSpec& kernel,
                        std::span<const double> queries);

//! Runs an index-set estimator directly when n <= cap, otherwise averages it
//! over reps seeded random subsamples of size cap and reports the sample
//! standard deviation across repetitions.
EstimateWithSpread subsample_mean_estimate(
    const std::function<double(std::span<const std::size_t>)>& estimator, std::size_t n,
    const SubsamplePolicy& policy = {});

}  // namespace calsharp
