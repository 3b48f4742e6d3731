#pragma once

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "calsharp/bregman.hpp"
#include "calsharp/kernel.hpp"
#include "calsharp/predictions.hpp"

namespace calsharp {

//! Probability clamp applied before logarithmic terms of kl-based metrics.
inline constexpr double kProbClamp = 1e-7;

//! Fraction of samples whose argmax matches the label.
double accuracy(const ConfidenceView& view);

//! Expected calibration error over equal-width confidence bins.
//!
//! Bin b covers [b/B, (b+1)/B), the last bin is closed at 1. Empty bins
//! contribute nothing.
double binned_ece(const ConfidenceView& view, int bins = 15);

//! Adaptive calibration error over equal-mass confidence bins.
//!
//! Samples are ranked by confidence and cut into B equal-mass bins; tied
//! confidences all go to the bin of the first member of the tie run. The
//! result is the unweighted mean of |acc - conf| over non-empty bins.
double ace(const ConfidenceView& view, int bins = 15);

//! Kernel-smoothed calibration error: the integral of |m(p) - p| against the
//! reflected density estimate of the confidences, by trapezoid rule on a
//! uniform grid.
double smoothed_ece(const ConfidenceView& view, const KernelSpec& kernel,
                    std::size_t grid_points = 201);

//! Mean negative log-likelihood of the labels; +inf if any row puts zero
//! mass on its label.
double nll(const PredictionSet& ps);

//! Mean squared distance between the one-hot label and the probability row.
double brier(const PredictionSet& ps);

//! Plug-in estimate of the confidence calibration error (full sample).
//!
//! Averages phi1(m(h_i)) - phi1(h_i) - phi1'(h_i) (hit_i - h_i) where m is
//! the Nadaraya-Watson smoother of the hits, evaluated at the sample points
//! themselves. For kl, smoother values and confidences are clamped to
//! [clamp, 1-clamp] before phi1/phi1' evaluation.
double plugin_calibration_error_direct(const ConfidenceView& view, const BregmanSpec& spec,
                                       const KernelSpec& kernel, double clamp = kProbClamp);

//! Plug-in estimate with the subsampling policy applied for large samples.
EstimateWithSpread plugin_calibration_error(const ConfidenceView& view, const BregmanSpec& spec,
                                            const KernelSpec& kernel,
                                            const SubsamplePolicy& policy = {},
                                            double clamp = kProbClamp);

//! Everything needed for one row of a results table.
struct MetricsTable {
  double accuracy = 0.0;
  double ece_binned = 0.0;
  double ace = 0.0;
  double smoothed_ece = 0.0;
  double nll = 0.0;
  double brier = 0.0;
  EstimateWithSpread plugin_cal_error;
};

struct MetricsConfig {
  int bins = 15;
  KernelSpec kernel{KernelFamily::gaussian, 0.05};
  BregmanSpec divergence = BregmanSpec::brier();
  SubsamplePolicy subsample;
};

//! Computes the full metric row for a prediction set and its view.
MetricsTable metrics_table(const PredictionSet& ps, const ConfidenceView& view,
                           const MetricsConfig& config = {});
MetricsTable metrics_table(const PredictionSet& ps, const MetricsConfig& config = {});

nlohmann::json metrics_to_json(const MetricsTable& table);

//! Fixed-width text table of metric rows, scaled by 100 with two decimals;
//! infinities render as "inf".
std::string format_metrics_table(std::span<const std::string> names,
                                 std::span<const MetricsTable> rows);

}  // namespace calsharp
