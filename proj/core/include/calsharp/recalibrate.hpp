#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "calsharp/predictions.hpp"

namespace calsharp {

//! Divide all logits by a single fitted temperature.
struct TemperatureScaling {
  double temperature = 1.0;
};

//! Per-class histogram binning over equal-width probability bins.
struct HistogramBinning {
  std::size_t k = 0;
  std::vector<double> edges;   // bins + 1 ascending edges over [0, 1]
  std::vector<double> values;  // k * bins, row-major per class
};

//! Per-class isotonic regression, stored as left-constant step functions.
struct IsotonicRegression {
  std::size_t k = 0;
  std::vector<std::vector<double>> breakpoints;  // per class, ascending
  std::vector<std::vector<double>> values;       // per class, nondecreasing
};

//! Replace every confidence by the mean calibration accuracy.
struct MeanReplacement {
  double h_bar = 0.0;
};

//! A fitted post-hoc recalibration map.
struct Recalibrator {
  std::variant<TemperatureScaling, HistogramBinning, IsotonicRegression, MeanReplacement> method;

  const char* name() const;
  nlohmann::json to_json() const;
  static Recalibrator from_json(const nlohmann::json& j);
};

//! A transformed prediction set plus the class each row predicts.
//!
//! For most methods stored_pred is just the argmax of the transformed row,
//! which may differ from the original argmax (binning can reorder classes).
//! Mean replacement flattens every row around the original predicted class,
//! so there it keeps the pre-transform argmax. The confidence view reads
//! confidence and correctness at the stored class.
struct RecalibratedPredictionSet {
  PredictionSet data;
  std::vector<int> stored_pred;
};

ConfidenceView confidence_view(const RecalibratedPredictionSet& rps);

//! Weighted pool-adjacent-violators: the nondecreasing least-squares fit.
std::vector<double> pava(std::span<const double> ys, std::span<const double> weights);

//! Fits the temperature by golden-section search on log T, minimizing the
//! mean negative log-likelihood on the calibration split.
Recalibrator fit_temperature(const PredictionSet& calib, double tol = 1e-6);
Recalibrator fit_histogram_binning(const PredictionSet& calib, int bins = 15);
Recalibrator fit_isotonic(const PredictionSet& calib);
Recalibrator fit_mrr(const PredictionSet& calib);

//! Applies a fitted recalibrator to a prediction set.
RecalibratedPredictionSet apply(const Recalibrator& recal, const PredictionSet& ps);

}  // namespace calsharp
