#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "calsharp/bregman.hpp"
#include "calsharp/kernel.hpp"
#include "calsharp/metrics.hpp"
#include "calsharp/predictions.hpp"

namespace calsharp {

//! Smoothed per-confidence curves backing a calibration-sharpness diagram.
//!
//! All arrays are parallel to grid. Points where the regression has no
//! kernel mass are masked: defined is 0 there and the dependent values are
//! NaN (serialized as null).
struct CurveEstimate {
  std::vector<double> grid;
  std::vector<double> cal_curve;   // smoothed accuracy m(p)
  std::vector<double> density;     // reflected kde of the confidences
  std::vector<double> cond_div;    // smoothed per-sample divergence
  std::vector<double> rho;         // pointwise sharpness gap estimate
  std::vector<double> rho_clamped; // max(rho, 0)
  std::vector<std::uint8_t> defined;

  std::string divergence;
  KernelSpec kernel;
  bool reflect_regression = false;
};

//! Aggregate decomposition of the prediction loss.
//!
//! total is the mean divergence between one-hot labels and rows; cal the
//! plug-in confidence calibration error; sharp_gap their difference. Both
//! estimates carry the subsampling spread when the policy kicked in.
struct DecompositionReport {
  EstimateWithSpread total;
  double total_direct = 0.0;
  EstimateWithSpread cal;
  double sharp_gap = 0.0;
  std::string divergence;
  KernelSpec kernel;
};

//! Estimates the calibration curve, density, conditional divergence and the
//! pointwise sharpness gap rho at the given query points.
CurveEstimate pointwise_sharpness_gap(const PredictionSet& ps, const ConfidenceView& view,
                                      const BregmanSpec& spec, const KernelSpec& kernel,
                                      std::span<const double> grid,
                                      bool reflect_regression = false,
                                      double clamp = kProbClamp);
CurveEstimate pointwise_sharpness_gap(const PredictionSet& ps, const BregmanSpec& spec,
                                      const KernelSpec& kernel, std::span<const double> grid,
                                      bool reflect_regression = false,
                                      double clamp = kProbClamp);

//! Per-sample divergences d_phi(e_y, g) for every row.
std::vector<double> label_divergences(const PredictionSet& ps, const BregmanSpec& spec);

DecompositionReport decomposition_report(const PredictionSet& ps, const ConfidenceView& view,
                                         const BregmanSpec& spec, const KernelSpec& kernel,
                                         const SubsamplePolicy& policy = {},
                                         double clamp = kProbClamp);
DecompositionReport decomposition_report(const PredictionSet& ps, const BregmanSpec& spec,
                                         const KernelSpec& kernel,
                                         const SubsamplePolicy& policy = {},
                                         double clamp = kProbClamp);

nlohmann::json to_json(const CurveEstimate& curve);
nlohmann::json to_json(const DecompositionReport& report);

}  // namespace calsharp
