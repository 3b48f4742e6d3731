#pragma once

#include <optional>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "calsharp/decomposition.hpp"
#include "calsharp/predictions.hpp"

namespace calsharp {

//! Rendering options; colors are SVG paint strings.
struct DiagramStyle {
  int width = 640;
  int height = 480;
  std::optional<std::pair<double, double>> align_y;  // forced y range
  bool annotate = true;
  std::string curve_color = "magenta";
  std::string band_color = "red";
  std::string density_color = "royalblue";
  std::string bar_color = "steelblue";
};

//! A rendered diagram: the SVG document, a JSON sidecar with the numbers
//! behind it, and the y range that was used.
struct Diagram {
  std::string svg;
  nlohmann::json sidecar;
  std::pair<double, double> y_range;
};

//! The y range the calibration-sharpness plot picks when not aligned:
//! [0, max(1, highest band edge)].
std::pair<double, double> natural_y_range(const CurveEstimate& curve);

//! Renders the calibration-sharpness diagram.
//!
//! The curve is the smoothed accuracy; around it sits a band of total
//! vertical extent density * rho_clamped, centered on the curve, whose lower
//! edge is cut at 0; the confidence density is drawn along the bottom.
//! Output bytes depend only on the inputs.
Diagram render_calibration_sharpness(const CurveEstimate& curve,
                                     const DecompositionReport& report,
                                     const DiagramStyle& style = {});

//! Classic reliability diagram: per-bin accuracy bars against the identity.
std::string render_reliability(const ConfidenceView& view, int bins = 15,
                               const DiagramStyle& style = {});

}  // namespace calsharp
