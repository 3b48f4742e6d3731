#include "calsharp/diagram.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace calsharp {

namespace {

constexpr double kMarginLeft = 50.0;
constexpr double kMarginRight = 20.0;
constexpr double kMarginTop = 20.0;
constexpr double kMarginBottom = 40.0;

struct Frame {
  double width, height;
  double ymin, ymax;

  double x(double v) const {
    return kMarginLeft + v * (width - kMarginLeft - kMarginRight);
  }
  double y(double v) const {
    const double span = ymax - ymin;
    return kMarginTop + (ymax - v) / span * (height - kMarginTop - kMarginBottom);
  }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string scaled_value(double v) {
  if (std::isinf(v)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * v);
  return buf;
}

void open_svg(std::ostringstream& out, const DiagramStyle& style, const Frame& frame) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
                "viewBox=\"0 0 %d %d\" data-ymin=\"%.6f\" data-ymax=\"%.6f\">\n",
                style.width, style.height, style.width, style.height, frame.ymin, frame.ymax);
  out << buf;
  out << "<rect x=\"0\" y=\"0\" width=\"" << style.width << "\" height=\"" << style.height
      << "\" fill=\"white\"/>\n";
}

void draw_axes(std::ostringstream& out, const Frame& frame, const char* xlabel) {
  out << "<g stroke=\"black\" stroke-width=\"1\" fill=\"none\">\n";
  out << "<line x1=\"" << num(frame.x(0)) << "\" y1=\"" << num(frame.y(frame.ymin))
      << "\" x2=\"" << num(frame.x(1)) << "\" y2=\"" << num(frame.y(frame.ymin)) << "\"/>\n";
  out << "<line x1=\"" << num(frame.x(0)) << "\" y1=\"" << num(frame.y(frame.ymin))
      << "\" x2=\"" << num(frame.x(0)) << "\" y2=\"" << num(frame.y(frame.ymax)) << "\"/>\n";
  out << "</g>\n";
  out << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"black\">\n";
  for (int t = 0; t <= 5; ++t) {
    const double v = t / 5.0;
    out << "<line stroke=\"black\" x1=\"" << num(frame.x(v)) << "\" y1=\""
        << num(frame.y(frame.ymin)) << "\" x2=\"" << num(frame.x(v)) << "\" y2=\""
        << num(frame.y(frame.ymin) + 4) << "\"/>\n";
    out << "<text text-anchor=\"middle\" x=\"" << num(frame.x(v)) << "\" y=\""
        << num(frame.y(frame.ymin) + 16) << "\">" << num(v) << "</text>\n";
  }
  for (int t = 0; t <= 4; ++t) {
    const double v = frame.ymin + (frame.ymax - frame.ymin) * t / 4.0;
    out << "<line stroke=\"black\" x1=\"" << num(frame.x(0) - 4) << "\" y1=\""
        << num(frame.y(v)) << "\" x2=\"" << num(frame.x(0)) << "\" y2=\"" << num(frame.y(v))
        << "\"/>\n";
    out << "<text text-anchor=\"end\" x=\"" << num(frame.x(0) - 7) << "\" y=\""
        << num(frame.y(v) + 4) << "\">" << num(v) << "</text>\n";
  }
  out << "<text text-anchor=\"middle\" x=\"" << num(0.5 * (frame.x(0) + frame.x(1)))
      << "\" y=\"" << num(frame.y(frame.ymin) + 32) << "\">" << xlabel << "</text>\n";
  out << "</g>\n";
}

void draw_identity(std::ostringstream& out, const Frame& frame) {
  const double top = std::min(1.0, frame.ymax);
  out << "<line stroke=\"gray\" stroke-dasharray=\"5,4\" x1=\"" << num(frame.x(0))
      << "\" y1=\"" << num(frame.y(std::max(0.0, frame.ymin))) << "\" x2=\"" << num(frame.x(top))
      << "\" y2=\"" << num(frame.y(top)) << "\"/>\n";
}

}  // namespace

std::pair<double, double> natural_y_range(const CurveEstimate& curve) {
  double upper = 1.0;
  for (std::size_t i = 0; i < curve.grid.size(); ++i) {
    if (!curve.defined[i]) continue;
    upper = std::max(upper, curve.cal_curve[i] + 0.5 * curve.density[i] * curve.rho_clamped[i]);
  }
  return {0.0, upper};
}

Diagram render_calibration_sharpness(const CurveEstimate& curve,
                                     const DecompositionReport& report,
                                     const DiagramStyle& style) {
  if (curve.grid.empty()) throw Error("render: empty curve");
  Diagram d;
  d.y_range = style.align_y ? *style.align_y : natural_y_range(curve);
  if (!(d.y_range.second > d.y_range.first)) throw Error("render: degenerate y range");
  const Frame frame{static_cast<double>(style.width), static_cast<double>(style.height),
                    d.y_range.first, d.y_range.second};

  std::ostringstream out;
  open_svg(out, style, frame);
  draw_identity(out, frame);

  // density along the bottom quarter of the plot, in data units
  double dmax = 0.0;
  for (double v : curve.density) dmax = std::max(dmax, v);
  if (dmax > 0.0) {
    const double scale = 0.25 * (frame.ymax - frame.ymin) / dmax;
    std::ostringstream path;
    path << "M" << num(frame.x(curve.grid.front())) << "," << num(frame.y(frame.ymin));
    for (std::size_t i = 0; i < curve.grid.size(); ++i)
      path << " L" << num(frame.x(curve.grid[i])) << ","
           << num(frame.y(frame.ymin + curve.density[i] * scale));
    path << " L" << num(frame.x(curve.grid.back())) << "," << num(frame.y(frame.ymin)) << " Z";
    out << "<path class=\"density\" fill=\"" << style.density_color
        << "\" fill-opacity=\"0.35\" stroke=\"none\" d=\"" << path.str() << "\"/>\n";
  }

  // sharpness band: total extent density * rho_clamped centered on the curve
  std::size_t i = 0;
  const std::size_t m = curve.grid.size();
  while (i < m) {
    while (i < m && !curve.defined[i]) ++i;
    std::size_t j = i;
    while (j < m && curve.defined[j]) ++j;
    if (j > i) {
      std::ostringstream path;
      for (std::size_t t = i; t < j; ++t) {
        const double half = 0.5 * curve.density[t] * curve.rho_clamped[t];
        const double upper = curve.cal_curve[t] + half;
        path << (t == i ? "M" : " L") << num(frame.x(curve.grid[t])) << ","
             << num(frame.y(upper));
      }
      for (std::size_t t = j; t-- > i;) {
        const double half = 0.5 * curve.density[t] * curve.rho_clamped[t];
        const double lower = std::max(0.0, curve.cal_curve[t] - half);
        path << " L" << num(frame.x(curve.grid[t])) << "," << num(frame.y(lower));
      }
      path << " Z";
      out << "<path class=\"band\" fill=\"" << style.band_color
          << "\" fill-opacity=\"0.5\" stroke=\"none\" d=\"" << path.str() << "\"/>\n";

      std::ostringstream line;
      for (std::size_t t = i; t < j; ++t)
        line << (t == i ? "M" : " L") << num(frame.x(curve.grid[t])) << ","
             << num(frame.y(curve.cal_curve[t]));
      out << "<path class=\"curve\" fill=\"none\" stroke=\"" << style.curve_color
          << "\" stroke-width=\"2\" d=\"" << line.str() << "\"/>\n";
    }
    i = j;
  }

  draw_axes(out, frame, "confidence");
  if (style.annotate) {
    out << "<g font-family=\"sans-serif\" font-size=\"12\" fill=\"black\">\n";
    std::string cal_text = "cal x100 = " + scaled_value(report.cal.mean);
    if (report.cal.reps > 1) cal_text += " &#177; " + scaled_value(report.cal.std);
    out << "<text x=\"" << num(frame.x(0) + 8) << "\" y=\"" << num(frame.y(frame.ymax) + 16)
        << "\">" << cal_text << "</text>\n";
    out << "<text x=\"" << num(frame.x(0) + 8) << "\" y=\"" << num(frame.y(frame.ymax) + 32)
        << "\">total x100 = " << scaled_value(report.total.mean) << "</text>\n";
    out << "</g>\n";
  }
  out << "</svg>\n";

  d.svg = out.str();
  d.sidecar["curve"] = to_json(curve);
  d.sidecar["report"] = to_json(report);
  d.sidecar["y_range"] = {d.y_range.first, d.y_range.second};
  return d;
}

std::string render_reliability(const ConfidenceView& view, int bins, const DiagramStyle& style) {
  if (view.size() == 0) throw Error("render_reliability: empty view");
  if (bins < 1) throw Error("render_reliability: bins must be >= 1");
  const auto b = static_cast<std::size_t>(bins);
  std::vector<double> hit_sum(b, 0.0), count(b, 0.0);
  for (std::size_t i = 0; i < view.size(); ++i) {
    auto bin = static_cast<std::size_t>(view.conf[i] * bins);
    if (bin >= b) bin = b - 1;
    hit_sum[bin] += view.hit[i];
    count[bin] += 1.0;
  }
  const Frame frame{static_cast<double>(style.width), static_cast<double>(style.height), 0.0,
                    1.0};
  std::ostringstream out;
  open_svg(out, style, frame);
  for (std::size_t j = 0; j < b; ++j) {
    if (count[j] == 0.0) continue;
    const double acc = hit_sum[j] / count[j];
    const double x0 = frame.x(static_cast<double>(j) / static_cast<double>(b)) + 1.0;
    const double x1 = frame.x(static_cast<double>(j + 1) / static_cast<double>(b)) - 1.0;
    out << "<rect class=\"bar\" fill=\"" << style.bar_color << "\" fill-opacity=\"0.8\" x=\""
        << num(x0) << "\" y=\"" << num(frame.y(acc)) << "\" width=\"" << num(x1 - x0)
        << "\" height=\"" << num(frame.y(0.0) - frame.y(acc)) << "\"/>\n";
  }
  draw_identity(out, frame);
  draw_axes(out, frame, "confidence");
  out << "</svg>\n";
  return out.str();
}

}  // namespace calsharp
