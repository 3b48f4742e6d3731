#include "calsharp/bregman.hpp"

#include <cmath>
#include <limits>

#include "calsharp/predictions.hpp"

namespace calsharp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

//! KL term x log(x/y) with the 0 log 0 = 0 and x>0, y=0 -> +inf conventions.
double kl_term(double x, double y) {
  if (x <= 0.0) return 0.0;
  if (y <= 0.0) return kInf;
  return x * std::log(x / y);
}

}  // namespace

Divergence divergence_from_name(const std::string& name) {
  if (name == "brier") return Divergence::brier;
  if (name == "kl") return Divergence::kl;
  throw Error("unknown divergence '" + name + "' (use brier or kl)");
}

double BregmanSpec::phi(std::span<const double> x) const {
  double s = 0.0;
  if (kind == Divergence::brier) {
    for (double v : x) s += v * v;
  } else {
    for (double v : x) s += xlogx(v);
  }
  return s;
}

std::vector<double> BregmanSpec::grad_phi(std::span<const double> x) const {
  std::vector<double> g(x.size());
  if (kind == Divergence::brier) {
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = 2.0 * x[i];
  } else {
    for (std::size_t i = 0; i < x.size(); ++i)
      g[i] = x[i] > 0.0 ? 1.0 + std::log(x[i]) : -kInf;
  }
  return g;
}

double BregmanSpec::phi1(double a) const {
  if (kind == Divergence::brier) return a * a;
  return xlogx(a) + xlogx(1.0 - a);
}

double BregmanSpec::dphi1(double a) const {
  if (kind == Divergence::brier) return 2.0 * a;
  return std::log(a / (1.0 - a));
}

double BregmanSpec::divergence(std::span<const double> x, std::span<const double> y) const {
  if (x.size() != y.size()) throw Error("divergence between vectors of different length");
  double s = 0.0;
  if (kind == Divergence::brier) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - y[i];
      s += d * d;
    }
  } else {
    for (std::size_t i = 0; i < x.size(); ++i) {
      s += kl_term(x[i], y[i]);
      if (s == kInf) return kInf;
    }
  }
  return s;
}

double BregmanSpec::divergence_1d(double a, double b) const {
  if (kind == Divergence::brier) {
    const double d = a - b;
    return d * d;
  }
  const double s = kl_term(a, b) + kl_term(1.0 - a, 1.0 - b);
  return s;
}

double BregmanSpec::pointwise_label_divergence(int label, std::span<const double> g_row) const {
  const auto l = static_cast<std::size_t>(label);
  if (l >= g_row.size()) throw Error("label out of range in pointwise divergence");
  if (kind == Divergence::brier) {
    double s = 0.0;
    for (std::size_t i = 0; i < g_row.size(); ++i) {
      const double d = (i == l ? 1.0 : 0.0) - g_row[i];
      s += d * d;
    }
    return s;
  }
  return g_row[l] > 0.0 ? -std::log(g_row[l]) : kInf;
}

bool BregmanSpec::check_domination(std::span<const double> x, std::span<const double> y,
                                   double tol) const {
  const double full = divergence(x, y);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (divergence_1d(x[i], y[i]) > full + tol) return false;
  }
  return true;
}

}  // namespace calsharp
