#pragma once

#include <span>
#include <string>
#include <vector>

namespace calsharp {

enum class Divergence { brier, kl };

Divergence divergence_from_name(const std::string& name);

//! A Bregman divergence on the probability simplex plus its 1-d counterpart.
//!
//! brier uses phi(x) = ||x||^2, kl uses phi(x) = sum_i x_i log x_i with the
//! 0 log 0 = 0 convention. Divergences are extended-real: kl returns +inf
//! when the second argument has a zero where the first does not.
struct BregmanSpec {
  Divergence kind = Divergence::brier;

  static BregmanSpec brier() { return {Divergence::brier}; }
  static BregmanSpec kl() { return {Divergence::kl}; }

  const char* name() const { return kind == Divergence::brier ? "brier" : "kl"; }

  //! Generator phi evaluated at a nonnegative vector.
  double phi(std::span<const double> x) const;
  //! Gradient of phi; for kl the entries are 1 + log x_i (infinite at 0).
  std::vector<double> grad_phi(std::span<const double> x) const;
  //! Scalar generator on [0, 1]: a^2 for brier, binary entropy-type for kl.
  double phi1(double a) const;
  //! Derivative of phi1 on (0, 1).
  double dphi1(double a) const;

  //! d_phi(x, y) between two simplex vectors.
  double divergence(std::span<const double> x, std::span<const double> y) const;
  //! Scalar divergence d_phi1(a, b) between values in [0, 1].
  double divergence_1d(double a, double b) const;
  //! d_phi(e_label, g_row) without materializing the one-hot vector.
  double pointwise_label_divergence(int label, std::span<const double> g_row) const;
  //! Whether d_phi(x, y) dominates the scalar divergence in each coordinate.
  bool check_domination(std::span<const double> x, std::span<const double> y,
                        double tol = 1e-12) const;
};

}  // namespace calsharp
