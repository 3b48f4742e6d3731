#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace calsharp {

//! Error thrown on malformed inputs or invalid arguments.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

//! A batch of class-probability rows with ground-truth labels.
//!
//! Rows are stored flat and row-major; every row lies on the probability
//! simplex over k classes. When the set was built from logits the raw logits
//! are kept alongside so that downstream consumers (e.g. temperature scaling)
//! can work on the original scores.
struct PredictionSet {
  std::size_t n = 0;
  std::size_t k = 0;
  std::vector<double> probs;                 // n*k
  std::vector<int> labels;                   // n
  std::optional<std::vector<double>> logits; // n*k when built from logits

  std::span<const double> row(std::size_t i) const { return {probs.data() + i * k, k}; }
  std::span<const double> logit_row(std::size_t i) const { return {logits->data() + i * k, k}; }

  //! Checks shape, simplex membership and label range; throws Error.
  void validate() const;

  static PredictionSet from_probs(std::size_t k, std::vector<double> probs,
                                  std::vector<int> labels);
  static PredictionSet from_logits(std::size_t k, std::vector<double> logits,
                                   std::vector<int> labels);
};

//! Predicted class, confidence and correctness per sample.
//!
//! pred is the argmax of the probability row (ties go to the lowest class
//! index), conf the corresponding maximum, and hit the 0/1 indicator that the
//! label equals pred.
struct ConfidenceView {
  std::vector<int> pred;
  std::vector<double> conf;
  std::vector<std::uint8_t> hit;

  std::size_t size() const { return conf.size(); }
};

//! Parameters of the calibration/evaluation split.
struct SplitSpec {
  double calib_fraction = 0.2;
  std::uint64_t seed = 0;
};

//! Numerically stable softmax of a single logit row.
std::vector<double> stable_softmax(std::span<const double> logits_row);

//! Deterministic seeded split into (calibration, evaluation) subsets.
//!
//! The calibration part receives round(n * calib_fraction) samples chosen by
//! a seeded shuffle; both subsets keep the original relative order. The
//! shuffle is a fixed, self-contained generator so the split can be
//! reproduced outside this library from the seed alone.
std::pair<PredictionSet, PredictionSet> split(const PredictionSet& ps, const SplitSpec& spec);

//! Argmax/max reduction of a prediction set.
ConfidenceView confidence_view(const PredictionSet& ps);

//! ConfidenceView restricted to a subset of sample indices.
ConfidenceView subset_view(const ConfidenceView& view, std::span<const std::size_t> idx);

}  // namespace calsharp
