#pragma once

#include <string>

#include "calsharp/predictions.hpp"

namespace calsharp {

enum class InputFormat { csv, jsonl };

//! Picks csv unless the path ends in .jsonl.
InputFormat infer_format(const std::string& path);

//! Loads a prediction dump.
//!
//! CSV expects a header of either prob_0..prob_{k-1},label or
//! logit_0..logit_{k-1},label. JSONL expects one object per line carrying
//! "probs" or "logits" plus "label". Malformed content is reported with the
//! offending line number. Probability rows whose sum is off by more than 1e-9
//! but at most 1e-4 are renormalized; larger deviations are an error.
PredictionSet load_predictions(const std::string& path, InputFormat format);

//! Writes the probability schema back out with full double precision.
//!
//! A set loaded from a probability CSV round-trips bit-exactly through this
//! writer.
void write_predictions_csv(const PredictionSet& ps, const std::string& path);

}  // namespace calsharp
