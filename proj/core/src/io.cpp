#include "calsharp/io.hpp"

#include <cassert>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

namespace calsharp {

namespace {

constexpr double kRowSumTol = 1e-4;

[[noreturn]] void fail(const std::string& path, std::size_t line, const std::string& msg) {
  throw Error(path + ":" + std::to_string(line) + ": " + msg);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

double parse_double(const std::string& path, std::size_t line, const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) fail(path, line, "cannot parse number '" + s + "'");
  return v;
}

int parse_label(const std::string& path, std::size_t line, const std::string& s) {
  int v = 0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) fail(path, line, "cannot parse label '" + s + "'");
  return v;
}

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

void check_row_sum(const std::string& path, std::size_t line, const std::vector<double>& row) {
  double s = 0.0;
  for (double v : row) {
    if (!std::isfinite(v)) fail(path, line, "non-finite probability");
    if (v < 0.0) fail(path, line, "negative probability " + fmt_g(v));
    s += v;
  }
  if (std::abs(s - 1.0) > kRowSumTol)
    fail(path, line, "row sum " + fmt_g(s) + " exceeds tolerance " + fmt_g(kRowSumTol));
}

void check_label(const std::string& path, std::size_t line, int label, std::size_t k) {
  if (label < 0 || static_cast<std::size_t>(label) >= k)
    fail(path, line, "label " + std::to_string(label) + " out of range for k=" + std::to_string(k));
}

PredictionSet load_csv(const std::string& path, std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw Error(path + ": empty file");
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const auto header = split_fields(line);
  if (header.size() < 2) fail(path, lineno, "header needs value columns and a label column");
  bool is_logits = false;
  const std::string& first = header.front();
  if (first.rfind("prob_", 0) == 0) {
    is_logits = false;
  } else if (first.rfind("logit_", 0) == 0) {
    is_logits = true;
  } else {
    fail(path, lineno, "header must start with prob_0 or logit_0, got '" + first + "'");
  }
  const std::size_t k = header.size() - 1;
  const std::string prefix = is_logits ? "logit_" : "prob_";
  for (std::size_t j = 0; j < k; ++j) {
    if (header[j] != prefix + std::to_string(j))
      fail(path, lineno, "unexpected column '" + header[j] + "', wanted '" + prefix + std::to_string(j) + "'");
  }
  if (header.back() != "label") fail(path, lineno, "last column must be 'label'");

  std::vector<double> values;
  std::vector<int> labels;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != k + 1)
      fail(path, lineno, "expected " + std::to_string(k + 1) + " fields, got " + std::to_string(fields.size()));
    std::vector<double> row(k);
    for (std::size_t j = 0; j < k; ++j) row[j] = parse_double(path, lineno, fields[j]);
    const int label = parse_label(path, lineno, fields.back());
    check_label(path, lineno, label, k);
    if (!is_logits) check_row_sum(path, lineno, row);
    values.insert(values.end(), row.begin(), row.end());
    labels.push_back(label);
  }
  if (labels.empty()) throw Error(path + ": no data rows");
  return is_logits ? PredictionSet::from_logits(k, std::move(values), std::move(labels))
                   : PredictionSet::from_probs(k, std::move(values), std::move(labels));
}

PredictionSet load_jsonl(const std::string& path, std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  std::vector<double> values;
  std::vector<int> labels;
  std::size_t k = 0;
  bool is_logits = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(path, lineno, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) fail(path, lineno, "expected a JSON object");
    const bool has_probs = obj.contains("probs");
    const bool has_logits = obj.contains("logits");
    if (has_probs == has_logits)
      fail(path, lineno, "object needs exactly one of 'probs' or 'logits'");
    if (!obj.contains("label") || !obj["label"].is_number_integer())
      fail(path, lineno, "object needs an integer 'label'");
    const auto& arr = has_probs ? obj["probs"] : obj["logits"];
    if (!arr.is_array() || arr.empty()) fail(path, lineno, "'probs'/'logits' must be a non-empty array");
    if (labels.empty()) {
      k = arr.size();
      is_logits = has_logits;
    } else {
      if (has_logits != is_logits) fail(path, lineno, "cannot mix 'probs' and 'logits' lines");
      if (arr.size() != k)
        fail(path, lineno, "expected " + std::to_string(k) + " entries, got " + std::to_string(arr.size()));
    }
    std::vector<double> row(k);
    for (std::size_t j = 0; j < k; ++j) {
      if (!arr[j].is_number()) fail(path, lineno, "array entries must be numbers");
      row[j] = arr[j].get<double>();
    }
    const int label = obj["label"].get<int>();
    check_label(path, lineno, label, k);
    if (!is_logits) check_row_sum(path, lineno, row);
    values.insert(values.end(), row.begin(), row.end());
    labels.push_back(label);
  }
  if (labels.empty()) throw Error(path + ": no data rows");
  return is_logits ? PredictionSet::from_logits(k, std::move(values), std::move(labels))
                   : PredictionSet::from_probs(k, std::move(values), std::move(labels));
}

}  // namespace

InputFormat infer_format(const std::string& path) {
  const std::string suffix = ".jsonl";
  if (path.size() >= suffix.size() &&
      path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0)
    return InputFormat::jsonl;
  return InputFormat::csv;
}

PredictionSet load_predictions(const std::string& path, InputFormat format) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return format == InputFormat::csv ? load_csv(path, in) : load_jsonl(path, in);
}

void write_predictions_csv(const PredictionSet& ps, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  for (std::size_t j = 0; j < ps.k; ++j) out << "prob_" << j << ",";
  out << "label\n";
  char buf[64];
  for (std::size_t i = 0; i < ps.n; ++i) {
    const auto r = ps.row(i);
    for (std::size_t j = 0; j < ps.k; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", r[j]);
      out << buf << ",";
    }
    out << ps.labels[i] << "\n";
  }
  if (!out) throw Error("failed writing " + path);
}

}  // namespace calsharp
