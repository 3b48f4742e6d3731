// Acceptance gate: ten end-to-end criteria, one line of output each.
// Exit status is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "calsharp/checks.hpp"
#include "calsharp/metrics.hpp"
#include "calsharp/recalibrate.hpp"
#include "calsharp/synth.hpp"

namespace fs = std::filesystem;
using namespace calsharp;
using checks::CheckResult;

namespace {

constexpr std::uint64_t kSeed = 20240817;

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), pattern, a, b, c);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
}

//! Sharp two-level world: mean replacement must keep accuracy bit-exact,
//! land under 1% binned ECE and strictly lose likelihood.
CheckResult mean_replacement_signature() {
  synth::DiscreteWorld w;
  w.k = 10;
  w.levels = {{0.97, 0.95, 0.5}, {0.88, 0.85, 0.5}};
  const auto full = synth::sample_discrete(w, 50000, kSeed);
  const auto [calib, eval] = split(full, SplitSpec{0.2, 7});

  const double base_acc = accuracy(confidence_view(eval));
  const double base_nll = nll(eval);
  const auto rps = apply(fit_mrr(calib), eval);
  const auto view = confidence_view(rps);
  const double acc = accuracy(view);
  const double ece = binned_ece(view);
  const double post_nll = nll(rps.data);

  const bool pass = acc == base_acc && ece < 0.01 && post_nll > base_nll;
  return {"mean replacement signature", pass,
          fmt("acc delta %.3g, ece %.3g, ", acc - base_acc, ece) +
              fmt("nll %.4f vs baseline %.4f", post_nll, base_nll)};
}

//! Labels drawn from softmax(z) while the model reports logits 2z: the
//! fitted temperature has to come back near 2 and never hurt the nll.
CheckResult temperature_recovery() {
  std::vector<double> fitted;
  bool nll_ok = true;
  for (int s = 1; s <= 5; ++s) {
    std::mt19937_64 rng(1000003ULL * static_cast<std::uint64_t>(s));
    std::normal_distribution<double> normal(0.0, 1.5);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::size_t n = 10000, k = 10;
    std::vector<double> logits(n * k);
    std::vector<int> labels(n);
    std::vector<double> z(k);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < k; ++j) z[j] = normal(rng);
      const auto p = stable_softmax(z);
      const double u = unit(rng);
      double cum = 0.0;
      int y = static_cast<int>(k) - 1;
      for (std::size_t j = 0; j < k; ++j) {
        cum += p[j];
        if (u < cum) {
          y = static_cast<int>(j);
          break;
        }
      }
      labels[i] = y;
      for (std::size_t j = 0; j < k; ++j) logits[i * k + j] = 2.0 * z[j];
    }
    const auto ps = PredictionSet::from_logits(k, std::move(logits), std::move(labels));
    const auto recal = fit_temperature(ps);
    fitted.push_back(std::get<TemperatureScaling>(recal.method).temperature);
    if (!(nll(apply(recal, ps).data) <= nll(ps))) nll_ok = false;
  }
  const double med = median(fitted);
  const bool pass = med >= 1.9 && med <= 2.1 && nll_ok;
  return {"temperature recovery", pass,
          fmt("median fitted T %.4f over 5 seeds, ", med) +
              (nll_ok ? "nll never worse than T=1" : "nll regressed vs T=1")};
}

CheckResult kernel_closed_forms() {
  const KernelSpec epan{KernelFamily::epanechnikov, 1.0};
  const bool exact = epan.eval(0.0) == 0.75;

  const double xs[] = {0.0, 1.0};
  const double ys[] = {0.0, 1.0};
  const double qs[] = {0.0};
  const auto m = nw_regress(xs, ys, KernelSpec{KernelFamily::gaussian, 1.0}, qs);
  const double nw_dev = m[0] ? std::abs(*m[0] - 0.37754066879814546) : 1.0;

  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> pts(4000);
  for (double& p : pts) p = unit(rng);
  const auto grid = uniform_grid(201);
  const auto dens = kde(pts, KernelSpec{KernelFamily::gaussian, 0.05}, grid);
  double integral = 0.0;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i)
    integral += 0.5 * (dens[i] + dens[i + 1]) * (grid[i + 1] - grid[i]);

  const bool pass = exact && nw_dev <= 1e-6 && integral >= 0.99 && integral <= 1.01;
  return {"kernel closed forms",
          pass,
          std::string(exact ? "K(0)=0.75 exact" : "K(0) not exact") +
              fmt(", nw deviation %.3g, kde integral %.6f", nw_dev, integral)};
}

int run_command(const std::string& cmd) { return std::system((cmd + " > /dev/null").c_str()); }

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

//! Structural comparison with a tolerance on numeric leaves; everything else
//! (including the "inf" marker strings) must match exactly.
bool json_close(const nlohmann::json& got, const nlohmann::json& want, double tol,
                const std::string& path, std::string& why, double& max_dev) {
  if (got.type() != want.type() && !(got.is_number() && want.is_number())) {
    why = path + ": type mismatch";
    return false;
  }
  if (want.is_object()) {
    if (got.size() != want.size()) {
      why = path + ": key count mismatch";
      return false;
    }
    for (auto it = want.begin(); it != want.end(); ++it) {
      if (!got.contains(it.key())) {
        why = path + ": missing key " + it.key();
        return false;
      }
      if (!json_close(got.at(it.key()), it.value(), tol, path + "/" + it.key(), why, max_dev))
        return false;
    }
    return true;
  }
  if (want.is_array()) {
    if (got.size() != want.size()) {
      why = path + ": length mismatch";
      return false;
    }
    for (std::size_t i = 0; i < want.size(); ++i)
      if (!json_close(got.at(i), want.at(i), tol, path + "[" + std::to_string(i) + "]", why,
                      max_dev))
        return false;
    return true;
  }
  if (want.is_number()) {
    const double dev = std::abs(got.get<double>() - want.get<double>());
    max_dev = std::max(max_dev, dev);
    if (dev > tol) {
      why = path + fmt(": off by %.3g", dev);
      return false;
    }
    return true;
  }
  if (got != want) {
    why = path + ": value mismatch";
    return false;
  }
  return true;
}

CheckResult pipeline_fixture() {
  const fs::path cli = CALSHARP_CLI_PATH;
  const fs::path fixtures = CALSHARP_FIXTURE_DIR;
  const fs::path input = fixtures / "fixture_predictions.csv";
  const fs::path reference = fixtures / "fixture_reference.json";
  if (!fs::exists(input) || !fs::exists(reference))
    return {"pipeline fixture", false, "fixture files missing under " + fixtures.string()};

  const fs::path out = fs::current_path() / "acceptance_out";
  std::error_code ec;
  fs::remove_all(out, ec);
  const std::string common = " --input \"" + input.string() + "\" --split 0.2 --seed 42";
  if (run_command("\"" + cli.string() + "\" evaluate" + common + " --out \"" +
                  (out / "eval").string() + "\"") != 0)
    return {"pipeline fixture", false, "evaluate command failed"};
  if (run_command("\"" + cli.string() + "\" diagram" + common +
                  " --recal none --recal mrr --reliability --out \"" + (out / "diag").string() +
                  "\"") != 0)
    return {"pipeline fixture", false, "diagram command failed"};

  nlohmann::json got, want;
  try {
    got = nlohmann::json::parse(read_file(out / "eval" / "metrics.json"));
    want = nlohmann::json::parse(read_file(reference));
  } catch (const std::exception& e) {
    return {"pipeline fixture", false, std::string("json parse: ") + e.what()};
  }
  std::string why;
  double max_dev = 0.0;
  if (!json_close(got.at("methods"), want.at("methods"), 1e-9, "methods", why, max_dev))
    return {"pipeline fixture", false, "metrics mismatch at " + why};

  for (const char* name : {"none.svg", "mrr.svg", "none_reliability.svg", "mrr_reliability.svg"}) {
    const auto produced = read_file(out / "diag" / name);
    const auto golden = read_file(fixtures / "golden" / name);
    if (produced.empty() || produced != golden)
      return {"pipeline fixture", false, std::string(name) + " differs from the golden copy"};
  }
  return {"pipeline fixture", true,
          fmt("metrics max deviation %.3g, ", max_dev) + "4 svg files byte-identical"};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<CheckResult()>>> criteria = {
      {"C1", [] { return checks::decomposition_identity(kSeed); }},
      {"C2", [] { return checks::confidence_lower_bound(kSeed); }},
      {"C3", [] { return checks::rho_nonnegativity(kSeed); }},
      {"C4", mean_replacement_signature},
      {"C5", checks::always_wrong_scaling},
      {"C6", [] { return checks::estimator_consistency(kSeed); }},
      {"C7", checks::pava_oracle_equivalence},
      {"C8", temperature_recovery},
      {"C9", kernel_closed_forms},
      {"C10", pipeline_fixture},
  };

  int failures = 0;
  for (const auto& [id, fn] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    CheckResult r;
    try {
      r = fn();
    } catch (const std::exception& e) {
      r = {"unhandled exception", false, e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] %s %s: %s (%.1fs)\n", r.pass ? "PASS" : "FAIL", id, r.name.c_str(),
                r.detail.c_str(), secs);
    if (!r.pass) ++failures;
  }
  return failures;
}
