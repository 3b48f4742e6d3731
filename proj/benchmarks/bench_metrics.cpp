#include <benchmark/benchmark.h>

#include "calsharp/decomposition.hpp"
#include "calsharp/metrics.hpp"
#include "calsharp/synth.hpp"

namespace {

calsharp::PredictionSet sample_set(std::size_t n) {
  calsharp::synth::DiscreteWorld w;
  w.k = 10;
  w.levels = {{0.95, 0.9, 0.4}, {0.8, 0.7, 0.4}, {0.6, 0.55, 0.2}};
  return calsharp::synth::sample_discrete(w, n, 42);
}

void BM_PluginCalibrationError(benchmark::State& state) {
  const auto ps = sample_set(static_cast<std::size_t>(state.range(0)));
  const auto view = calsharp::confidence_view(ps);
  const calsharp::KernelSpec kernel{calsharp::KernelFamily::gaussian, 0.05};
  for (auto _ : state) {
    auto e = calsharp::plugin_calibration_error(view, calsharp::BregmanSpec::brier(), kernel);
    benchmark::DoNotOptimize(e);
  }
}

void BM_MetricsTable(benchmark::State& state) {
  const auto ps = sample_set(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    auto t = calsharp::metrics_table(ps);
    benchmark::DoNotOptimize(t);
  }
}

void BM_SharpnessCurve(benchmark::State& state) {
  const auto ps = sample_set(static_cast<std::size_t>(state.range(0)));
  const auto view = calsharp::confidence_view(ps);
  const auto grid = calsharp::uniform_grid(201);
  const calsharp::KernelSpec kernel{calsharp::KernelFamily::gaussian, 0.05};
  for (auto _ : state) {
    auto c = calsharp::pointwise_sharpness_gap(ps, view, calsharp::BregmanSpec::brier(), kernel,
                                               grid);
    benchmark::DoNotOptimize(c);
  }
}

}  // namespace

BENCHMARK(BM_PluginCalibrationError)->Range(1000, 100000);
BENCHMARK(BM_MetricsTable)->Range(1000, 100000);
BENCHMARK(BM_SharpnessCurve)->Range(1000, 100000);

BENCHMARK_MAIN();
