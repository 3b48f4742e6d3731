#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "calsharp/kernel.hpp"

namespace {

std::vector<double> random_unit(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> xs(n);
  for (double& x : xs) x = unit(rng);
  return xs;
}

void BM_NwRegress(benchmark::State& state, calsharp::KernelFamily family) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const auto xs = random_unit(n, 1);
  const auto ys = random_unit(n, 2);
  const auto grid = calsharp::uniform_grid(201);
  const calsharp::KernelSpec kernel{family, 0.05};
  for (auto _ : state) {
    auto m = calsharp::nw_regress(xs, ys, kernel, grid);
    benchmark::DoNotOptimize(m);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

void BM_Kde(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const auto xs = random_unit(n, 3);
  const auto grid = calsharp::uniform_grid(201);
  const calsharp::KernelSpec kernel{calsharp::KernelFamily::gaussian, 0.05};
  for (auto _ : state) {
    auto d = calsharp::kde(xs, kernel, grid);
    benchmark::DoNotOptimize(d);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

}  // namespace

BENCHMARK_CAPTURE(BM_NwRegress, gaussian, calsharp::KernelFamily::gaussian)
    ->Range(1000, 100000);
BENCHMARK_CAPTURE(BM_NwRegress, epanechnikov, calsharp::KernelFamily::epanechnikov)
    ->Range(1000, 100000);
BENCHMARK(BM_Kde)->Range(1000, 100000);

BENCHMARK_MAIN();
