#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "calsharp/kernel.hpp"
#include "calsharp/predictions.hpp"

using namespace calsharp;

TEST_CASE("kernel profiles") {
  const KernelSpec gauss{KernelFamily::gaussian, 1.0};
  CHECK(gauss.eval(0.0) == doctest::Approx(0.3989422804014327).epsilon(1e-12));
  CHECK(gauss.eval(1.0) == doctest::Approx(0.24197072451914337).epsilon(1e-12));
  const KernelSpec epan{KernelFamily::epanechnikov, 1.0};
  CHECK(epan.eval(0.0) == 0.75);
  CHECK(epan.eval(1.0) == 0.0);
  CHECK(epan.eval(-1.0) == 0.0);
  CHECK(epan.eval(1.2) == 0.0);
  CHECK(epan.eval(0.5) == doctest::Approx(0.5625).epsilon(1e-15));
}

TEST_CASE("scaled kernel divides by the bandwidth") {
  const KernelSpec gauss{KernelFamily::gaussian, 0.1};
  CHECK(gauss.scaled(0.0) == doctest::Approx(3.989422804014327).epsilon(1e-12));
  CHECK(gauss.scaled(0.1) == doctest::Approx(2.4197072451914337).epsilon(1e-12));
}

TEST_CASE("kernel names round trip") {
  CHECK(kernel_from_name("gaussian") == KernelFamily::gaussian);
  CHECK(kernel_from_name("epanechnikov") == KernelFamily::epanechnikov);
  CHECK_THROWS_AS(kernel_from_name("uniform"), Error);
}

TEST_CASE("uniform grid spans the unit interval") {
  const auto g = uniform_grid(201);
  CHECK(g.size() == 201);
  CHECK(g.front() == 0.0);
  CHECK(g.back() == 1.0);
  CHECK(g[100] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(g[1] - g[0] == doctest::Approx(0.005).epsilon(1e-12));
  CHECK_THROWS_AS(uniform_grid(1), Error);
}

TEST_CASE("two point regression reproduces the classic value") {
  const double xs[] = {0.0, 1.0};
  const double ys[] = {0.0, 1.0};
  const double qs[] = {0.0};
  const auto m = nw_regress(xs, ys, {KernelFamily::gaussian, 1.0}, qs);
  REQUIRE(m[0].has_value());
  CHECK(*m[0] == doctest::Approx(0.37754066879814546).epsilon(1e-9));
}

TEST_CASE("regression of a constant is that constant") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> xs(50), ys(50, 0.37);
  for (double& x : xs) x = unit(rng);
  const auto grid = uniform_grid(11);
  for (const auto family : {KernelFamily::gaussian, KernelFamily::epanechnikov}) {
    const auto m = nw_regress(xs, ys, {family, 0.2}, grid);
    for (const auto& v : m) {
      if (v) CHECK(*v == doctest::Approx(0.37).epsilon(1e-12));
    }
  }
}

TEST_CASE("tiny bandwidth pins the regression to the local sample") {
  const double xs[] = {0.2, 0.8};
  const double ys[] = {1.0, 0.0};
  const double qs[] = {0.21, 0.79};
  const auto m = nw_regress(xs, ys, {KernelFamily::gaussian, 0.01}, qs);
  CHECK(*m[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(*m[1] == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("zero kernel mass yields no value") {
  const double xs[] = {0.2};
  const double ys[] = {1.0};
  const double qs[] = {0.5, 0.25};
  const auto m = nw_regress(xs, ys, {KernelFamily::epanechnikov, 0.1}, qs);
  CHECK_FALSE(m[0].has_value());
  REQUIRE(m[1].has_value());
  CHECK(*m[1] == 1.0);
}

TEST_CASE("regression output does not depend on sample order") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t n = 200;
  std::vector<double> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = unit(rng);
    ys[i] = unit(rng) < 0.5 ? 0.0 : 1.0;
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<double> xs2(n), ys2(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs2[i] = xs[perm[i]];
    ys2[i] = ys[perm[i]];
  }
  const auto grid = uniform_grid(21);
  for (const auto family : {KernelFamily::gaussian, KernelFamily::epanechnikov}) {
    const KernelSpec ks{family, 0.07};
    const auto a = nw_regress(xs, ys, ks, grid);
    const auto b = nw_regress(xs2, ys2, ks, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      CHECK(a[i].has_value() == b[i].has_value());
      if (a[i]) CHECK(*a[i] == *b[i]);  // bitwise: the sum order is canonical
    }
  }
}

TEST_CASE("windowed epanechnikov path matches the direct sum") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t n = 300;
  std::vector<double> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = unit(rng);
    ys[i] = unit(rng);
  }
  const KernelSpec ks{KernelFamily::epanechnikov, 0.13};
  const auto grid = uniform_grid(31);
  const auto fast = nw_regress(xs, ys, ks, grid);
  for (std::size_t qi = 0; qi < grid.size(); ++qi) {
    double wsum = 0.0, ysum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double kv = ks.scaled(grid[qi] - xs[i]);
      wsum += kv;
      ysum += kv * ys[i];
    }
    if (wsum > 0.0) {
      REQUIRE(fast[qi].has_value());
      CHECK(*fast[qi] == doctest::Approx(ysum / wsum).epsilon(1e-12));
    } else {
      CHECK_FALSE(fast[qi].has_value());
    }
  }
}

TEST_CASE("regression reflection only matters near the boundary") {
  std::vector<double> xs = {0.03, 0.08, 0.45, 0.5, 0.55};
  std::vector<double> ys = {1.0, 0.0, 0.5, 0.5, 0.5};
  const KernelSpec ks{KernelFamily::gaussian, 0.05};
  const double qs[] = {0.02, 0.5};
  const auto plain = nw_regress(xs, ys, ks, qs, false);
  const auto mirrored = nw_regress(xs, ys, ks, qs, true);
  CHECK(*plain[0] != *mirrored[0]);
  CHECK(*plain[1] == doctest::Approx(*mirrored[1]).epsilon(1e-9));
}

TEST_CASE("kde single sample peak height") {
  const double xs[] = {0.5};
  const double qs[] = {0.5};
  const auto d = kde(xs, {KernelFamily::gaussian, 0.05}, qs);
  CHECK(d[0] == doctest::Approx(7.978845608028654).epsilon(1e-9));
}

TEST_CASE("reflected kde integrates to one") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> xs(400);
  for (double& x : xs) x = unit(rng) * unit(rng);  // mass piled near zero
  const auto grid = uniform_grid(2001);
  for (const double bw : {0.01, 0.05, 0.1}) {
    for (const auto family : {KernelFamily::gaussian, KernelFamily::epanechnikov}) {
      const auto d = kde(xs, {family, bw}, grid);
      double integral = 0.0;
      for (std::size_t i = 0; i + 1 < grid.size(); ++i)
        integral += 0.5 * (d[i] + d[i + 1]) * (grid[i + 1] - grid[i]);
      CHECK(integral == doctest::Approx(1.0).epsilon(0.01));
    }
  }
}

TEST_CASE("kde reflection doubles the boundary mass") {
  const double xs[] = {0.0};
  const double qs[] = {0.0};
  const auto d = kde(xs, {KernelFamily::gaussian, 0.05}, qs);
  // sample and its mirror coincide at the boundary
  CHECK(d[0] == doctest::Approx(2.0 * 7.978845608028654).epsilon(1e-9));
}

TEST_CASE("invalid kernel inputs are rejected") {
  const double xs[] = {0.5};
  const double ys[] = {1.0};
  const double qs[] = {0.5};
  CHECK_THROWS_AS(nw_regress(xs, ys, {KernelFamily::gaussian, 0.0}, qs), Error);
  CHECK_THROWS_AS(nw_regress(xs, ys, {KernelFamily::gaussian, -0.1}, qs), Error);
  CHECK_THROWS_AS(nw_regress({}, {}, {KernelFamily::gaussian, 0.1}, qs), Error);
  const double ys2[] = {1.0, 0.0};
  CHECK_THROWS_AS(nw_regress(xs, ys2, {KernelFamily::gaussian, 0.1}, qs), Error);
  CHECK_THROWS_AS(kde({}, {KernelFamily::gaussian, 0.1}, qs), Error);
}

TEST_CASE("subsample estimate runs directly under the cap") {
  std::vector<double> vals(100);
  std::iota(vals.begin(), vals.end(), 0.0);
  auto mean_of = [&](std::span<const std::size_t> idx) {
    double s = 0.0;
    for (auto i : idx) s += vals[i];
    return s / static_cast<double>(idx.size());
  };
  const auto est = subsample_mean_estimate(mean_of, vals.size(), {});
  CHECK(est.reps == 1);
  CHECK(est.std == 0.0);
  CHECK(est.mean == doctest::Approx(49.5).epsilon(1e-12));
}

TEST_CASE("subsample estimate above the cap is seeded and close") {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> normal(3.0, 1.0);
  std::vector<double> vals(20000);
  for (double& v : vals) v = normal(rng);
  double full = 0.0;
  for (double v : vals) full += v;
  full /= static_cast<double>(vals.size());

  auto mean_of = [&](std::span<const std::size_t> idx) {
    // indices must be sorted, unique and in range
    for (std::size_t t = 1; t < idx.size(); ++t) REQUIRE(idx[t] > idx[t - 1]);
    REQUIRE(idx.back() < vals.size());
    double s = 0.0;
    for (auto i : idx) s += vals[i];
    return s / static_cast<double>(idx.size());
  };
  const SubsamplePolicy policy{2000, 10, 5};
  const auto a = subsample_mean_estimate(mean_of, vals.size(), policy);
  const auto b = subsample_mean_estimate(mean_of, vals.size(), policy);
  CHECK(a.mean == b.mean);
  CHECK(a.std == b.std);
  CHECK(a.reps == 10);
  CHECK(a.std > 0.0);
  CHECK(std::abs(a.mean - full) < 0.1);
  const auto c = subsample_mean_estimate(mean_of, vals.size(), {2000, 10, 6});
  CHECK(a.mean != c.mean);
}
