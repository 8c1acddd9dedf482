#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <vector>

#include "pickands/estimate.hpp"
#include "pickands/rng.hpp"

using namespace pickands;
using Catch::Approx;

TEST_CASE("streaming accumulator matches closed-form mean and variance") {
  Welford w;
  for (double x : {2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0}) w.add(x);
  REQUIRE(w.n == 8);
  REQUIRE(w.mean == Approx(5.0));
  REQUIRE(w.variance() == Approx(32.0 / 7.0));
  REQUIRE(w.min == 2.0);
  REQUIRE(w.max == 9.0);
  REQUIRE(w.stderr_of_mean() == Approx(std::sqrt(32.0 / 7.0 / 8.0)));
}

TEST_CASE("merging accumulators equals accumulating the concatenation") {
  RngStream rng(5, 0, 1);
  std::vector<double> xs(1000);
  for (auto& x : xs) x = rng.normal() * 3.0 + 1.0;

  Welford whole;
  for (double x : xs) whole.add(x);
  Welford a, b;
  for (std::size_t i = 0; i < xs.size(); ++i) (i < 400 ? a : b).add(xs[i]);
  a.merge(b);
  REQUIRE(a.n == whole.n);
  REQUIRE(a.mean == Approx(whole.mean).epsilon(1e-13));
  REQUIRE(a.m2 == Approx(whole.m2).epsilon(1e-12));
  REQUIRE(a.min == whole.min);
  REQUIRE(a.max == whole.max);

  Welford empty;
  empty.merge(whole);  // merging into empty copies
  REQUIRE(empty.mean == whole.mean);
  whole.merge(Welford{});  // merging empty is a no-op
  REQUIRE(whole.n == 1000);
}

TEST_CASE("vector accumulator tracks cross-covariances") {
  VectorWelford vw(2);
  RngStream rng(9, 0, 1);
  const int n = 50000;
  for (int i = 0; i < n; ++i) {
    const double g = rng.normal();
    const double h = rng.normal();
    const double x[2] = {g, 0.5 * g + h};  // cov(x0, x1) = 0.5
    vw.add(x);
  }
  REQUIRE(vw.count() == static_cast<std::uint64_t>(n));
  // mean_cov is the covariance of the sample means: population cov / n
  const double scale = static_cast<double>(n);
  REQUIRE(std::abs(vw.mean(0)) < 0.02);
  REQUIRE(scale * vw.mean_cov(0, 0) == Approx(1.0).margin(0.05));
  REQUIRE(scale * vw.mean_cov(1, 1) == Approx(1.25).margin(0.05));
  REQUIRE(scale * vw.mean_cov(0, 1) == Approx(0.5).margin(0.05));
  REQUIRE(vw.mean_cov(0, 1) == vw.mean_cov(1, 0));
  REQUIRE(vw.stderr_of_mean(0) == Approx(std::sqrt(vw.mean_cov(0, 0))));
}

TEST_CASE("scalar reduction is bit-identical across worker counts") {
  const auto run = [](int workers) {
    return mc_reduce(10000, workers, []() {
      return [](std::uint64_t r) {
        RngStream rng(77, r, stream_tag::kDirect);
        const double g = rng.normal();
        return std::exp(0.3 * g);
      };
    });
  };
  const Welford w1 = run(1);
  const Welford w3 = run(3);
  const Welford w8 = run(8);
  REQUIRE(w1.mean == w3.mean);   // exact equality: chunk merge order is fixed
  REQUIRE(w1.m2 == w3.m2);
  REQUIRE(w1.mean == w8.mean);
  REQUIRE(w1.m2 == w8.m2);
  REQUIRE(w1.n == 10000);
  // and the estimate is right: E exp(0.3 G) = exp(0.045)
  REQUIRE(std::abs(w1.mean - std::exp(0.045)) < 5.0 * w1.stderr_of_mean());
}

TEST_CASE("vector reduction is bit-identical across worker counts") {
  const auto run = [](int workers) {
    return mc_reduce_vec(5000, workers, 2, []() {
      return [](std::uint64_t r, double* out) {
        RngStream rng(78, r, stream_tag::kRatio);
        out[0] = rng.normal();
        out[1] = rng.exponential();
      };
    });
  };
  const auto a = run(1);
  const auto b = run(5);
  REQUIRE(a.mean(0) == b.mean(0));
  REQUIRE(a.mean(1) == b.mean(1));
  REQUIRE(a.mean_cov(0, 1) == b.mean_cov(0, 1));
  REQUIRE(a.mean_cov(1, 1) == b.mean_cov(1, 1));
}

TEST_CASE("worker resolution honours explicit requests and the environment") {
  REQUIRE(resolve_workers(4) == 4);
  REQUIRE(resolve_workers(1) == 1);
  ::setenv("PICKANDS_WORKERS", "3", 1);
  REQUIRE(resolve_workers(0) == 3);
  ::unsetenv("PICKANDS_WORKERS");
  REQUIRE(resolve_workers(0) >= 1);  // hardware default
}

TEST_CASE("reductions handle tiny and empty workloads") {
  const Welford w = mc_reduce(0, 4, []() { return [](std::uint64_t) { return 1.0; }; });
  REQUIRE(w.n == 0);
  REQUIRE(w.stderr_of_mean() == 0.0);
  const Welford one = mc_reduce(1, 4, []() { return [](std::uint64_t) { return 2.5; }; });
  REQUIRE(one.n == 1);
  REQUIRE(one.mean == 2.5);
}
