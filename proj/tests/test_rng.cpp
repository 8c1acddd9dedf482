#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <vector>

#include "pickands/rng.hpp"

using namespace pickands;

TEST_CASE("streams are reproducible and keyed by (seed, replica, tag)") {
  RngStream a(42, 7, stream_tag::kRatio);
  RngStream b(42, 7, stream_tag::kRatio);
  for (int i = 0; i < 100; ++i) REQUIRE(a.uniform() == b.uniform());

  RngStream c(42, 7, stream_tag::kDirect);
  RngStream d(42, 8, stream_tag::kRatio);
  RngStream e(43, 7, stream_tag::kRatio);
  RngStream base(42, 7, stream_tag::kRatio);
  bool all_same_c = true, all_same_d = true, all_same_e = true;
  for (int i = 0; i < 16; ++i) {
    const double x = base.uniform();
    all_same_c &= (c.uniform() == x);
    all_same_d &= (d.uniform() == x);
    all_same_e &= (e.uniform() == x);
  }
  REQUIRE_FALSE(all_same_c);
  REQUIRE_FALSE(all_same_d);
  REQUIRE_FALSE(all_same_e);
}

TEST_CASE("derived seeds do not collide on a replica/tag grid") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t r = 0; r < 500; ++r)
    for (std::uint64_t tag = 1; tag <= 8; ++tag)
      seen.insert(RngStream::derive_seed(42, r, tag));
  REQUIRE(seen.size() == 500u * 8u);
}

TEST_CASE("uniform lies in [0,1) and uniform_pos is strictly positive") {
  RngStream rng(1, 0, stream_tag::kDirect);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 200000; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  REQUIRE(lo < 0.01);  // fills the unit interval
  REQUIRE(hi > 0.99);
  for (int i = 0; i < 10000; ++i) REQUIRE(rng.uniform_pos() > 0.0);
}

TEST_CASE("normal and exponential moments match their laws") {
  RngStream rng(7, 0, stream_tag::kDirect);
  const int n = 400000;
  double s1 = 0.0, s2 = 0.0, s4 = 0.0, se1 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = rng.normal();
    s1 += g;
    s2 += g * g;
    s4 += g * g * g * g;
    se1 += rng.exponential();
  }
  const double mean = s1 / n, var = s2 / n, kurt = s4 / n;
  const double emean = se1 / n;
  // 5-sigma bands: se(mean)=1/sqrt(n), se(var)=sqrt(2/n), se(kurt)=sqrt(96/n)
  REQUIRE(std::abs(mean) < 5.0 / std::sqrt(static_cast<double>(n)));
  REQUIRE(std::abs(var - 1.0) < 5.0 * std::sqrt(2.0 / n));
  REQUIRE(std::abs(kurt - 3.0) < 5.0 * std::sqrt(96.0 / n));
  REQUIRE(std::abs(emean - 1.0) < 5.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("draw counting tracks consumption") {
  RngStream rng(3, 1, stream_tag::kSweep);
  REQUIRE(rng.uniforms_drawn() == 0);
  rng.uniform();
  rng.uniform();
  REQUIRE(rng.uniforms_drawn() == 2);
}
