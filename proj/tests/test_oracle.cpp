#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <string>

#include "pickands/io.hpp"
#include "pickands/oracle.hpp"

using namespace pickands;
using Catch::Approx;

TEST_CASE("rank-one constants: continuum and lattice closed forms") {
  const double c = 1.4142135623730951;
  REQUIRE(oracle::hurst_linear_continuum(c) == Approx(1.0 / std::sqrt(3.141592653589793)));
  REQUIRE(oracle::hurst_linear_continuum(1.0) == Approx(0.3989422804014327));
  // lattice: (2 Phi(c delta / 2) - 1) / delta
  REQUIRE(oracle::hurst_linear_lattice(c, 0.5) == Approx(0.5526527803).margin(1e-9));
  REQUIRE(oracle::hurst_linear_lattice(1.0, 0.5) == Approx(0.3948253).margin(1e-6));
  // fine lattices converge to the continuum value from below
  REQUIRE(oracle::hurst_linear_lattice(c, 1e-7) ==
          Approx(oracle::hurst_linear_continuum(c)).epsilon(1e-7));
  REQUIRE(oracle::hurst_linear_lattice(c, 0.5) < oracle::hurst_linear_continuum(c));
  REQUIRE(oracle::hurst_linear_lattice(c, 0.25) > oracle::hurst_linear_lattice(c, 0.5));
}

TEST_CASE("random-walk series constants: frozen regression values") {
  // scale-2 Brownian variance, decreasing delta; values pinned at freeze time
  REQUIRE(oracle::hurst_brownian_lattice(2.0, 1.0) == Approx(0.442978).margin(2e-6));
  REQUIRE(oracle::hurst_brownian_lattice(2.0, 0.5) == Approx(0.560370).margin(2e-6));
  REQUIRE(oracle::hurst_brownian_lattice(2.0, 0.25) == Approx(0.663160).margin(2e-6));
  REQUIRE(oracle::hurst_brownian_lattice(2.0, 0.125) == Approx(0.747615).margin(2e-6));
  REQUIRE(oracle::hurst_brownian_lattice(2.0, 0.0625) == Approx(0.813974).margin(2e-6));
}

TEST_CASE("random-walk series respects Brownian time scaling") {
  // sigma^2 = s t is a time change: H(delta; s) = s * H(s delta; 1)
  for (const double delta : {1.0, 0.5, 0.2}) {
    REQUIRE(oracle::hurst_brownian_lattice(2.0, delta) ==
            Approx(2.0 * oracle::hurst_brownian_lattice(1.0, 2.0 * delta)).epsilon(1e-12));
  }
  // monotone increasing as delta decreases, bounded by the continuum value 1...
  // (scale 2 continuum constant is 1; the sequence approaches it slowly)
  REQUIRE(oracle::hurst_brownian_lattice(2.0, 0.0625) < 1.0);
}

TEST_CASE("coverage measure merges overlapping lattice windows") {
  const auto L = Kernel::indicator();
  REQUIRE(oracle::coverage_measure(L, 1.5, 10.0) == Approx(7.0));
  REQUIRE(oracle::coverage_measure(L, 3.0, 10.0) == Approx(4.0));
  REQUIRE(oracle::coverage_measure(L, 1.0, 10.0) == Approx(11.0));   // touching windows merge
  REQUIRE(oracle::coverage_measure(L, 0.25, 10.0) == Approx(11.0));  // overlapping
  REQUIRE(oracle::coverage_measure(L, 2.0, 0.0) == Approx(1.0));     // single point
  REQUIRE_THROWS_AS(oracle::coverage_measure(Kernel::gaussian(), 1.0, 10.0), ConfigError);
}

TEST_CASE("hash and formatting helpers are stable and lossless") {
  // FNV-1a 64 published vectors
  REQUIRE(io::fnv1a64("") == 0xCBF29CE484222325ull);
  REQUIRE(io::fnv1a64("a") == 0xAF63DC4C8601EC8Cull);
  REQUIRE(io::hex16(0xCBF29CE484222325ull) == "cbf29ce484222325");
  REQUIRE(io::hex16(0x1ull) == "0000000000000001");

  // %.17g survives a parse round-trip bit-exactly
  for (const double v : {0.1, 1.0 / 3.0, 2.718281828459045, 1e-300, 12345.678900000001}) {
    const std::string s = io::format_g17(v);
    REQUIRE(std::stod(s) == v);
  }
  REQUIRE(io::format_fixed(0.0, 3) == "0.000");
  REQUIRE(io::format_fixed(1.23456, 3) == "1.235");
}

TEST_CASE("csv fields are quoted per RFC 4180") {
  REQUIRE(io::csv_field("plain") == "plain");
  REQUIRE(io::csv_field("has,comma") == "\"has,comma\"");
  REQUIRE(io::csv_field("has\"quote") == "\"has\"\"quote\"");
  REQUIRE(io::csv_field("two\nlines") == "\"two\nlines\"");
}
