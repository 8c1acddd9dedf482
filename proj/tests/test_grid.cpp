#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pickands/grid.hpp"

using namespace pickands;

TEST_CASE("axis counts are robust to floating-point division") {
  REQUIRE(axis_count_box(10.0, 0.1) == 101);  // 10/0.1 = 99.9999... must round up
  REQUIRE(axis_count_box(1.0, 0.3) == 4);     // {0, .3, .6, .9}
  REQUIRE(axis_count_box(0.0, 1.0) == 1);
  REQUIRE(axis_halfcount_window(10.0, 0.1) == 100);
  REQUIRE(axis_halfcount_window(2.0, 0.5) == 4);
  REQUIRE_THROWS_AS(axis_count_box(1.0, 0.0), ConfigError);
  REQUIRE_THROWS_AS(axis_count_box(-1.0, 0.5), ConfigError);
}

TEST_CASE("box grids enumerate lexicographically") {
  const PointSet p = enumerate_points(2, 1.0, 2.0);
  REQUIRE(p.d == 2);
  REQUIRE(p.size() == 9);
  // first point (0,0), second (0,1), last (2,2)
  REQUIRE(p.at(0)[0] == 0.0);
  REQUIRE(p.at(0)[1] == 0.0);
  REQUIRE(p.at(1)[1] == 1.0);
  REQUIRE(p.at(8)[0] == 2.0);
  REQUIRE(p.at(8)[1] == 2.0);
}

TEST_CASE("anchored grids shift every coordinate") {
  const PointSet p = enumerate_points(1, 0.5, 1.0, {-3.0});
  REQUIRE(p.size() == 3);
  REQUIRE(p.at(0)[0] == -3.0);
  REQUIRE(p.at(2)[0] == -2.0);
  REQUIRE_THROWS_AS(enumerate_points(2, 0.5, 1.0, {0.0}), ConfigError);
}

TEST_CASE("symmetric windows cover [-R, R]") {
  const PointSet p = window_points(1, 0.5, 2.0);
  REQUIRE(p.size() == 9);
  REQUIRE(p.at(0)[0] == -2.0);
  REQUIRE(p.at(4)[0] == 0.0);
  REQUIRE(p.at(8)[0] == 2.0);

  const PointSet q = window_points(2, 1.0, 1.0);
  REQUIRE(q.size() == 9);
  REQUIRE(q.at(0)[0] == -1.0);
  REQUIRE(q.at(0)[1] == -1.0);
}

TEST_CASE("oversized grids are rejected, not attempted") {
  REQUIRE_THROWS_AS(enumerate_points(3, 1e-3, 100.0), GridTooLargeError);
  REQUIRE_THROWS_AS(window_points(2, 1e-5, 100.0), GridTooLargeError);
}

TEST_CASE("single-point sets carry their dimension") {
  const PointSet p = PointSet::single({1.5, -2.0});
  REQUIRE(p.d == 2);
  REQUIRE(p.size() == 1);
  REQUIRE(p.at(0)[1] == -2.0);
}
