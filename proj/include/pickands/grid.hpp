#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "pickands/errors.hpp"

namespace pickands {

// Hard cap on enumerated grid sizes.
inline constexpr std::size_t kMaxGridPoints = 100'000'000;

// Flat, row-major point set in d dimensions: point i occupies
// coords[i*d .. i*d+d).
struct PointSet {
  int d = 1;
  std::vector<double> coords;

  std::size_t size() const { return d > 0 ? coords.size() / static_cast<std::size_t>(d) : 0; }
  const double* at(std::size_t i) const { return coords.data() + i * static_cast<std::size_t>(d); }

  static PointSet single(std::vector<double> point) {
    PointSet p;
    p.d = static_cast<int>(point.size());
    p.coords = std::move(point);
    return p;
  }
};

namespace detail {

// floor with forgiveness for values sitting a hair under an integer from
// binary rounding (e.g. 1/0.3 or 10*0.1); keeps grid counts stable.
inline long long lattice_floor(double x) {
  return static_cast<long long>(std::floor(x + 1e-9));
}

inline void check_point_budget(double total_points, const char* what) {
  if (!(total_points <= static_cast<double>(kMaxGridPoints))) {
    throw GridTooLargeError(std::string(what) + ": requested grid exceeds the " +
                            std::to_string(kMaxGridPoints) + "-point cap");
  }
}

}  // namespace detail

// Number of lattice points per axis on [0, T] with spacing delta > 0:
// floor(T/delta) + 1, with tolerance for floating division.
inline long long axis_count_box(double T, double delta) {
  if (!(delta > 0.0)) throw ConfigError("axis_count_box: delta must be > 0");
  if (!(T >= 0.0)) throw ConfigError("axis_count_box: T must be >= 0");
  return detail::lattice_floor(T / delta) + 1;
}

// Half-count K for the symmetric window [-R, R]: lattice points are
// k*delta, k = -K..K, so the origin is always a member.
inline long long axis_halfcount_window(double R, double delta) {
  if (!(delta > 0.0)) throw ConfigError("axis_halfcount_window: delta must be > 0");
  if (!(R >= 0.0)) throw ConfigError("axis_halfcount_window: R must be >= 0");
  return detail::lattice_floor(R / delta);
}

// Lattice delta*Z^d intersected with the box anchor + [0, T]^d, enumerated
// lexicographically (first axis slowest). Default anchor is the origin.
inline PointSet enumerate_points(int d, double delta, double T,
                                 const std::vector<double>& anchor = {}) {
  if (d < 1) throw ConfigError("enumerate_points: dimension must be >= 1");
  if (!anchor.empty() && static_cast<int>(anchor.size()) != d)
    throw ConfigError("enumerate_points: anchor dimension mismatch");
  const long long n = axis_count_box(T, delta);
  double total = 1.0;
  for (int k = 0; k < d; ++k) total *= static_cast<double>(n);
  detail::check_point_budget(total, "enumerate_points");

  PointSet out;
  out.d = d;
  const auto npts = static_cast<std::size_t>(total);
  out.coords.reserve(npts * static_cast<std::size_t>(d));
  std::vector<long long> idx(static_cast<std::size_t>(d), 0);
  for (std::size_t i = 0; i < npts; ++i) {
    for (int k = 0; k < d; ++k) {
      double c = static_cast<double>(idx[static_cast<std::size_t>(k)]) * delta;
      if (!anchor.empty()) c += anchor[static_cast<std::size_t>(k)];
      out.coords.push_back(c);
    }
    for (int k = d - 1; k >= 0; --k) {  // odometer increment, last axis fastest
      if (++idx[static_cast<std::size_t>(k)] < n) break;
      idx[static_cast<std::size_t>(k)] = 0;
    }
  }
  return out;
}

// Lattice delta*Z^d intersected with the symmetric window [-R, R]^d,
// lexicographic, origin always a member.
inline PointSet window_points(int d, double delta, double R) {
  if (d < 1) throw ConfigError("window_points: dimension must be >= 1");
  const long long K = axis_halfcount_window(R, delta);
  const long long n = 2 * K + 1;
  double total = 1.0;
  for (int k = 0; k < d; ++k) total *= static_cast<double>(n);
  detail::check_point_budget(total, "window_points");

  PointSet out;
  out.d = d;
  const auto npts = static_cast<std::size_t>(total);
  out.coords.reserve(npts * static_cast<std::size_t>(d));
  std::vector<long long> idx(static_cast<std::size_t>(d), -K);
  for (std::size_t i = 0; i < npts; ++i) {
    for (int k = 0; k < d; ++k)
      out.coords.push_back(static_cast<double>(idx[static_cast<std::size_t>(k)]) * delta);
    for (int k = d - 1; k >= 0; --k) {
      if (++idx[static_cast<std::size_t>(k)] <= K) break;
      idx[static_cast<std::size_t>(k)] = -K;
    }
  }
  return out;
}

}  // namespace pickands
