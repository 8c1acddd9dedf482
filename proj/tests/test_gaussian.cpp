#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "pickands/gaussian.hpp"
#include "pickands/grid.hpp"

using namespace pickands;
using Catch::Approx;

namespace {

struct Moments {
  std::vector<double> mean, var;
};

template <class Sampler>
Moments path_moments(const Sampler& s, std::size_t npts, int reps, std::uint64_t seed,
                     std::uint64_t tag) {
  Moments m;
  m.mean.assign(npts, 0.0);
  m.var.assign(npts, 0.0);
  std::vector<double> w;
  for (int r = 0; r < reps; ++r) {
    RngStream rng(seed, static_cast<std::uint64_t>(r), tag);
    s.sample(rng, w);
    const double n = r + 1.0;
    for (std::size_t i = 0; i < npts; ++i) {
      const double d0 = w[i] - m.mean[i];
      m.mean[i] += d0 / n;
      m.var[i] += d0 * (w[i] - m.mean[i]);
    }
  }
  for (auto& v : m.var) v /= (reps - 1.0);
  return m;
}

}  // namespace

TEST_CASE("invalid increment sequences produce negative embedding eigenvalues") {
  // gamma(0) = 0 with gamma(1) = 1 is not an autocovariance; the embedding
  // spectrum must go negative so the sampler can detect and reject it.
  const auto lambda = detail::circulant_eigenvalues({0.0, 1.0});
  double lmin = 0.0;
  for (double l : lambda) lmin = std::min(lmin, l);
  REQUIRE(lmin < -0.5);
}

TEST_CASE("circulant and dense samplers agree on marginal moments") {
  for (const double alpha : {0.5, 0.75}) {
    const auto vf = VarianceFunction::fbm(alpha);
    const std::size_t n = 33;
    const double h = 0.125;
    MeshGaussian1D mesh(vf, 0.0, h, n);
    REQUIRE(mesh.path() == MeshGaussian1D::Path::Circulant);

    PointSet pts;
    pts.d = 1;
    for (std::size_t i = 0; i < n; ++i) pts.coords.push_back(static_cast<double>(i) * h);
    CholeskySampler dense(std::move(pts), [&vf](const double* s, const double* t, int d) {
      return covariance(vf, s, t, d);
    });

    const int reps = 60000;
    const auto mc = path_moments(mesh, n, reps, 42, 1);
    const auto md = path_moments(dense, n, reps, 42, 2);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) * h;
      const double s2 = vf.at1(t);
      const double se_mean = std::sqrt(std::max(s2, 1e-12) / reps);
      const double se_var = s2 * std::sqrt(2.0 / reps);
      REQUIRE(std::abs(mc.mean[i]) <= 5.0 * se_mean + 1e-12);
      REQUIRE(std::abs(md.mean[i]) <= 5.0 * se_mean + 1e-12);
      REQUIRE(std::abs(mc.var[i] - s2) <= 5.0 * se_var + 1e-12);
      REQUIRE(std::abs(md.var[i] - s2) <= 5.0 * se_var + 1e-12);
    }
  }
}

TEST_CASE("mesh sampler anchors W(0) = 0 even on windows") {
  const auto vf = VarianceFunction::fbm(0.5);
  MeshGaussian1D mesh(vf, -2.0, 0.5, 9);  // [-2, 2], origin at index 4
  std::vector<double> w;
  RngStream rng(7, 0, 1);
  mesh.sample(rng, w);
  REQUIRE(w.size() == 9);
  REQUIRE(w[4] == 0.0);
  REQUIRE(mesh.point(4) == 0.0);
  // off-mesh origin is rejected
  REQUIRE_THROWS_AS(MeshGaussian1D(vf, -0.3, 0.5, 4), ConfigError);
}

TEST_CASE("pure-quadratic variances take the exact rank-one path") {
  MeshGaussian1D mesh(VarianceFunction::linear(2.0), -1.0, 0.5, 5);
  REQUIRE(mesh.path() == MeshGaussian1D::Path::RankOne);
  std::vector<double> w;
  RngStream rng(3, 5, 1);
  mesh.sample(rng, w);
  // W(t) = c t xi: ratios of coordinates are deterministic
  REQUIRE(w[2] == 0.0);
  REQUIRE(w[4] == Approx(-w[0]));
  REQUIRE(w[3] == Approx(0.5 * w[4]));
}

TEST_CASE("dense sampler rejects non-positive-semidefinite covariances") {
  PointSet pts;
  pts.d = 1;
  pts.coords = {1.0, 2.0, 3.0};
  auto bad = [](const double* s, const double* t, int) {
    return s[0] == t[0] ? 1.0 : -1.0;  // eigenvalues {2, 2, -1}
  };
  REQUIRE_THROWS_AS(CholeskySampler(std::move(pts), bad), NotPsdError);
}

TEST_CASE("point sampler handles arbitrary point sets in d dimensions") {
  const auto vf = VarianceFunction::fbm(0.5);
  PointSet pts;
  pts.d = 2;
  pts.coords = {0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0};
  PointGaussian g(vf, std::move(pts));
  const int reps = 60000;
  const auto m = path_moments(g, 4, reps, 9, 3);
  REQUIRE(std::abs(m.var[0]) < 1e-12);  // W(0) = 0 exactly
  for (std::size_t i = 1; i < 4; ++i) {
    const double t[2] = {i == 2 ? 0.0 : 1.0, i >= 2 ? 1.0 : 0.0};
    const double s2 = vf(t, 2);
    REQUIRE(std::abs(m.var[i] - s2) <= 5.0 * s2 * std::sqrt(2.0 / reps));
  }
}
