#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "pickands/maxstable.hpp"

using namespace pickands;
using Catch::Approx;

namespace {
double frechet(double x) { return std::exp(-1.0 / x); }
}  // namespace

TEST_CASE("single-point margins are unit Frechet under exact stopping") {
  MaxStableConfig cfg;
  cfg.T = 0.0;  // grid = {0}
  cfg.delta = 1.0;
  const FieldSpec spec = KernelSpec{Kernel::indicator(), 1.0};
  const auto r = simulate_max_stable(spec, cfg, {1.0, 2.0, 0.5}, 40000, 7);
  REQUIRE(r.levels == std::vector<double>{1.0, 2.0, 0.5});
  for (std::size_t i = 0; i < 3; ++i) {
    INFO("level " << r.levels[i]);
    REQUIRE(std::abs(r.prob[i] - frechet(r.levels[i])) < 5.0 * r.prob_se[i] + 1e-9);
  }
  REQUIRE(r.residual_bound == 0.0);  // exact mode
  REQUIRE(r.capped == 0);
  REQUIRE(r.gamma_over_n > 0.5);
  REQUIRE(r.gamma_over_n < 3.0);
  // exact bound: sup L / min density over the relevant window
  const NormalDensity p{1.0};
  REQUIRE(r.bound_B == Approx(1.0 / p.min_on(-1.0, 0.0)));
}

TEST_CASE("flat spectral fields give unit Frechet suprema on any grid") {
  MaxStableConfig cfg;
  cfg.T = 10.0;
  cfg.delta = 1.0;
  const FieldSpec spec = BernoulliSpec{0.5};
  const auto r = simulate_max_stable(spec, cfg, {1.0}, 40000, 11);
  REQUIRE(std::abs(r.prob[0] - frechet(1.0)) < 5.0 * r.prob_se[0]);
  REQUIRE(r.bound_B == Approx(2.0));  // 1/p is an exact bound
}

TEST_CASE("threshold stopping reproduces exact-mode probabilities") {
  MaxStableConfig exact_cfg, thr_cfg;
  exact_cfg.T = thr_cfg.T = 2.0;
  exact_cfg.delta = thr_cfg.delta = 0.5;
  thr_cfg.stopping = StoppingMode::Threshold;
  const FieldSpec spec = KernelSpec{Kernel::indicator(), 1.0};
  const auto re = simulate_max_stable(spec, exact_cfg, {3.0}, 30000, 5);
  const auto rt = simulate_max_stable(spec, thr_cfg, {3.0}, 30000, 5);
  const double se = std::hypot(re.prob_se[0], rt.prob_se[0]);
  REQUIRE(std::abs(re.prob[0] - rt.prob[0]) < 5.0 * se);
  REQUIRE(rt.bound_B > 0.0);
  REQUIRE(rt.bound_B <= re.bound_B);  // pilot quantile cannot exceed the a.s. bound

  // fields with no almost-sure bound cannot use exact stopping
  MaxStableConfig bad = exact_cfg;
  const FieldSpec lg = LogGaussianSpec{VarianceFunction::linear(1.0)};
  REQUIRE_THROWS_AS(simulate_max_stable(lg, bad, {1.0}, 100, 1), ConfigError);
  const FieldSpec lap = KernelSpec{Kernel::laplace(), 1.0};  // non-compact kernel
  REQUIRE_THROWS_AS(simulate_max_stable(lap, bad, {1.0}, 100, 1), ConfigError);
}

TEST_CASE("probabilities are monotone in the level pathwise") {
  MaxStableConfig cfg;
  cfg.T = 1.0;
  cfg.delta = 0.5;
  cfg.stopping = StoppingMode::Threshold;  // laplace has no almost-sure bound
  const FieldSpec spec = KernelSpec{Kernel::laplace(), 1.0};
  const auto r = simulate_max_stable(spec, cfg, {0.5, 1.0, 2.0, 4.0}, 20000, 3);
  for (std::size_t i = 1; i < r.prob.size(); ++i) REQUIRE(r.prob[i] >= r.prob[i - 1]);
  REQUIRE(r.mean_sup > 0.0);
}

TEST_CASE("simulation is bit-identical across worker counts") {
  MaxStableConfig cfg;
  cfg.T = 2.0;
  cfg.delta = 1.0;
  cfg.stopping = StoppingMode::Threshold;  // gaussian kernel has no a.s. bound
  const FieldSpec spec = KernelSpec{Kernel::gaussian(), 1.0};
  const auto a = simulate_max_stable(spec, cfg, {1.0}, 20000, 9, 1);
  const auto b = simulate_max_stable(spec, cfg, {1.0}, 20000, 9, 4);
  REQUIRE(a.prob[0] == b.prob[0]);
  REQUIRE(a.mean_sup == b.mean_sup);
  REQUIRE(a.bound_B == b.bound_B);
}

TEST_CASE("finite-dimensional cdfs match the spectral exponent measure") {
  // two points {0, s}: P(Y(0) <= x0, Y(s) <= x1) = exp(-E max(Z(0)/x0, Z(s)/x1))
  const FieldSpec spec = LogGaussianSpec{VarianceFunction::fbm(0.5, 2.0)};
  PointSet pts;
  pts.d = 1;
  pts.coords = {0.0, 0.5};
  const auto r = fidi_cdf(spec, pts, {1.0, 1.0}, 200000, 42);
  // E max(1, Z(s)) = 2 Phi(sigma(s)/2) with sigma^2(0.5) = 1
  const double target = std::exp(-2.0 * normal_cdf(0.5));
  REQUIRE(target == Approx(0.2508438).margin(1e-6));
  REQUIRE(std::abs(r.prob - target) < 5.0 * r.prob_se + 0.002);

  REQUIRE_THROWS_AS(fidi_cdf(spec, pts, {1.0}, 100, 1), ConfigError);
  REQUIRE_THROWS_AS(fidi_cdf(spec, pts, {1.0, -1.0}, 100, 1), ConfigError);
}

TEST_CASE("the negative-log identity closes the loop between both estimators") {
  MaxStableConfig cfg;
  cfg.T = 4.0;
  cfg.delta = 0.5;
  cfg.stopping = StoppingMode::Threshold;
  const FieldSpec spec = LogGaussianSpec{VarianceFunction::linear(1.4142135623730951)};
  const auto rep = finite_grid_identity_check(spec, cfg, 50.0, 30000, 30000, 42);
  REQUIRE(rep.prob > 0.5);  // high level: comfortably away from P = 0
  REQUIRE(std::abs(rep.z) < 5.0);
  REQUIRE(rep.gap == Approx(rep.lhs - rep.rhs).margin(1e-15));
  REQUIRE_THROWS_AS(finite_grid_identity_check(spec, cfg, -1.0, 100, 100, 1), ConfigError);
}

TEST_CASE("size-biased tilting recentres the field for homogeneous ratios") {
  // F(Z) = Z(s)/Z(0) is 0-homogeneous: E Z(h) F(Z) = E Z(0) F(Z(. - h)),
  // and both sides equal exp(c^2 s h) for the rank-one field.
  const FieldSpec spec = LogGaussianSpec{VarianceFunction::linear(1.0)};
  const auto r = tilt_identity_ratio(spec, 1.0, 1.0, 200000, 42);
  const double target = std::exp(1.0);
  REQUIRE(std::abs(r.lhs - target) < 5.0 * r.lhs_se);
  REQUIRE(std::abs(r.rhs - target) < 5.0 * r.rhs_se);
  REQUIRE(std::abs(r.z) < 5.0);

  // asymmetric kernel catches any sign error in the recentring shift
  const FieldSpec ind = KernelSpec{Kernel::indicator(), 1.0};
  const auto rk = tilt_identity_ratio(ind, 0.5, 0.25, 200000, 42);
  REQUIRE(std::abs(rk.z) < 5.0);
}

TEST_CASE("tilting also holds for the sup-over-sum functional") {
  const FieldSpec spec = LogGaussianSpec{VarianceFunction::fbm(0.5, 2.0)};
  const auto r = tilt_identity_supsum(spec, 0.25, 4.0, 0.5, 60000, 42);
  REQUIRE(std::abs(r.z) < 5.0);
  REQUIRE(r.lhs > 0.0);
  REQUIRE(r.rhs > 0.0);

  const FieldSpec ind = KernelSpec{Kernel::indicator(), 1.0};
  const auto rk = tilt_identity_supsum(ind, 0.25, 4.0, 0.5, 60000, 42);
  REQUIRE(std::abs(rk.z) < 5.0);
  // shift larger than the window is rejected
  REQUIRE_THROWS_AS(tilt_identity_supsum(spec, 0.25, 2.0, 3.0, 100, 1), ConfigError);
}
