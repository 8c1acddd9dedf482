#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "pickands/estimators.hpp"
#include "pickands/oracle.hpp"

using namespace pickands;
using Catch::Approx;

namespace {
const FieldSpec kLinearRoot2 = LogGaussianSpec{VarianceFunction::linear(1.4142135623730951)};
const FieldSpec kBrownian2 = LogGaussianSpec{VarianceFunction::fbm(0.5, 2.0)};
}  // namespace

TEST_CASE("regime validation rejects inconsistent ratio configurations") {
  DyConfig bad;
  bad.delta = 0.5;
  bad.eta = 0.0;  // positive lattice with continuum normaliser: undefined ratio
  REQUIRE_THROWS_AS(estimate_H_dy(kBrownian2, 1, bad, 100, 1), ConfigError);

  DyConfig frac;
  frac.delta = 0.4;
  frac.eta = 0.3;  // eta must be an integer multiple of delta... delta of eta
  REQUIRE_THROWS_AS(estimate_H_dy(kBrownian2, 1, frac, 100, 1), ConfigError);

  DyConfig bern;
  bern.delta = 0.0;
  bern.eta = 0.0;
  REQUIRE_THROWS_AS(estimate_H_dy(FieldSpec{BernoulliSpec{0.5}}, 1, bern, 100, 1), ConfigError);

  DyConfig offmesh;
  offmesh.delta = 0.0;
  offmesh.eta = 0.25;
  offmesh.h = 0.1;  // eta not a multiple of the simulation mesh
  REQUIRE_THROWS_AS(estimate_H_dy(kBrownian2, 1, offmesh, 100, 1), ConfigError);
}

TEST_CASE("ratio estimator hits the exact continuum constant of a rank-one field") {
  DyConfig cfg;  // delta = 0, eta = 0: continuum constant
  cfg.h = 0.01;
  cfg.R = 10.0;
  const auto r = estimate_H_dy(kLinearRoot2, 1, cfg, 4000, 42);
  const double target = oracle::hurst_linear_continuum(1.4142135623730951);
  // pathwise the ratio is almost constant: Riemann-sum bias only
  REQUIRE(r.estimate == Approx(target).margin(2e-4));
  REQUIRE(r.stderr_est < 1e-4);
}

TEST_CASE("lattice ratio estimator matches the random-walk series at tight error") {
  DyConfig cfg;
  cfg.delta = 0.5;
  cfg.eta = 0.5;
  cfg.R = 16.0;
  const auto r = estimate_H_dy(kBrownian2, 1, cfg, 60000, 42);
  const double spitzer = oracle::hurst_brownian_lattice(2.0, 0.5);
  REQUIRE(spitzer == Approx(0.560370).margin(2e-6));
  // window truncation biases upward by a few parts in 1e3 at R = 16
  REQUIRE(r.estimate == Approx(spitzer).margin(0.006));
  REQUIRE(std::abs(r.estimate - spitzer) < 6.0 * r.stderr_est + 0.004);
}

TEST_CASE("lattice ratio for the rank-one field matches the normal-cdf formula") {
  DyConfig cfg;
  cfg.delta = 0.5;
  cfg.eta = 0.5;
  cfg.R = 10.0;
  const auto r = estimate_H_dy(kLinearRoot2, 1, cfg, 20000, 42);
  const double target = oracle::hurst_linear_lattice(1.4142135623730951, 0.5);
  REQUIRE(target == Approx(0.5526527803).margin(1e-9));
  REQUIRE(r.estimate == Approx(target).margin(0.001));
}

TEST_CASE("kernel fields bypass path simulation and use analytic windows") {
  DyConfig cfg;
  cfg.delta = 0.0;
  cfg.eta = 1.0;
  cfg.R = 10.0;
  const FieldSpec spec = KernelSpec{Kernel::gaussian(), 1.0};
  const auto r = estimate_H_dy(spec, 1, cfg, 4000, 42);
  // continuum sup of the translated kernel is its peak; the unit-spacing
  // lattice sum telescopes to 1, so the ratio is exactly the peak height.
  REQUIRE(r.estimate == Approx(kInvSqrt2Pi).epsilon(1e-9));
  REQUIRE(r.stderr_est < 1e-10);

  DyDiagnostics diag;
  const auto r2 = estimate_H_dy(spec, 1, cfg, 4000, 42, 0, &diag);
  REQUIRE(r2.estimate == r.estimate);
  // shrinking the window inflates the ratio (the lattice sum loses tail
  // mass faster than the sup), so the checkpoints decrease toward the full
  // estimate and the half-window value is already within a percent
  REQUIRE(diag.mean_quarter >= diag.mean_half - 1e-12);
  REQUIRE(diag.mean_half >= r.estimate - 1e-12);
  REQUIRE(diag.mean_half == Approx(r.estimate).epsilon(0.01));
}

TEST_CASE("degenerate lattices with escaping mass are flagged as divergent") {
  DyConfig cfg;
  cfg.delta = 0.0;
  cfg.eta = 3.0;  // indicator support has width 1 < 3: quotient cells empty
  cfg.R = 10.0;
  const FieldSpec spec = KernelSpec{Kernel::indicator(), 1.0};
  REQUIRE_THROWS_AS(estimate_H_dy(spec, 1, cfg, 4000, 42), DivergenceSuspectedError);
}

TEST_CASE("direct estimator reproduces small closed forms") {
  // flat bernoulli field: E sup Z / T = (p / p) / T ... = 1/T per unit box,
  // delta = 1, T = 10: E[sup Z] = 1, box scaling gives 0.1
  const auto rb = estimate_H_direct(FieldSpec{BernoulliSpec{0.5}}, 1, 10.0, 1.0, 40000, 42);
  REQUIRE(rb.estimate == Approx(0.1).margin(5.0 * rb.stderr_est + 1e-12));

  // indicator kernel on a short box, where the importance weights 1/p(N)
  // stay bounded: the normalised mean is the coverage measure over T
  const FieldSpec ind = KernelSpec{Kernel::indicator(), 1.0};
  const auto ri = estimate_H_direct(ind, 1, 2.0, 0.1, 40000, 42);
  const double target = oracle::coverage_measure(Kernel::indicator(), 0.1, 2.0) / 2.0;
  REQUIRE(target == Approx(1.5).margin(1e-12));
  REQUIRE(ri.estimate == Approx(target).margin(5.0 * ri.stderr_est + 0.002));
}

TEST_CASE("sweeps are monotone with shrinking gaps under shared randomness") {
  const std::vector<double> deltas = {1.0, 0.5, 0.25};
  DyConfig base;
  base.eta = 1.0;
  base.R = 8.0;
  base.h = 0.25;
  const auto r = continuity_sweep(kBrownian2, 1, deltas, SweepEstimator::Ratio, 0.0, base,
                                  8000, 42);
  REQUIRE(r.rows.size() == 3);
  REQUIRE(r.monotonicity_violations == 0);
  REQUIRE(r.gaps_nonincreasing);
  REQUIRE(r.rows[0].estimate < r.rows[1].estimate);
  REQUIRE(r.rows[1].estimate < r.rows[2].estimate);
  REQUIRE(r.gaps.size() == 2);
  REQUIRE(r.gaps[0] > r.gaps[1]);
  // sanity of the sequence against the series oracle (truncation-biased)
  REQUIRE(r.rows[0].estimate == Approx(oracle::hurst_brownian_lattice(2.0, 1.0)).margin(0.02));

  // configuration errors: deltas must be strictly decreasing multiples
  REQUIRE_THROWS_AS(continuity_sweep(kBrownian2, 1, {0.5, 1.0}, SweepEstimator::Ratio, 0.0,
                                     base, 100, 1),
                    ConfigError);
  REQUIRE_THROWS_AS(continuity_sweep(kBrownian2, 1, {1.0, 0.7}, SweepEstimator::Ratio, 0.0,
                                     base, 100, 1),
                    ConfigError);
}

TEST_CASE("direct sweeps drive the same grid family") {
  // spacings wider than the indicator support leave gaps, so refinement
  // strictly raises the coverage and hence the direct constant; a wide
  // location density keeps the importance weights bounded on [0, T]
  const std::vector<double> deltas = {3.0, 1.5, 0.75};
  DyConfig base;
  const double T = 6.0;
  const auto r = continuity_sweep(FieldSpec{KernelSpec{Kernel::indicator(), 3.0}}, 1, deltas,
                                  SweepEstimator::Direct, T, base, 20000, 42);
  REQUIRE(r.rows.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    const double target = oracle::coverage_measure(Kernel::indicator(), deltas[i], T) / T;
    REQUIRE(r.rows[i].estimate ==
            Approx(target).margin(5.0 * r.rows[i].stderr_est + 1e-9));
  }
  REQUIRE(r.rows[1].estimate > r.rows[0].estimate);
  REQUIRE(r.rows[2].estimate > r.rows[1].estimate);
  REQUIRE(r.monotonicity_violations == 0);
}

TEST_CASE("box suprema are subadditive across abutting boxes") {
  const auto rep = subadditivity_check(FieldSpec{StationaryLogGaussianSpec{1.0, 1.0}}, 4.0,
                                       4.0, 1.0, 20000, 42);
  REQUIRE(rep.a12 <= rep.a1 + rep.a2 + 5.0 * rep.se_diff);
  REQUIRE(rep.z < 5.0);  // strongly negative in practice
  REQUIRE(rep.mean_diff == Approx(rep.a12 - rep.a1 - rep.a2).margin(1e-12));

  // kernel branch shares the same contract
  const auto rk = subadditivity_check(FieldSpec{KernelSpec{Kernel::laplace(), 1.0}}, 3.0, 5.0,
                                      0.5, 20000, 42);
  REQUIRE(rk.z < 5.0);
  REQUIRE_THROWS_AS(subadditivity_check(kBrownian2, -1.0, 1.0, 1.0, 100, 1), ConfigError);
}

TEST_CASE("family aggregation integrates member constants with live error bars") {
  VarianceFamily fam;
  fam.vf_at = [](double z) {
    return VarianceFunction::scaled(1.0 + z, VarianceFunction::linear(1.0));
  };
  FamilyConfig cfg;
  cfg.nodes = 5;
  cfg.reps = 2000;
  cfg.dy.h = 1.0 / 128.0;
  cfg.dy.R = 10.0;
  const auto r = estimate_family_H(fam, cfg, 42);
  const double target = 1.5 * kInvSqrt2Pi;  // integral of (1+z) c/sqrt(2 pi) over [0,1]
  REQUIRE(r.estimate == Approx(target).margin(0.002));
  REQUIRE(r.nodes.size() == 5);
  REQUIRE(r.nodes[0].weight == Approx(1.0 / 12.0));
  REQUIRE(r.nodes[1].weight == Approx(4.0 / 12.0));
  for (const auto& n : r.nodes) REQUIRE_FALSE(n.degenerate);
  REQUIRE(std::isfinite(r.quad_error_estimate));
  REQUIRE(r.quad_error_estimate < 1e-6);  // the integrand is linear in z

  // degenerate members contribute zero exactly and are flagged
  VarianceFamily deg;
  deg.vf_at = [](double z) {
    return VarianceFunction::scaled(z, VarianceFunction::linear(1.0));
  };
  const auto rd = estimate_family_H(deg, cfg, 42);
  REQUIRE(rd.nodes[0].degenerate);
  REQUIRE(rd.nodes[0].estimate == 0.0);

  FamilyConfig even;
  even.nodes = 4;
  REQUIRE_THROWS_AS(estimate_family_H(fam, even, 1), ConfigError);
}

TEST_CASE("independent dense reference agrees with the production ratio path") {
  DyConfig cfg;
  cfg.delta = 0.5;
  cfg.eta = 0.5;
  cfg.R = 6.0;
  const auto vf = VarianceFunction::fbm(0.5, 2.0);
  const auto ref = oracle::dense_reference_ratio(vf, cfg, 4000, 9);
  const auto prod = estimate_H_dy(LogGaussianSpec{vf}, 1, cfg, 20000, 42);
  const double se = std::sqrt(ref.stderr_est * ref.stderr_est + prod.stderr_est * prod.stderr_est);
  REQUIRE(std::abs(ref.estimate - prod.estimate) < 5.0 * se);
}
