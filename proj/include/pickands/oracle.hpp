#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "pickands/errors.hpp"
#include "pickands/estimate.hpp"
#include "pickands/estimators.hpp"
#include "pickands/gaussian.hpp"
#include "pickands/grid.hpp"
#include "pickands/kernels.hpp"
#include "pickands/rng.hpp"
#include "pickands/variance.hpp"

// Closed-form reference values and an independent brute-force estimator,
// used to validate the production estimators.
namespace pickands::oracle {

// Continuum constant of the log-gaussian field with sigma^2(t) = c^2 t^2:
// the fluctuation representation integrates to c / sqrt(2 pi).
inline double hurst_linear_continuum(double c) {
  if (!(c > 0.0)) throw ConfigError("oracle: c must be > 0");
  return c * kInvSqrt2Pi;
}

// Lattice constant of the same field on the delta-lattice: the argmax
// identity delta * H_delta = P(argmax over the lattice sits at the origin)
// evaluates in closed form to (2 Phi(c delta / 2) - 1) / delta.
inline double hurst_linear_lattice(double c, double delta) {
  if (!(c > 0.0)) throw ConfigError("oracle: c must be > 0");
  if (!(delta > 0.0)) throw ConfigError("oracle: delta must be > 0");
  return (2.0 * normal_cdf(c * delta / 2.0) - 1.0) / delta;
}

// Lattice constant of the log-gaussian field with sigma^2(t) = s |t|
// (two-sided random-walk argmax): delta * H_delta = P+^2 where
// ln P+ = -sum_{n>=1} Phi_bar(sqrt(s n delta) / 2) / n (a Spitzer-type
// series; each side of the walk stays negative independently).
inline double hurst_brownian_lattice(double scale, double delta) {
  if (!(scale > 0.0)) throw ConfigError("oracle: scale must be > 0");
  if (!(delta > 0.0)) throw ConfigError("oracle: delta must be > 0");
  double log_p = 0.0;
  for (std::uint64_t n = 1; n <= 10'000'000; ++n) {
    const double term = normal_sf(std::sqrt(scale * static_cast<double>(n) * delta) / 2.0) /
                        static_cast<double>(n);
    log_p -= term;
    if (term < 1e-18) break;
  }
  const double p_plus = std::exp(log_p);
  return p_plus * p_plus / delta;
}

// Lebesgue measure of { z : sup over grid t of L(t - z) > 0 } for a
// compact-support kernel: the union of the grid-shifted support intervals,
// by interval merging. This is T * (kernel constant) for indicator-type
// kernels whose sup is 1 on the covered set.
inline double coverage_measure(const Kernel& L, double delta, double T) {
  if (!L.compact_support()) throw ConfigError("oracle: coverage needs a compact-support kernel");
  if (!(delta > 0.0)) throw ConfigError("oracle: delta must be > 0");
  if (T < 0.0) throw ConfigError("oracle: T must be >= 0");
  const long long K = detail::lattice_floor(T / delta);
  std::vector<std::pair<double, double>> iv;
  iv.reserve(static_cast<std::size_t>(K + 1));
  for (long long k = 0; k <= K; ++k) {
    const double t = static_cast<double>(k) * delta;
    iv.emplace_back(t - L.support_hi(), t - L.support_lo());
  }
  std::sort(iv.begin(), iv.end());
  double measure = 0.0;
  double lo = iv.front().first, hi = iv.front().second;
  for (std::size_t i = 1; i < iv.size(); ++i) {
    if (iv[i].first <= hi) {
      hi = std::max(hi, iv[i].second);
    } else {
      measure += hi - lo;
      lo = iv[i].first;
      hi = iv[i].second;
    }
  }
  measure += hi - lo;
  return measure;
}

// Brute-force single-threaded ratio estimator for log-gaussian fields:
// dense covariance Cholesky sampling and naive loops, sharing no code with
// the production path (used to cross-validate the fast samplers).
inline EstimateResult dense_reference_ratio(const VarianceFunction& vf, const DyConfig& cfg,
                                            std::uint64_t reps, std::uint64_t seed) {
  if (!(cfg.R > 0.0) || !(cfg.h > 0.0)) throw ConfigError("oracle: R and h must be > 0");
  const double s = cfg.delta > 0.0 ? cfg.delta : cfg.h;
  const long long K = detail::lattice_floor(cfg.R / s);
  if (K < 1) throw ConfigError("oracle: window contains no mesh step");
  const auto n = static_cast<std::size_t>(2 * K + 1);
  PointSet pts;
  pts.d = 1;
  pts.coords.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    pts.coords[i] = (static_cast<double>(i) - static_cast<double>(K)) * s;

  CholeskySampler chol(pts, [&vf](const double* a, const double* b, int) {
    return covariance1(vf, a[0], b[0]);
  });
  std::vector<double> half_var(n);
  for (std::size_t i = 0; i < n; ++i) half_var[i] = 0.5 * vf(&pts.coords[i], 1);

  long long m_eta = 0;
  if (cfg.eta > 0.0) m_eta = std::llround(cfg.eta / s);
  const long long Ke = cfg.eta > 0.0 ? detail::lattice_floor(cfg.R / cfg.eta) : 0;

  Welford acc;
  std::vector<double> w(n), z(n);
  for (std::uint64_t r = 0; r < reps; ++r) {
    RngStream rng(seed, r, stream_tag::kReference);
    chol.sample(rng, w);
    for (std::size_t i = 0; i < n; ++i) z[i] = std::exp(w[i] - half_var[i]);
    const double z0 = z[static_cast<std::size_t>(K)];
    double sup = 0.0;
    for (double v : z) sup = std::max(sup, v);
    double sum = 0.0;
    if (cfg.eta > 0.0) {
      for (long long k = -Ke; k <= Ke; ++k)
        sum += z[static_cast<std::size_t>(k * m_eta + K)];
      sum *= cfg.eta;
    } else {
      for (long long k = -K; k < K; ++k) sum += z[static_cast<std::size_t>(k + K)];
      sum *= s;
    }
    acc.add(sum > 0.0 ? z0 * sup / sum : 0.0);
  }

  EstimateResult res;
  res.estimate = acc.mean;
  res.stderr_est = acc.stderr_of_mean();
  res.reps = reps;
  return res;
}

}  // namespace pickands::oracle
