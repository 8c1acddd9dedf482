#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <variant>
#include <vector>

#include "pickands/errors.hpp"
#include "pickands/estimate.hpp"
#include "pickands/estimators.hpp"
#include "pickands/grid.hpp"
#include "pickands/kernels.hpp"
#include "pickands/rng.hpp"
#include "pickands/spectral.hpp"

namespace pickands {

// Stopping rule for the Poisson-mixture representation
//   Y(t) = max_i Z_i(t) / Gamma_i,   Gamma_i = E_1 + ... + E_i.
// Exact: requires an almost-sure bound B on sup_grid Z (compact-support
// kernels, bounded bernoulli processes); once B / Gamma <= current sup no
// future atom can raise the supremum, so the sampled grid supremum is exact
// and the residual bound is identically zero. Threshold: B is a pilot
// quantile of sup_grid Z; the reported residual bounds the expected number
// of future atoms that could still have altered the supremum.
enum class StoppingMode { Exact, Threshold };

struct MaxStableConfig {
  int d = 1;
  double T = 1.0;      // grid box [0, T]^d (T = 0 collapses to the origin)
  double delta = 1.0;  // grid spacing, > 0
  StoppingMode stopping = StoppingMode::Exact;
  double pilot_quantile = 0.9999;
  std::uint64_t pilot_sims = 512;
  std::uint64_t spawn_cap = 100000;  // per-simulation atom budget (honestly reported)
};

struct MaxStableEstimate {
  std::vector<double> levels;
  std::vector<double> prob;     // P(sup_grid Y <= level)
  std::vector<double> prob_se;
  double mean_sup = 0.0;
  double se_sup = 0.0;
  double bound_B = 0.0;
  double residual_bound = 0.0;  // expected future-atom interference (0 in exact mode)
  double gamma_over_n = 0.0;    // mean Gamma_stop / atom count (sanity, ~1)
  std::uint64_t capped = 0;     // simulations that hit the spawn cap
  std::uint64_t sims = 0;
  double elapsed_s = 0.0;
};

namespace detail {

// Almost-sure upper bound on sup_grid Z when one exists.
inline std::optional<double> exact_sup_bound(const FieldSpec& spec, double T, int d) {
  if (const auto* ks = std::get_if<KernelSpec>(&spec)) {
    if (!ks->L.compact_support()) return std::nullopt;
    // contributing locations: N in [t - hi, t - lo] over grid t in [0, T]
    const NormalDensity p{ks->p_sd};
    const double a = 0.0 - ks->L.support_hi();
    const double b = T - ks->L.support_lo();
    const double pmin = p.min_on(a, b);
    if (!(pmin > 0.0)) return std::nullopt;
    return ks->L.sup_value() / pmin;
  }
  if (const auto* bs = std::get_if<BernoulliSpec>(&spec)) return 1.0 / bs->p;
  (void)d;
  return std::nullopt;
}

// Per-atom supremum of Z over the grid, specialised per spectral family.
class GridSupSampler {
 public:
  GridSupSampler(const FieldSpec& spec, int d, double T, double delta)
      : spec_(std::make_shared<FieldSpec>(spec)), d_(d), T_(T), delta_(delta) {
    if (const auto* ks = std::get_if<KernelSpec>(spec_.get())) {
      kind_ = Kind::Kernel;
      L_ = &ks->L;
      p_ = NormalDensity{ks->p_sd};
      kmax_ = lattice_floor(T / delta);
      return;
    }
    if (const auto* bs = std::get_if<BernoulliSpec>(spec_.get())) {
      kind_ = Kind::Bernoulli;
      bern_p_ = bs->p;
      return;
    }
    if (const auto* lg = std::get_if<LogGaussianSpec>(spec_.get()); lg && d == 1) {
      const double c = lg->vf.linear_coeff();
      if (c > 0.0) {
        kind_ = Kind::RankOne;
        c_ = c;
        kmax_ = lattice_floor(T / delta);
        return;
      }
    }
    kind_ = Kind::Path;
    sampler_ = std::make_unique<SpectralSampler>(*spec_, enumerate_points(d, delta, T));
  }

  // thread-safe: all mutable state lives in the caller-owned buffers
  double sample_sup(RngStream& rng, std::vector<double>& z, std::vector<double>& w) const {
    switch (kind_) {
      case Kind::Kernel: {
        const double N = p_.sample(rng);
        return L_->grid_sup(N, delta_, 0, kmax_) / p_.pdf(N);
      }
      case Kind::Bernoulli:
        return rng.uniform() < bern_p_ ? 1.0 / bern_p_ : 0.0;
      case Kind::RankOne: {
        // Z(t) = exp(c xi t - c^2 t^2 / 2): quadratic exponent peaks at
        // t* = xi / c; the grid argmax is a neighbour of t*.
        const double xi = rng.normal();
        const double tstar = xi / c_;
        const long long k0 =
            std::clamp(static_cast<long long>(std::floor(tstar / delta_)), 0LL, kmax_);
        double best = 0.0;
        for (long long k = std::max(0LL, k0 - 1); k <= std::min(kmax_, k0 + 1); ++k) {
          const double t = static_cast<double>(k) * delta_;
          best = std::max(best, std::exp(c_ * xi * t - 0.5 * c_ * c_ * t * t));
        }
        return best;
      }
      case Kind::Path:
      default: {
        sampler_->sample(rng, z, w);
        double sup = 0.0;
        for (double v : z) sup = std::max(sup, v);
        return sup;
      }
    }
  }

 private:
  enum class Kind { Kernel, Bernoulli, RankOne, Path };
  std::shared_ptr<const FieldSpec> spec_;
  Kind kind_ = Kind::Path;
  int d_;
  double T_, delta_;
  const Kernel* L_ = nullptr;
  NormalDensity p_{1.0};
  double bern_p_ = 0.5;
  double c_ = 0.0;
  long long kmax_ = 0;
  std::unique_ptr<SpectralSampler> sampler_;
};

}  // namespace detail

// Distribution of the grid supremum of the associated max-stable field,
// by simulating the Poisson mixture until the stopping rule certifies the
// supremum (exact mode) or until further atoms are negligible per the
// pilot bound (threshold mode).
inline MaxStableEstimate simulate_max_stable(const FieldSpec& spec, const MaxStableConfig& cfg,
                                             std::vector<double> levels, std::uint64_t sims,
                                             std::uint64_t seed, int workers = 0) {
  validate_spec(spec, cfg.d);
  if (!(cfg.delta > 0.0)) throw ConfigError("max-stable simulation: delta must be > 0");
  if (cfg.T < 0.0) throw ConfigError("max-stable simulation: T must be >= 0");
  if (sims < 2) throw ConfigError("max-stable simulation: need at least 2 simulations");
  if (cfg.spawn_cap < 1) throw ConfigError("max-stable simulation: spawn cap must be >= 1");
  for (double x : levels)
    if (!(x > 0.0)) throw ConfigError("max-stable simulation: levels must be > 0");
  const auto t0 = std::chrono::steady_clock::now();

  const detail::GridSupSampler sup_sampler(spec, cfg.d, cfg.T, cfg.delta);

  double B = 0.0;
  std::vector<double> pilot;
  if (cfg.stopping == StoppingMode::Exact) {
    const auto bound = detail::exact_sup_bound(spec, cfg.T, cfg.d);
    if (!bound)
      throw ConfigError(
          "max-stable simulation: exact stopping requires an almost-sure bound on the "
          "spectral supremum (compact-support kernel or bernoulli); use threshold stopping");
    B = *bound;
  } else {
    if (cfg.pilot_sims < 16)
      throw ConfigError("max-stable simulation: threshold stopping needs >= 16 pilot draws");
    if (!(cfg.pilot_quantile > 0.0 && cfg.pilot_quantile < 1.0))
      throw ConfigError("max-stable simulation: pilot quantile must be in (0, 1)");
    pilot.resize(cfg.pilot_sims);
    std::vector<double> z, w;
    for (std::uint64_t r = 0; r < cfg.pilot_sims; ++r) {
      RngStream rng(seed, r, stream_tag::kMaxStablePilot);
      pilot[r] = sup_sampler.sample_sup(rng, z, w);
    }
    std::vector<double> sorted = pilot;
    std::sort(sorted.begin(), sorted.end());
    const auto idx = std::min<std::size_t>(
        sorted.size() - 1,
        static_cast<std::size_t>(std::ceil(cfg.pilot_quantile * static_cast<double>(sorted.size()))) -
            1);
    B = sorted[idx];
    if (!(B > 0.0))
      throw ConfigError(
          "max-stable simulation: pilot supremum quantile is zero; the spectral process "
          "appears degenerate on this grid");
  }

  const std::size_t nlev = levels.size();
  const std::size_t kcols = nlev + 4;
  const int nw = resolve_workers(workers);

  VectorWelford acc = mc_reduce_vec(sims, nw, kcols, [&, seed, B]() {
    return [&, seed, B, z = std::vector<double>(), w = std::vector<double>()](
               std::uint64_t r, double* out) mutable {
      RngStream rng(seed, r, stream_tag::kMaxStable);
      double gamma = 0.0;
      double sup = 0.0;
      std::uint64_t atoms = 0;
      bool capped = false;
      for (;;) {
        gamma += rng.exponential();
        if (atoms >= 1 && sup > 0.0 && B / gamma <= sup) break;
        if (atoms >= cfg.spawn_cap) {
          capped = true;
          break;
        }
        const double s = sup_sampler.sample_sup(rng, z, w);
        sup = std::max(sup, s / gamma);
        ++atoms;
      }
      for (std::size_t i = 0; i < nlev; ++i) out[i] = sup <= levels[i] ? 1.0 : 0.0;
      out[nlev] = sup;
      out[nlev + 1] = gamma / static_cast<double>(atoms);
      out[nlev + 2] = capped ? 1.0 : 0.0;
      double residual = 0.0;
      if (!pilot.empty() && sup > 0.0) {
        for (double s : pilot) residual += std::max(0.0, s / sup - gamma);
        residual /= static_cast<double>(pilot.size());
      }
      out[nlev + 3] = residual;
    };
  });

  MaxStableEstimate res;
  res.levels = std::move(levels);
  res.prob.resize(nlev);
  res.prob_se.resize(nlev);
  for (std::size_t i = 0; i < nlev; ++i) {
    res.prob[i] = acc.mean(i);
    res.prob_se[i] = acc.stderr_of_mean(i);
  }
  res.mean_sup = acc.mean(nlev);
  res.se_sup = acc.stderr_of_mean(nlev);
  res.gamma_over_n = acc.mean(nlev + 1);
  res.capped = static_cast<std::uint64_t>(std::llround(acc.mean(nlev + 2) * static_cast<double>(sims)));
  res.residual_bound = acc.mean(nlev + 3);
  res.bound_B = B;
  res.sims = sims;
  res.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

// Finite-dimensional distribution of the max-stable field via the exact
// spectral representation P(Y(t_i) <= x_i, i) = exp(-E max_i Z(t_i)/x_i),
// with a delta-method standard error.
struct FidiReport {
  double prob = 0.0;
  double prob_se = 0.0;
  double mean_stat = 0.0;  // E max_i Z(t_i)/x_i
  double se_stat = 0.0;
  std::uint64_t reps = 0;
};

inline FidiReport fidi_cdf(const FieldSpec& spec, const PointSet& pts,
                           const std::vector<double>& xs, std::uint64_t reps, std::uint64_t seed,
                           int workers = 0) {
  validate_spec(spec, pts.d);
  if (pts.size() == 0) throw ConfigError("fidi cdf: need at least one evaluation point");
  if (xs.size() != pts.size())
    throw ConfigError("fidi cdf: need exactly one level per evaluation point");
  for (double x : xs)
    if (!(x > 0.0)) throw ConfigError("fidi cdf: levels must be > 0");
  if (reps < 2) throw ConfigError("fidi cdf: need at least 2 replicas");
  const int nw = resolve_workers(workers);

  SpectralSampler sampler(spec, pts);
  Welford acc = mc_reduce(reps, nw, [&sampler, &xs, seed]() {
    return [&sampler, &xs, seed, z = std::vector<double>(), w = std::vector<double>()](
               std::uint64_t r) mutable {
      RngStream rng(seed, r, stream_tag::kFidi);
      sampler.sample(rng, z, w);
      double m = 0.0;
      for (std::size_t i = 0; i < z.size(); ++i) m = std::max(m, z[i] / xs[i]);
      return m;
    };
  });

  FidiReport rep;
  rep.mean_stat = acc.mean;
  rep.se_stat = acc.stderr_of_mean();
  rep.prob = std::exp(-acc.mean);
  rep.prob_se = rep.prob * rep.se_stat;
  rep.reps = reps;
  return rep;
}

// Two-sided comparison of the finite-grid identity
//   -ln P(sup_grid Y <= x) = E[sup_grid Z] / x,
// which is exact in distribution for every finite grid and level x > 0.
// The left side is estimated from max-stable simulations, the right side
// by direct Monte Carlo on the spectral process (independent streams).
struct IdentityReport {
  double x = 0.0;
  double prob = 0.0, prob_se = 0.0;
  double lhs = 0.0, lhs_se = 0.0;
  double rhs = 0.0, rhs_se = 0.0;
  double gap = 0.0, gap_se = 0.0, z = 0.0;
  MaxStableEstimate sim;
};

inline IdentityReport finite_grid_identity_check(const FieldSpec& spec,
                                                 const MaxStableConfig& cfg, double x,
                                                 std::uint64_t sims, std::uint64_t direct_reps,
                                                 std::uint64_t seed, int workers = 0) {
  if (!(x > 0.0)) throw ConfigError("finite-grid identity: level x must be > 0");
  IdentityReport rep;
  rep.x = x;
  rep.sim = simulate_max_stable(spec, cfg, {x}, sims, seed, workers);
  rep.prob = rep.sim.prob[0];
  rep.prob_se = rep.sim.prob_se[0];
  if (!(rep.prob > 0.0))
    throw NumericalError(
        "finite-grid identity: estimated probability is zero; raise the level x or the "
        "simulation count");
  rep.lhs = -std::log(rep.prob);
  rep.lhs_se = rep.prob_se / rep.prob;

  // direct side: E sup Z / x over the same grid, independent replicas
  const detail::GridSupSampler sup_sampler(spec, cfg.d, cfg.T, cfg.delta);
  const int nw = resolve_workers(workers);
  Welford direct = mc_reduce(direct_reps, nw, [&sup_sampler, seed]() {
    return [&sup_sampler, seed, z = std::vector<double>(), w = std::vector<double>()](
               std::uint64_t r) mutable {
      RngStream rng(seed, r, stream_tag::kDirect);
      return sup_sampler.sample_sup(rng, z, w);
    };
  });
  rep.rhs = direct.mean / x;
  rep.rhs_se = direct.stderr_of_mean() / x;
  rep.gap = rep.lhs - rep.rhs;
  rep.gap_se = std::sqrt(rep.lhs_se * rep.lhs_se + rep.rhs_se * rep.rhs_se);
  rep.z = rep.gap_se > 0.0 ? rep.gap / rep.gap_se : 0.0;
  return rep;
}

// Paired check of the shift-tilt identity
//   E[Z(h) F(Z)] = E[Z(0) F(Z(. - h))]
// for 0-homogeneous functionals F: tilting by the mean-one weight Z(h)
// recentres the field so that h plays the role of the origin, which the
// right side undoes by shifting the argument back by h. (Both sides equal
// exp(c^2 s h) for the log-gaussian field with sigma^2(t) = c^2 t^2 and
// F(f) = f(s)/f(0).)
struct TiltReport {
  double lhs = 0.0, lhs_se = 0.0;
  double rhs = 0.0, rhs_se = 0.0;
  double diff = 0.0, diff_se = 0.0, z = 0.0;
  std::uint64_t reps = 0;
};

namespace detail {

inline TiltReport tilt_from_acc(const VectorWelford& acc, std::uint64_t reps) {
  TiltReport rep;
  rep.reps = reps;
  rep.lhs = acc.mean(0);
  rep.lhs_se = acc.stderr_of_mean(0);
  rep.rhs = acc.mean(1);
  rep.rhs_se = acc.stderr_of_mean(1);
  rep.diff = acc.mean(2);
  rep.diff_se = acc.stderr_of_mean(2);
  rep.z = rep.diff_se > 0.0 ? rep.diff / rep.diff_se : 0.0;
  return rep;
}

}  // namespace detail

// F(f) = f(s) / f(0), with 0/0 -> 0: left side Z(h) * Z(s)/Z(0), right side
// Z(0) * Z(s - h)/Z(-h), both sampled from the same path, paired.
inline TiltReport tilt_identity_ratio(const FieldSpec& spec, double s, double h,
                                      std::uint64_t reps, std::uint64_t seed, int workers = 0) {
  validate_spec(spec, 1);
  if (reps < 2) throw ConfigError("tilt identity: need at least 2 replicas");
  std::vector<double> coords = {0.0, s, h, s - h, -h};
  std::sort(coords.begin(), coords.end());
  coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
  PointSet pts;
  pts.d = 1;
  pts.coords = coords;
  const auto at = [&coords](double t) {
    return static_cast<std::size_t>(
        std::lower_bound(coords.begin(), coords.end(), t) - coords.begin());
  };
  const std::size_t i0 = at(0.0), is = at(s), ih = at(h), ism = at(s - h), ihm = at(-h);

  SpectralSampler sampler(spec, std::move(pts));
  const int nw = resolve_workers(workers);
  VectorWelford acc = mc_reduce_vec(reps, nw, 3, [&, seed]() {
    return [&, seed, z = std::vector<double>(), w = std::vector<double>()](
               std::uint64_t r, double* out) mutable {
      RngStream rng(seed, r, stream_tag::kTilt);
      sampler.sample(rng, z, w);
      const double lhs = z[i0] > 0.0 ? z[ih] * z[is] / z[i0] : 0.0;
      const double rhs = z[ihm] > 0.0 ? z[i0] * z[ism] / z[ihm] : 0.0;
      out[0] = lhs;
      out[1] = rhs;
      out[2] = lhs - rhs;
    };
  });
  return detail::tilt_from_acc(acc, reps);
}

// F(f) = sup_window f / (mesh-sum of f): the ratio-estimator functional on
// the window [-R, R]. Left side pairs Z(h) with F over the base window,
// right side pairs Z(0) with F over the window shifted by -h, both read
// from one path on a common refinement mesh covering [-R - h, R].
inline TiltReport tilt_identity_supsum(const FieldSpec& spec, double mesh, double R, double h,
                                       std::uint64_t reps, std::uint64_t seed, int workers = 0) {
  validate_spec(spec, 1);
  if (!(mesh > 0.0) || !(R > 0.0)) throw ConfigError("tilt identity: mesh and R must be > 0");
  if (!(h > 0.0)) throw ConfigError("tilt identity: shift h must be > 0");
  const double mh = h / mesh;
  if (std::abs(mh - std::round(mh)) > 1e-9)
    throw ConfigError("tilt identity: shift h must be a multiple of the mesh");
  if (reps < 2) throw ConfigError("tilt identity: need at least 2 replicas");
  const auto off = static_cast<std::size_t>(std::llround(mh));
  const long long K = axis_halfcount_window(R, mesh);
  if (K < 1) throw ConfigError("tilt identity: window contains no mesh step");

  // indices 0..2K+off cover [-R - h, R]; base window starts at index off
  const auto nwin = static_cast<std::size_t>(2 * K + 1);
  const std::size_t n = nwin + off;
  PointSet pts;
  pts.d = 1;
  pts.coords.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    pts.coords[i] =
        (static_cast<double>(i) - static_cast<double>(K) - static_cast<double>(off)) * mesh;
  const std::size_t origin = static_cast<std::size_t>(K) + off;
  const std::size_t ih = origin + off;  // coordinate h (inside base window: h <= R required)
  if (ih >= n) throw ConfigError("tilt identity: shift h must not exceed the window R");

  SpectralSampler sampler(spec, std::move(pts));
  const int nw = resolve_workers(workers);
  VectorWelford acc = mc_reduce_vec(reps, nw, 3, [&, seed]() {
    return [&, seed, z = std::vector<double>(), w = std::vector<double>()](
               std::uint64_t r, double* out) mutable {
      RngStream rng(seed, r, stream_tag::kTilt);
      sampler.sample(rng, z, w);
      double sup0 = 0.0, sum0 = 0.0, supm = 0.0, summ = 0.0;
      for (std::size_t i = 0; i < nwin; ++i) {
        const double base = z[i + off];     // window [-R, R]
        const double shifted = z[i];        // window [-R - h, R - h]
        sup0 = std::max(sup0, base);
        sum0 += base;
        supm = std::max(supm, shifted);
        summ += shifted;
      }
      sum0 *= mesh;
      summ *= mesh;
      const double lhs = sum0 > 0.0 ? z[ih] * sup0 / sum0 : 0.0;
      const double rhs = summ > 0.0 ? z[origin] * supm / summ : 0.0;
      out[0] = lhs;
      out[1] = rhs;
      out[2] = lhs - rhs;
    };
  });
  return detail::tilt_from_acc(acc, reps);
}

}  // namespace pickands
