#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "pickands/errors.hpp"
#include "pickands/estimate.hpp"
#include "pickands/grid.hpp"
#include "pickands/kernels.hpp"
#include "pickands/rng.hpp"
#include "pickands/spectral.hpp"
#include "pickands/variance.hpp"

namespace pickands {

// Configuration of the ratio (Dieker-Yakir type) estimator
//   H_delta = E[ Z(0) * sup_{delta-lattice window} Z / S_eta(Z) ],
// where S_eta is the eta-lattice Riemann sum over the window [-R, R]^d
// (eta > 0) or the left-endpoint Riemann integral proxy on the simulation
// mesh h (eta = 0). delta = 0 means the continuum supremum, approximated on
// the mesh h for path-sampled specs and evaluated exactly for kernel specs.
//
// Valid regimes: delta = eta > 0; delta = 0 with eta >= 0; delta > 0 with
// eta a positive integer multiple of delta. delta > 0 with eta = 0 is
// rejected.
struct DyConfig {
  double delta = 0.0;
  double eta = 0.0;
  double R = 10.0;
  double h = 0.01;
};

// Window-doubling diagnostics: means of the same ratio restricted to
// windows R/4 and R/2 (the divergence detector compares them to the full
// estimate).
struct DyDiagnostics {
  double mean_quarter = 0.0;
  double mean_half = 0.0;
};

namespace detail {

inline bool near_integer(double x, double tol = 1e-9) {
  return std::abs(x - std::round(x)) <= tol * std::max(1.0, std::abs(x));
}

inline void validate_dy_config(const FieldSpec& spec, int d, const DyConfig& cfg) {
  validate_spec(spec, d);
  if (!(cfg.R > 0.0)) throw ConfigError("ratio estimator: window R must be > 0");
  if (!(cfg.h > 0.0)) throw ConfigError("ratio estimator: mesh h must be > 0");
  if (cfg.delta < 0.0 || cfg.eta < 0.0)
    throw ConfigError("ratio estimator: delta and eta must be >= 0");
  if (cfg.delta > 0.0) {
    if (cfg.eta == 0.0)
      throw ConfigError(
          "ratio estimator: eta = 0 (integral denominator) requires delta = 0");
    const double m = cfg.eta / cfg.delta;
    if (m < 1.0 - 1e-9 || !near_integer(m))
      throw ConfigError(
          "ratio estimator: eta must be a positive integer multiple of delta");
  } else if (cfg.eta > 0.0 && !std::holds_alternative<KernelSpec>(spec)) {
    const double m = cfg.eta / cfg.h;
    if (m < 1.0 - 1e-9 || !near_integer(m))
      throw ConfigError("ratio estimator: eta must sit on the simulation mesh h");
  }
  if (std::holds_alternative<BernoulliSpec>(spec) &&
      !(cfg.delta > 0.0 && cfg.delta == cfg.eta))
    throw ConfigError(
        "ratio estimator: bernoulli spectral processes satisfy P(Z(0) > 0) < 1; "
        "only the delta = eta > 0 regime is valid");
}

// Precomputed index geometry for ratio evaluation over the symmetric
// window mesh. sup levels: 2 = inside [-R/4, R/4]^d, 1 = inside
// [-R/2, R/2]^d, 0 = remainder. Sum entries carry the same level tagging.
struct RatioGeometry {
  PointSet pts;
  std::size_t origin = 0;
  std::vector<std::uint8_t> sup_level;
  std::vector<std::uint32_t> sum_idx;
  std::vector<std::uint8_t> sum_level;
  double sum_factor = 1.0;
  long long K = 0;
  double spacing = 0.0;
};

inline RatioGeometry build_ratio_geometry(int d, double s, double R, double eta) {
  RatioGeometry g;
  g.spacing = s;
  g.K = axis_halfcount_window(R, s);
  if (g.K < 1)
    throw ConfigError("ratio estimator: window [-R, R] contains no mesh step (R < spacing)");
  g.pts = window_points(d, s, R);
  const std::size_t n = g.pts.size();
  const long long K = g.K;
  const long long K2 = axis_halfcount_window(R / 2.0, s);
  const long long K4 = axis_halfcount_window(R / 4.0, s);
  const long long naxis = 2 * K + 1;

  // eta > 0: lattice-sum entries are mesh indices that are multiples of
  // m_eta within the checkpoint window; eta = 0: left-endpoint Riemann
  // cells (top index per axis excluded).
  long long m_eta = 0;
  long long Ke = 0, Ke2 = 0, Ke4 = 0;
  if (eta > 0.0) {
    m_eta = std::llround(eta / s);
    Ke = axis_halfcount_window(R, eta);
    Ke2 = axis_halfcount_window(R / 2.0, eta);
    Ke4 = axis_halfcount_window(R / 4.0, eta);
    g.sum_factor = std::pow(eta, d);
  } else {
    g.sum_factor = std::pow(s, d);
  }

  g.sup_level.resize(n);
  std::vector<long long> axis(static_cast<std::size_t>(d));
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t rem = i;
    long long amax = 0;
    bool on_eta = (m_eta > 0);
    bool riemann_full = true, riemann_half = true, riemann_quarter = true;
    long long eta_amax = 0;
    for (int k = d - 1; k >= 0; --k) {
      const long long digit = static_cast<long long>(rem % static_cast<std::size_t>(naxis));
      rem /= static_cast<std::size_t>(naxis);
      const long long a = digit - K;
      axis[static_cast<std::size_t>(k)] = a;
      amax = std::max(amax, std::llabs(a));
      if (m_eta > 0) {
        if (a % m_eta != 0)
          on_eta = false;
        else
          eta_amax = std::max(eta_amax, std::llabs(a / m_eta));
      } else {
        if (a >= K) riemann_full = false;
        if (a < -K2 || a >= K2) riemann_half = false;
        if (a < -K4 || a >= K4) riemann_quarter = false;
      }
    }
    g.sup_level[i] = amax <= K4 ? 2 : (amax <= K2 ? 1 : 0);
    if (m_eta > 0) {
      if (on_eta && eta_amax <= Ke) {
        g.sum_idx.push_back(static_cast<std::uint32_t>(i));
        g.sum_level.push_back(eta_amax <= Ke4 ? 2 : (eta_amax <= Ke2 ? 1 : 0));
      }
    } else {
      if (riemann_full) {
        g.sum_idx.push_back(static_cast<std::uint32_t>(i));
        g.sum_level.push_back(riemann_quarter ? std::uint8_t{2}
                                              : (riemann_half ? std::uint8_t{1} : std::uint8_t{0}));
      }
    }
  }
  // origin: all axis digits equal K
  std::size_t origin = 0;
  for (int k = 0; k < d; ++k)
    origin = origin * static_cast<std::size_t>(naxis) + static_cast<std::size_t>(K);
  g.origin = origin;
  return g;
}

// Ratios at the three checkpoint windows from one sampled path.
// out[0] = quarter window, out[1] = half, out[2] = full; 0/0 -> 0.
inline void ratio_from_path(const RatioGeometry& g, const std::vector<double>& z,
                            double* out) {
  const double z0 = z[g.origin];
  double s4 = 0.0, s2 = 0.0, s1 = 0.0;
  const std::size_t n = z.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double v = z[i];
    const std::uint8_t lvl = g.sup_level[i];
    if (v > s1) s1 = v;
    if (lvl >= 1 && v > s2) s2 = v;
    if (lvl == 2 && v > s4) s4 = v;
  }
  double q4 = 0.0, q2 = 0.0, q1 = 0.0;
  const std::size_t m = g.sum_idx.size();
  for (std::size_t j = 0; j < m; ++j) {
    const double v = z[g.sum_idx[j]];
    const std::uint8_t lvl = g.sum_level[j];
    q1 += v;
    if (lvl >= 1) q2 += v;
    if (lvl == 2) q4 += v;
  }
  q1 *= g.sum_factor;
  q2 *= g.sum_factor;
  q4 *= g.sum_factor;
  out[0] = q4 > 0.0 ? z0 * s4 / q4 : 0.0;
  out[1] = q2 > 0.0 ? z0 * s2 / q2 : 0.0;
  out[2] = q1 > 0.0 ? z0 * s1 / q1 : 0.0;
}

// Kernel-spec ratio, evaluated analytically (no discretisation): the
// density p cancels everywhere except through Z(0) = L(-N)/p(N).
struct KernelRatioOps {
  const Kernel* L;
  NormalDensity p;
  double delta, eta, h, R;

  double sup_at(double N, double Rc) const {
    return delta > 0.0 ? L->grid_sup_window(N, delta, Rc) : L->window_sup(N, Rc);
  }
  double sum_at(double N, double Rc) const {
    return eta > 0.0 ? eta * L->lattice_sum(N, eta, Rc) : L->window_integral(N, Rc);
  }
  void ratio(double N, double* out) const {
    const double num = L->value(-N);
    const double dens = p.pdf(N);
    const double Rs[3] = {R / 4.0, R / 2.0, R};
    for (int c = 0; c < 3; ++c) {
      const double s = sup_at(N, Rs[c]);
      const double q = sum_at(N, Rs[c]);
      out[c] = q > 0.0 ? num * s / (dens * q) : 0.0;
    }
  }
};

// Shifted-denominator probe for kernel specs with eta > 0: if some shift r
// in the quotient cell [0, eta) gives a vanishing lattice sum while the
// (lattice or continuum) supremum stays positive, no amount of averaging
// can recover the lattice mass and the ratio mean diverges with R.
inline std::vector<double> probe_shifts(const DyConfig& cfg) {
  std::vector<double> shifts;
  if (cfg.eta <= 0.0) return shifts;
  const double step = cfg.delta > 0.0 ? cfg.delta : cfg.h;
  for (double r = 0.0; r < cfg.eta - 1e-12; r += step) shifts.push_back(r);
  return shifts;
}

inline constexpr std::uint64_t kProbeReplicas = 512;

}  // namespace detail

// Ratio estimator of the lattice constant H_delta (or its continuum proxy
// at delta = 0). Throws DivergenceSuspectedError when either divergence
// detector fires: the window-doubling check (running means grow > 10% at
// both doublings R/4 -> R/2 -> R) or, for kernel specs with eta > 0, the
// shifted-denominator probe on the first replicas.
inline EstimateResult estimate_H_dy(const FieldSpec& spec, int d, const DyConfig& cfg,
                                    std::uint64_t reps, std::uint64_t seed, int workers = 0,
                                    DyDiagnostics* diag = nullptr) {
  detail::validate_dy_config(spec, d, cfg);
  if (reps < 2) throw ConfigError("ratio estimator: need at least 2 replicas");
  const int nw = resolve_workers(workers);
  const auto t0 = std::chrono::steady_clock::now();

  VectorWelford acc(3);
  auto probe_hit = std::make_shared<std::atomic<long long>>(-1);

  if (const auto* ks = std::get_if<KernelSpec>(&spec)) {
    detail::KernelRatioOps ops{&ks->L, NormalDensity{ks->p_sd},
                               cfg.delta, cfg.eta, cfg.h, cfg.R};
    const auto shifts = detail::probe_shifts(cfg);
    acc = mc_reduce_vec(reps, nw, 3, [&ops, &shifts, seed, probe_hit]() {
      return [&ops, &shifts, seed, probe_hit](std::uint64_t r, double* out) {
        RngStream rng(seed, r, stream_tag::kRatio);
        const double N = ops.p.sample(rng);
        ops.ratio(N, out);
        if (r < detail::kProbeReplicas) {
          for (std::size_t j = 0; j < shifts.size(); ++j) {
            const double sup = ops.sup_at(N + shifts[j], ops.R);
            if (sup > 0.0 && ops.sum_at(N + shifts[j], ops.R) == 0.0) {
              long long expected = -1;
              probe_hit->compare_exchange_strong(expected, static_cast<long long>(j));
            }
          }
        }
      };
    });
    if (probe_hit->load() >= 0) {
      std::ostringstream os;
      os << "ratio estimator: lattice denominator vanishes for the shifted copy r = "
         << shifts[static_cast<std::size_t>(probe_hit->load())]
         << " while the supremum is positive; the eta-lattice misses kernel mass "
            "and the estimate diverges with R";
      throw DivergenceSuspectedError(os.str());
    }
  } else {
    const double s = cfg.delta > 0.0 ? cfg.delta : cfg.h;
    const auto geo = detail::build_ratio_geometry(d, s, cfg.R, cfg.eta);
    SpectralSampler sampler(spec, geo.pts);
    acc = mc_reduce_vec(reps, nw, 3, [&geo, &sampler, seed]() {
      return [&geo, &sampler, seed, z = std::vector<double>(), w = std::vector<double>()](
                 std::uint64_t r, double* out) mutable {
        RngStream rng(seed, r, stream_tag::kRatio);
        sampler.sample(rng, z, w);
        detail::ratio_from_path(geo, z, out);
      };
    });
  }

  const double m4 = acc.mean(0), m2 = acc.mean(1), m1 = acc.mean(2);
  if (diag) *diag = {m4, m2};
  if (m2 > 1.1 * m4 && m1 > 1.1 * m2) {
    std::ostringstream os;
    os << "ratio estimator: running estimate grows more than 10% per window doubling ("
       << m4 << " -> " << m2 << " -> " << m1 << " at R/4, R/2, R); no finite limit is "
       << "indicated";
    throw DivergenceSuspectedError(os.str());
  }

  EstimateResult res;
  res.estimate = m1;
  res.stderr_est = acc.stderr_of_mean(2);
  res.reps = reps;
  res.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

// Direct estimator: T^{-d} E sup over the delta-lattice box [0, T]^d.
inline EstimateResult estimate_H_direct(const FieldSpec& spec, int d, double T, double delta,
                                        std::uint64_t reps, std::uint64_t seed,
                                        int workers = 0) {
  validate_spec(spec, d);
  if (!(delta > 0.0)) throw ConfigError("direct estimator: delta must be > 0");
  if (!(T > 0.0)) throw ConfigError("direct estimator: T must be > 0");
  if (reps < 2) throw ConfigError("direct estimator: need at least 2 replicas");
  const int nw = resolve_workers(workers);
  const auto t0 = std::chrono::steady_clock::now();
  const double inv_vol = 1.0 / std::pow(T, d);

  Welford acc;
  if (const auto* ks = std::get_if<KernelSpec>(&spec)) {
    const Kernel* L = &ks->L;
    const NormalDensity p{ks->p_sd};
    const long long kmax = detail::lattice_floor(T / delta);
    acc = mc_reduce(reps, nw, [L, p, delta, kmax, inv_vol, seed]() {
      return [L, p, delta, kmax, inv_vol, seed](std::uint64_t r) {
        RngStream rng(seed, r, stream_tag::kDirect);
        const double N = p.sample(rng);
        return L->grid_sup(N, delta, 0, kmax) / p.pdf(N) * inv_vol;
      };
    });
  } else {
    PointSet pts = enumerate_points(d, delta, T);
    SpectralSampler sampler(spec, std::move(pts));
    acc = mc_reduce(reps, nw, [&sampler, inv_vol, seed]() {
      return [&sampler, inv_vol, seed, z = std::vector<double>(),
              w = std::vector<double>()](std::uint64_t r) mutable {
        RngStream rng(seed, r, stream_tag::kDirect);
        sampler.sample(rng, z, w);
        double sup = 0.0;
        for (double v : z) sup = std::max(sup, v);
        return sup * inv_vol;
      };
    });
  }

  EstimateResult res;
  res.estimate = acc.mean;
  res.stderr_est = acc.stderr_of_mean();
  res.reps = reps;
  res.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

// One row of a continuity sweep.
struct SweepRow {
  double delta = 0.0;
  double estimate = 0.0;
  double stderr_est = 0.0;
};

// Sweep of the lattice constant over decreasing delta with common random
// numbers: every row is evaluated on the same sampled path per replica, so
// row monotonicity holds pathwise exactly (nested lattices) and realized
// gap comparisons are meaningful at far smaller rep counts than independent
// runs would need.
struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<double> gaps;         // rows[i+1].estimate - rows[i].estimate
  std::vector<double> gap_stderr;   // CRN-aware paired standard errors
  bool gaps_nonincreasing = false;
  std::uint64_t monotonicity_violations = 0;
  double order_estimate = 0.0;      // local convergence order from last two gaps
  double limit_estimate = 0.0;      // Aitken extrapolation of the delta -> 0 limit
  double limit_stderr = 0.0;
  std::uint64_t reps = 0;
  double elapsed_s = 0.0;
};

enum class SweepEstimator { Direct, Ratio };

namespace detail {

// Aitken delta-squared extrapolation from the last three row means, with a
// delta-method standard error using the CRN joint covariance.
inline void aitken_limit(const VectorWelford& acc, std::size_t k, SweepResult& out) {
  const std::size_t last = k - 1;
  out.limit_estimate = acc.mean(last);
  out.limit_stderr = acc.stderr_of_mean(last);
  out.order_estimate = std::numeric_limits<double>::quiet_NaN();
  if (k < 3) return;
  const double a = acc.mean(k - 3), b = acc.mean(k - 2), c = acc.mean(k - 1);
  const double g1 = b - a, g2 = c - b;
  if (!(g1 > 0.0) || !(g2 > 0.0) || !(g2 < g1)) return;  // not in the contraction regime
  const double r = g2 / g1;
  out.order_estimate = -std::log2(r);
  const double D = g1 - g2;
  out.limit_estimate = c + g2 * g2 / D;
  // gradient of c + g2^2 / D wrt (a, b, c)
  const double da = g2 * g2 / (D * D);
  const double db = -2.0 * g2 * g1 / (D * D);
  const double dc = 1.0 + (2.0 * g2 * D + g2 * g2) / (D * D);
  const double grad[3] = {da, db, dc};
  double var = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      var += grad[i] * grad[j] * acc.mean_cov(k - 3 + static_cast<std::size_t>(i),
                                              k - 3 + static_cast<std::size_t>(j));
  out.limit_stderr = std::sqrt(std::max(0.0, var));
}

}  // namespace detail

inline SweepResult continuity_sweep(const FieldSpec& spec, int d, std::vector<double> deltas,
                                    SweepEstimator how, double T, const DyConfig& base,
                                    std::uint64_t reps, std::uint64_t seed, int workers = 0) {
  validate_spec(spec, d);
  if (deltas.size() < 2) throw ConfigError("continuity sweep: need at least 2 deltas");
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (!(deltas[i] > 0.0)) throw ConfigError("continuity sweep: deltas must be > 0");
    if (i > 0 && !(deltas[i] < deltas[i - 1]))
      throw ConfigError("continuity sweep: deltas must be strictly decreasing");
  }
  if (reps < 2) throw ConfigError("continuity sweep: need at least 2 replicas");
  const double fine = deltas.back();
  for (double dl : deltas)
    if (!detail::near_integer(dl / fine))
      throw ConfigError("continuity sweep: every delta must be a multiple of the finest delta");
  const int nw = resolve_workers(workers);
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t k = deltas.size();
  auto violations = std::make_shared<std::atomic<std::uint64_t>>(0);

  VectorWelford acc(k);
  const bool kernel_path = std::holds_alternative<KernelSpec>(spec);

  if (how == SweepEstimator::Ratio) {
    if (!(base.eta > 0.0))
      throw ConfigError("continuity sweep (ratio): eta must be > 0");
    for (double dl : deltas) {
      DyConfig row = base;
      row.delta = dl;
      detail::validate_dy_config(spec, d, row);
    }
    if (kernel_path) {
      const auto* ks = std::get_if<KernelSpec>(&spec);
      detail::KernelRatioOps ops{&ks->L, NormalDensity{ks->p_sd}, 0.0, base.eta, base.h, base.R};
      acc = mc_reduce_vec(reps, nw, k, [&, seed]() {
        return [&, seed](std::uint64_t r, double* out) {
          RngStream rng(seed, r, stream_tag::kSweep);
          const double N = ops.p.sample(rng);
          const double num = ops.L->value(-N);
          const double dens = ops.p.pdf(N);
          const double q = ops.sum_at(N, base.R);
          for (std::size_t i = 0; i < k; ++i) {
            const double s = ops.L->grid_sup_window(N, deltas[i], base.R);
            out[i] = q > 0.0 ? num * s / (dens * q) : 0.0;
          }
          for (std::size_t i = 0; i + 1 < k; ++i)
            if (out[i + 1] < out[i]) violations->fetch_add(1);
        };
      });
    } else {
      const auto geo = detail::build_ratio_geometry(d, fine, base.R, base.eta);
      // per-delta index strides on the fine mesh
      std::vector<std::vector<std::uint32_t>> sup_sets(k);
      const long long K = geo.K;
      const long long naxis = 2 * K + 1;
      for (std::size_t i = 0; i < k; ++i) {
        const long long m = std::llround(deltas[i] / fine);
        for (std::size_t p = 0; p < geo.pts.size(); ++p) {
          std::size_t rem = p;
          bool on = true;
          for (int ax = 0; ax < d; ++ax) {
            const long long a =
                static_cast<long long>(rem % static_cast<std::size_t>(naxis)) - K;
            rem /= static_cast<std::size_t>(naxis);
            if (a % m != 0) {
              on = false;
              break;
            }
          }
          if (on) sup_sets[i].push_back(static_cast<std::uint32_t>(p));
        }
      }
      SpectralSampler sampler(spec, geo.pts);
      acc = mc_reduce_vec(reps, nw, k, [&, seed]() {
        return [&, seed, z = std::vector<double>(), w = std::vector<double>()](
                   std::uint64_t r, double* out) mutable {
          RngStream rng(seed, r, stream_tag::kSweep);
          sampler.sample(rng, z, w);
          const double z0 = z[geo.origin];
          double q = 0.0;
          for (std::uint32_t idx : geo.sum_idx) q += z[idx];
          q *= geo.sum_factor;
          for (std::size_t i = 0; i < k; ++i) {
            double s = 0.0;
            for (std::uint32_t idx : sup_sets[i]) s = std::max(s, z[idx]);
            out[i] = q > 0.0 ? z0 * s / q : 0.0;
          }
          for (std::size_t i = 0; i + 1 < k; ++i)
            if (out[i + 1] < out[i]) violations->fetch_add(1);
        };
      });
    }
  } else {
    if (!(T > 0.0)) throw ConfigError("continuity sweep (direct): T must be > 0");
    const double inv_vol = 1.0 / std::pow(T, d);
    if (kernel_path) {
      const auto* ks = std::get_if<KernelSpec>(&spec);
      const Kernel* L = &ks->L;
      const NormalDensity p{ks->p_sd};
      acc = mc_reduce_vec(reps, nw, k, [&, seed]() {
        return [&, seed](std::uint64_t r, double* out) {
          RngStream rng(seed, r, stream_tag::kSweep);
          const double N = p.sample(rng);
          const double dens = p.pdf(N);
          for (std::size_t i = 0; i < k; ++i) {
            const long long kmax = detail::lattice_floor(T / deltas[i]);
            out[i] = L->grid_sup(N, deltas[i], 0, kmax) / dens * inv_vol;
          }
          for (std::size_t i = 0; i + 1 < k; ++i)
            if (out[i + 1] < out[i]) violations->fetch_add(1);
        };
      });
    } else {
      PointSet pts = enumerate_points(d, fine, T);
      const long long naxis = axis_count_box(T, fine);
      std::vector<std::vector<std::uint32_t>> sup_sets(k);
      for (std::size_t i = 0; i < k; ++i) {
        const long long m = std::llround(deltas[i] / fine);
        for (std::size_t p = 0; p < pts.size(); ++p) {
          std::size_t rem = p;
          bool on = true;
          for (int ax = 0; ax < d; ++ax) {
            const long long a = static_cast<long long>(rem % static_cast<std::size_t>(naxis));
            rem /= static_cast<std::size_t>(naxis);
            if (a % m != 0) {
              on = false;
              break;
            }
          }
          if (on) sup_sets[i].push_back(static_cast<std::uint32_t>(p));
        }
      }
      SpectralSampler sampler(spec, std::move(pts));
      acc = mc_reduce_vec(reps, nw, k, [&, seed]() {
        return [&, seed, z = std::vector<double>(), w = std::vector<double>()](
                   std::uint64_t r, double* out) mutable {
          RngStream rng(seed, r, stream_tag::kSweep);
          sampler.sample(rng, z, w);
          for (std::size_t i = 0; i < k; ++i) {
            double s = 0.0;
            for (std::uint32_t idx : sup_sets[i]) s = std::max(s, z[idx]);
            out[i] = s * inv_vol;
          }
          for (std::size_t i = 0; i + 1 < k; ++i)
            if (out[i + 1] < out[i]) violations->fetch_add(1);
        };
      });
    }
  }

  SweepResult res;
  res.reps = reps;
  res.rows.resize(k);
  for (std::size_t i = 0; i < k; ++i)
    res.rows[i] = {deltas[i], acc.mean(i), acc.stderr_of_mean(i)};
  res.gaps.resize(k - 1);
  res.gap_stderr.resize(k - 1);
  for (std::size_t i = 0; i + 1 < k; ++i) {
    res.gaps[i] = acc.mean(i + 1) - acc.mean(i);
    const double v = acc.mean_cov(i, i) + acc.mean_cov(i + 1, i + 1) - 2.0 * acc.mean_cov(i + 1, i);
    res.gap_stderr[i] = std::sqrt(std::max(0.0, v));
  }
  res.gaps_nonincreasing = true;
  for (std::size_t i = 0; i + 1 < res.gaps.size(); ++i)
    if (res.gaps[i + 1] > res.gaps[i]) res.gaps_nonincreasing = false;
  res.monotonicity_violations = violations->load();
  detail::aitken_limit(acc, k, res);
  res.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

// Paired test of a(T1 + T2) <= a(T1) + a(T2) for a(T) = E sup over the
// delta-lattice box [0, T]; all three sups share the replica's path.
struct SubadditivityReport {
  double a1 = 0.0, a2 = 0.0, a12 = 0.0;
  double se1 = 0.0, se2 = 0.0, se12 = 0.0;
  double mean_diff = 0.0;  // a12 - a1 - a2, paired
  double se_diff = 0.0;
  double z = 0.0;
  std::uint64_t reps = 0;
};

inline SubadditivityReport subadditivity_check(const FieldSpec& spec, double T1, double T2,
                                               double delta, std::uint64_t reps,
                                               std::uint64_t seed, int workers = 0) {
  validate_spec(spec, 1);
  if (!(T1 > 0.0) || !(T2 > 0.0)) throw ConfigError("subadditivity check: T1, T2 must be > 0");
  if (!(delta > 0.0)) throw ConfigError("subadditivity check: delta must be > 0");
  if (reps < 2) throw ConfigError("subadditivity check: need at least 2 replicas");
  const int nw = resolve_workers(workers);

  const long long K1 = detail::lattice_floor(T1 / delta);
  const long long K2 = detail::lattice_floor(T2 / delta);
  const long long K12 = detail::lattice_floor((T1 + T2) / delta);

  VectorWelford acc(4);
  if (const auto* ks = std::get_if<KernelSpec>(&spec)) {
    const Kernel* L = &ks->L;
    const NormalDensity p{ks->p_sd};
    acc = mc_reduce_vec(reps, nw, 4, [&, seed]() {
      return [&, seed](std::uint64_t r, double* out) {
        RngStream rng(seed, r, stream_tag::kSubadditivity);
        const double N = p.sample(rng);
        const double dens = p.pdf(N);
        out[0] = L->grid_sup(N, delta, 0, K1) / dens;
        out[1] = L->grid_sup(N, delta, 0, K2) / dens;
        out[2] = L->grid_sup(N, delta, 0, K12) / dens;
        out[3] = out[2] - out[0] - out[1];
      };
    });
  } else {
    PointSet pts = enumerate_points(1, delta, T1 + T2);
    SpectralSampler sampler(spec, std::move(pts));
    acc = mc_reduce_vec(reps, nw, 4, [&, seed]() {
      return [&, seed, z = std::vector<double>(), w = std::vector<double>()](
                 std::uint64_t r, double* out) mutable {
        RngStream rng(seed, r, stream_tag::kSubadditivity);
        sampler.sample(rng, z, w);
        double s1 = 0.0, s2 = 0.0, s12 = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) {
          const double v = z[i];
          const auto idx = static_cast<long long>(i);
          if (idx <= K1 && v > s1) s1 = v;
          if (idx <= K2 && v > s2) s2 = v;
          if (v > s12) s12 = v;
        }
        out[0] = s1;
        out[1] = s2;
        out[2] = s12;
        out[3] = s12 - s1 - s2;
      };
    });
  }

  SubadditivityReport rep;
  rep.reps = reps;
  rep.a1 = acc.mean(0);
  rep.a2 = acc.mean(1);
  rep.a12 = acc.mean(2);
  rep.se1 = acc.stderr_of_mean(0);
  rep.se2 = acc.stderr_of_mean(1);
  rep.se12 = acc.stderr_of_mean(2);
  rep.mean_diff = acc.mean(3);
  rep.se_diff = acc.stderr_of_mean(3);
  rep.z = rep.se_diff > 0.0 ? rep.mean_diff / rep.se_diff : 0.0;
  return rep;
}

// A one-parameter family of variance functions z in [0, 1] |-> sigma_z^2.
struct VarianceFamily {
  std::function<VarianceFunction(double)> vf_at;
};

struct FamilyConfig {
  int d = 1;
  int nodes = 9;  // odd Simpson node count on [0, 1]
  DyConfig dy;
  std::uint64_t reps = 10000;
};

struct FamilyNodeReport {
  double z = 0.0;
  double weight = 0.0;
  double estimate = 0.0;
  double stderr_est = 0.0;
  double positivity_margin = 0.0;  // min over probes of sigma^2(t)/ln|t| - 8d (reported only)
  bool degenerate = false;
};

struct FamilyResult {
  double estimate = 0.0;
  double stderr_est = 0.0;
  double quad_error_estimate = 0.0;  // Simpson refinement comparison (NaN when unavailable)
  std::vector<FamilyNodeReport> nodes;
  std::uint64_t reps = 0;
  double elapsed_s = 0.0;
};

namespace detail {

// Structural checks on the family at a node: continuity in z (finite
// difference, documented tolerance) and growth exponents within (0, 2]
// (enforced by construction, re-asserted here).
inline void check_family_node(const VarianceFamily& fam, double z, int d) {
  const VarianceFunction vz = fam.vf_at(z);
  const Growth g = vz.growth();
  if (!(g.nu0 > 0.0) || !(g.nu0 <= 2.0) || !(g.nu_inf > 0.0) || !(g.nu_inf <= 2.0))
    throw FamilyInvalidError("variance family: growth exponents must lie in (0, 2]");
  const double test_pts[3] = {0.5, 1.0, 2.0};
  const double eps = 1e-6;
  for (const double sgn : {-1.0, 1.0}) {
    const double zn = std::clamp(z + sgn * eps, 0.0, 1.0);
    if (zn == z) continue;
    const VarianceFunction vn = fam.vf_at(zn);
    for (double tval : test_pts) {
      std::vector<double> t(static_cast<std::size_t>(d), 0.0);
      t[0] = tval;
      const double sa = std::sqrt(std::max(0.0, vz(t.data(), d)));
      const double sb = std::sqrt(std::max(0.0, vn(t.data(), d)));
      if (std::abs(sb - sa) > 1e-3 * std::max(1.0, sa))
        throw FamilyInvalidError(
            "variance family: sigma_z is discontinuous in z near z = " + std::to_string(z));
    }
  }
}

inline double positivity_margin(const VarianceFunction& vf, int d) {
  double margin = std::numeric_limits<double>::infinity();
  for (const double t : {54.598150033144236, 403.4287934927351, 2980.9579870417283}) {
    std::vector<double> x(static_cast<std::size_t>(d), 0.0);
    x[0] = t;
    margin = std::min(margin, vf(x.data(), d) / std::log(t) - 8.0 * d);
  }
  return margin;
}

}  // namespace detail

// Aggregate constant of a variance family: the [0, 1]-integral of the
// per-member lattice constant, by Simpson quadrature over the family
// parameter with one ratio-estimator run shared across nodes (common random
// numbers: node j reuses replica r's variates). Degenerate members
// (sigma_z == 0, so Z == 1) contribute exactly 0 and are flagged.
inline FamilyResult estimate_family_H(const VarianceFamily& fam, const FamilyConfig& cfg,
                                      std::uint64_t seed, int workers = 0) {
  if (!fam.vf_at) throw ConfigError("variance family: vf_at must be set");
  if (cfg.nodes < 3 || cfg.nodes % 2 == 0)
    throw ConfigError("variance family: Simpson node count must be odd and >= 3");
  if (cfg.reps < 2) throw ConfigError("variance family: need at least 2 replicas");
  const int d = cfg.d;
  const auto t0 = std::chrono::steady_clock::now();
  const int n = cfg.nodes;
  const double hz = 1.0 / static_cast<double>(n - 1);

  FamilyResult res;
  res.reps = cfg.reps;
  res.nodes.resize(static_cast<std::size_t>(n));
  std::vector<std::size_t> live;
  std::vector<VarianceFunction> live_vf;
  for (int j = 0; j < n; ++j) {
    const double z = static_cast<double>(j) * hz;
    detail::check_family_node(fam, z, d);
    VarianceFunction vf = fam.vf_at(z);
    auto& node = res.nodes[static_cast<std::size_t>(j)];
    node.z = z;
    node.weight = hz / 3.0 * (j == 0 || j == n - 1 ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0));
    node.positivity_margin = detail::positivity_margin(vf, d);
    node.degenerate = vf.is_degenerate();
    if (!node.degenerate) {
      live.push_back(static_cast<std::size_t>(j));
      live_vf.push_back(std::move(vf));
    }
  }

  const std::size_t kl = live.size();
  VectorWelford acc(std::max<std::size_t>(kl, 1));
  if (kl > 0) {
    const DyConfig& dy = cfg.dy;
    FieldSpec probe_spec = LogGaussianSpec{live_vf[0]};
    detail::validate_dy_config(probe_spec, d, dy);
    const double s = dy.delta > 0.0 ? dy.delta : dy.h;
    const auto geo = detail::build_ratio_geometry(d, s, dy.R, dy.eta);
    std::vector<FieldSpec> specs;
    std::vector<std::unique_ptr<SpectralSampler>> samplers;
    specs.reserve(kl);
    samplers.reserve(kl);
    for (std::size_t j = 0; j < kl; ++j) specs.emplace_back(LogGaussianSpec{live_vf[j]});
    for (std::size_t j = 0; j < kl; ++j)
      samplers.emplace_back(std::make_unique<SpectralSampler>(specs[j], geo.pts));

    const int nw = resolve_workers(workers);
    acc = mc_reduce_vec(cfg.reps, nw, kl, [&, seed]() {
      return [&, seed, z = std::vector<double>(), w = std::vector<double>(),
              out3 = std::array<double, 3>()](std::uint64_t r, double* out) mutable {
        for (std::size_t j = 0; j < kl; ++j) {
          // identical stream per node: exact common random numbers
          RngStream rng(seed, r, stream_tag::kFamilyBase);
          samplers[j]->sample(rng, z, w);
          detail::ratio_from_path(geo, z, out3.data());
          out[j] = out3[2];
        }
      };
    });
  }

  double total = 0.0, var = 0.0;
  for (std::size_t a = 0; a < kl; ++a) {
    auto& node = res.nodes[live[a]];
    node.estimate = acc.mean(a);
    node.stderr_est = acc.stderr_of_mean(a);
    total += node.weight * node.estimate;
    for (std::size_t b = 0; b < kl; ++b)
      var += node.weight * res.nodes[live[b]].weight * acc.mean_cov(a, b);
  }
  res.estimate = total;
  res.stderr_est = std::sqrt(std::max(0.0, var));

  // Simpson refinement error: compare with the half-resolution rule when
  // the node count permits (n = 4m + 1).
  res.quad_error_estimate = std::numeric_limits<double>::quiet_NaN();
  if ((n - 1) % 4 == 0) {
    const double h2 = 2.0 * hz;
    double coarse = 0.0;
    for (int j = 0; j < n; j += 2) {
      const int jc = j / 2;
      const int nc = (n - 1) / 2;
      const double w = h2 / 3.0 * (jc == 0 || jc == nc ? 1.0 : (jc % 2 == 1 ? 4.0 : 2.0));
      coarse += w * res.nodes[static_cast<std::size_t>(j)].estimate;
    }
    res.quad_error_estimate = std::abs(total - coarse) / 15.0;
  }
  res.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace pickands
