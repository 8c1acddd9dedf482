#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <vector>

#include "pickands/errors.hpp"
#include "pickands/kernels.hpp"

namespace pickands {

// Deterministic quadrature controls. The integration box and recursion
// depth are overridable so callers can force failure reporting instead of
// silently returning an unconverged value.
struct QuadratureConfig {
  double tol = 1e-6;
  int max_depth = 48;
  double box_lo = std::numeric_limits<double>::quiet_NaN();  // NaN = derive from support
  double box_hi = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline double simpson(double fa, double fm, double fb, double h) {
  return h / 6.0 * (fa + 4.0 * fm + fb);
}

template <class F>
double adaptive_rec(const F& f, double a, double fa, double b, double fb, double m, double fm,
                    double S, double tol, int depth) {
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double Sl = simpson(fa, flm, fm, m - a);
  const double Sr = simpson(fm, frm, fb, b - m);
  const double err = Sl + Sr - S;
  if (std::abs(err) <= 15.0 * tol || (b - a) < 1e-14 * std::max(1.0, std::abs(a)))
    return Sl + Sr + err / 15.0;
  if (depth <= 0)
    throw NonIntegrableError(
        "adaptive quadrature: recursion depth exhausted before reaching the error "
        "tolerance; the integrand does not appear integrable to the requested accuracy "
        "on the given box");
  return adaptive_rec(f, a, fa, m, fm, lm, flm, Sl, tol / 2.0, depth - 1) +
         adaptive_rec(f, m, fm, b, fb, rm, frm, Sr, tol / 2.0, depth - 1);
}

}  // namespace detail

// Adaptive Simpson integration of f over [a, b], splitting first at the
// supplied breakpoints so each panel sees a smooth integrand.
template <class F>
double integrate(const F& f, double a, double b, double tol, std::vector<double> breakpoints = {},
                 int max_depth = 48) {
  if (!(b > a)) return 0.0;
  if (!(tol > 0.0)) throw ConfigError("quadrature: tolerance must be > 0");
  breakpoints.push_back(a);
  breakpoints.push_back(b);
  std::sort(breakpoints.begin(), breakpoints.end());
  std::vector<double> edges;
  for (double x : breakpoints) {
    if (x < a || x > b) continue;
    if (edges.empty() || x - edges.back() > 1e-12 * std::max(1.0, std::abs(x)))
      edges.push_back(x);
  }
  if (edges.size() < 2) return 0.0;
  double total = 0.0;
  const double span = b - a;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    const double pa = edges[i], pb = edges[i + 1];
    const double pm = 0.5 * (pa + pb);
    const double fa = f(pa), fb = f(pb), fm = f(pm);
    const double S = detail::simpson(fa, fm, fb, pb - pa);
    const double ptol = tol * std::max((pb - pa) / span, 1e-3);
    total += detail::adaptive_rec(f, pa, fa, pb, fb, pm, fm, S, ptol, max_depth);
  }
  return total;
}

// Result of the deterministic lattice-constant computation for kernel
// fields: value = T^{-1} * integral over z of sup_{t in [0,T] grid} L(t - z).
// For delta = 0 the value is obtained as the extrapolated limit of a dyadic
// mesh ladder delta_n = 2^{-n} (Richardson-accelerated), and the exact
// continuum evaluation is reported alongside as a cross-check.
struct KernelConstantResult {
  double value = 0.0;
  double refine_error = 0.0;            // last extrapolation step (0 when delta > 0)
  std::vector<double> ladder;           // raw dyadic values (delta = 0 only)
  double continuum_value = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline std::vector<double> kernel_integrand_breakpoints(const Kernel& L, double delta, double T,
                                                        double lo, double hi) {
  std::vector<double> bps;
  std::vector<double> marks = L.breakpoints();
  marks.push_back(L.mode());
  if (delta > 0.0) {
    const auto kmax = static_cast<long long>(std::floor(T / delta + 1e-9));
    // cap breakpoint count for very fine meshes: beyond ~1e5 panels the
    // integrand is effectively smooth at quadrature resolution
    if ((kmax + 1) * static_cast<long long>(marks.size()) <= 200000) {
      for (long long k = 0; k <= kmax; ++k)
        for (double bp : marks) bps.push_back(static_cast<double>(k) * delta - bp);
    }
  } else {
    for (double bp : marks) {
      bps.push_back(-bp);
      bps.push_back(T - bp);
    }
  }
  bps.erase(std::remove_if(bps.begin(), bps.end(), [lo, hi](double x) { return x < lo || x > hi; }),
            bps.end());
  return bps;
}

inline double kernel_box_value(const Kernel& L, double delta, double T,
                               const QuadratureConfig& q, double lo, double hi) {
  auto bps = kernel_integrand_breakpoints(L, delta, T, lo, hi);
  if (delta > 0.0) {
    const auto kmax = static_cast<long long>(std::floor(T / delta + 1e-9));
    auto f = [&L, delta, kmax](double z) { return L.grid_sup(z, delta, 0, kmax); };
    return integrate(f, lo, hi, q.tol, std::move(bps), q.max_depth) / T;
  }
  auto f = [&L, T](double z) { return L.interval_sup(-z, T - z); };
  return integrate(f, lo, hi, q.tol, std::move(bps), q.max_depth) / T;
}

}  // namespace detail

// Lattice constant of a kernel field by deterministic quadrature.
// delta > 0: one integral. delta = 0: dyadic ladder delta_n = 2^{-n} with
// Richardson extrapolation (the lattice-sup error is O(delta^2) for kernels
// with a quadratic cap, and the extrapolation cancels that leading term),
// iterated until successive extrapolants agree to the tolerance.
inline KernelConstantResult kernel_constant(const Kernel& L, double delta, double T,
                                            const QuadratureConfig& q = {}) {
  if (!(T > 0.0)) throw ConfigError("kernel constant: T must be > 0");
  if (delta < 0.0) throw ConfigError("kernel constant: delta must be >= 0");
  const double lo = std::isnan(q.box_lo) ? -L.support_hi() : q.box_lo;
  const double hi = std::isnan(q.box_hi) ? T - L.support_lo() : q.box_hi;
  if (!(hi > lo)) throw ConfigError("kernel constant: integration box is empty");

  KernelConstantResult res;
  if (delta > 0.0) {
    res.value = detail::kernel_box_value(L, delta, T, q, lo, hi);
    return res;
  }

  res.continuum_value = detail::kernel_box_value(L, 0.0, T, q, lo, hi);
  double prev_extrap = std::numeric_limits<double>::quiet_NaN();
  double prev_v = std::numeric_limits<double>::quiet_NaN();
  constexpr int kMaxLevel = 12;
  for (int n = 0; n <= kMaxLevel; ++n) {
    const double dn = std::pow(0.5, n);
    const double vn = detail::kernel_box_value(L, dn, T, q, lo, hi);
    res.ladder.push_back(vn);
    if (n >= 1) {
      const double extrap = (4.0 * vn - prev_v) / 3.0;
      if (!std::isnan(prev_extrap)) {
        res.refine_error = std::abs(extrap - prev_extrap);
        if (res.refine_error <= std::max(q.tol, 1e-12 * std::abs(extrap))) {
          res.value = extrap;
          return res;
        }
      }
      prev_extrap = extrap;
      res.value = extrap;
    }
    prev_v = vn;
  }
  return res;
}

// Quotient-cell mass identity for an eta-lattice: the full-line integral of
//   g(s) = L(s) / (eta * sum_k L(k eta + s))
// equals 1 exactly when the lattice sum is positive wherever L is, i.e. the
// eta-lattice sees every part of the kernel's mass. Kernels with compact
// support narrower than eta provably fail (some shifted copies miss the
// support entirely), which is reported as InvalidKernelError rather than a
// numeric value.
struct FubiniReport {
  double value = 0.0;
  double eta = 0.0;
};

inline FubiniReport fubini_identity(const Kernel& L, double eta, double tol = 1e-8) {
  if (!(eta > 0.0)) throw ConfigError("quotient identity: eta must be > 0");
  if (L.compact_support()) {
    const double width = L.support_hi() - L.support_lo();
    if (width < eta - 1e-12) {
      std::ostringstream os;
      os << "quotient identity: kernel support width " << width
         << " is narrower than the lattice spacing eta = " << eta
         << "; shifted lattice copies miss the kernel mass entirely";
      throw InvalidKernelError(os.str());
    }
  }
  const double lo = L.support_lo(), hi = L.support_hi();
  // k eta + s spans [lo - s, hi - s] for s in [lo, hi]: radius = width + eta
  const double R = (hi - lo) + eta;
  auto g = [&L, eta, R](double s) {
    const double num = L.value(s);
    if (num <= 0.0) return 0.0;
    const double den = eta * L.lattice_sum(-s, eta, R);
    return den > 0.0 ? num / den : 0.0;
  };
  // panels at lattice-shifted kernel breakpoints (quotient kinks)
  std::vector<double> bps;
  for (double bp : L.breakpoints()) {
    for (double x = bp; x <= hi + eta; x += eta)
      if (x >= lo && x <= hi) bps.push_back(x);
    for (double x = bp - eta; x >= lo - eta; x -= eta)
      if (x >= lo && x <= hi) bps.push_back(x);
  }
  FubiniReport rep;
  rep.eta = eta;
  rep.value = integrate(g, lo, hi, tol, std::move(bps));
  return rep;
}

}  // namespace pickands
