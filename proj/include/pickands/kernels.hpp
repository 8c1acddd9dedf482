#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pickands/errors.hpp"
#include "pickands/rng.hpp"

namespace pickands {

inline constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;

// Standard normal CDF / complementary CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * 0.7071067811865475244); }
inline double normal_sf(double x) { return 0.5 * std::erfc(x * 0.7071067811865475244); }

// Probability density on the real line used for the kernel spectral
// representation: a centred normal with configurable sd.
struct NormalDensity {
  double sd = 1.0;

  double pdf(double x) const {
    const double z = x / sd;
    return kInvSqrt2Pi / sd * std::exp(-0.5 * z * z);
  }
  double sample(RngStream& rng) const { return sd * rng.normal(); }
  // Minimum of the density over [a, b]: attained at the endpoint farthest
  // from the origin (the density is symmetric unimodal).
  double min_on(double a, double b) const {
    return pdf(std::abs(a) >= std::abs(b) ? a : b);
  }
};

// Non-negative kernel on the real line with unit integral. Provides exact
// pointwise evaluation plus the analytic window operations the estimators
// need: continuum sup, lattice sup, lattice sum and integral over a window,
// all without discretisation error.
class Kernel {
 public:
  enum class Shape { Gaussian, Laplace, Indicator, Tabulated };

  static Kernel gaussian() {
    Kernel k;
    k.shape_ = Shape::Gaussian;
    k.name_ = "gaussian";
    k.mode_ = 0.0;
    k.sup_ = kInvSqrt2Pi;
    k.compact_ = false;
    // value(u) underflows to 0 beyond ~38.6; sums over this range are exact
    // to double precision.
    k.sum_lo_ = -39.0;
    k.sum_hi_ = 39.0;
    k.unimodal_ = true;
    return k;
  }

  static Kernel laplace() {
    Kernel k;
    k.shape_ = Shape::Laplace;
    k.name_ = "laplace";
    k.mode_ = 0.0;
    k.sup_ = 0.5;
    k.compact_ = false;
    k.sum_lo_ = -710.0;
    k.sum_hi_ = 710.0;
    k.unimodal_ = true;
    k.breakpoints_ = {0.0};
    return k;
  }

  // Indicator of [0, 1] (closed).
  static Kernel indicator() {
    Kernel k;
    k.shape_ = Shape::Indicator;
    k.name_ = "indicator";
    k.mode_ = 0.5;
    k.sup_ = 1.0;
    k.compact_ = true;
    k.sum_lo_ = 0.0;
    k.sum_hi_ = 1.0;
    k.unimodal_ = true;
    k.breakpoints_ = {0.0, 1.0};
    return k;
  }

  // Piecewise-linear kernel through uniformly spaced knots; zero outside
  // [xs.front(), xs.back()]. The trapezoid mass (exact for a piecewise
  // linear shape) must equal 1 within 1e-8.
  static Kernel tabulated(std::vector<double> xs, std::vector<double> ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
      throw ConfigError("tabulated kernel: need >= 2 matching knots");
    const double h = xs[1] - xs[0];
    if (!(h > 0.0)) throw ConfigError("tabulated kernel: abscissae must increase");
    for (std::size_t i = 1; i < xs.size(); ++i) {
      if (std::abs((xs[i] - xs[i - 1]) - h) > 1e-9 * std::max(1.0, std::abs(h)))
        throw ConfigError("tabulated kernel: abscissae must be uniformly spaced");
    }
    for (double y : ys)
      if (!(y >= 0.0)) throw ConfigError("tabulated kernel: values must be non-negative");

    Kernel k;
    k.shape_ = Shape::Tabulated;
    k.name_ = "tabulated";
    k.xs_ = std::move(xs);
    k.ys_ = std::move(ys);
    k.compact_ = true;
    k.sum_lo_ = k.xs_.front();
    k.sum_hi_ = k.xs_.back();
    k.breakpoints_ = k.xs_;

    double mass = 0.0;
    k.cum_.assign(k.xs_.size(), 0.0);
    for (std::size_t i = 1; i < k.xs_.size(); ++i) {
      mass += 0.5 * (k.ys_[i] + k.ys_[i - 1]) * (k.xs_[i] - k.xs_[i - 1]);
      k.cum_[i] = mass;
    }
    if (std::abs(mass - 1.0) > 1e-8)
      throw InvalidKernelError("tabulated kernel: integral is " + std::to_string(mass) +
                               ", must be 1 within 1e-8");

    std::size_t arg = 0;
    for (std::size_t i = 1; i < k.ys_.size(); ++i)
      if (k.ys_[i] > k.ys_[arg]) arg = i;
    k.mode_ = k.xs_[arg];
    k.sup_ = k.ys_[arg];
    bool rising_done = false, ok = true;
    for (std::size_t i = 1; i < k.ys_.size(); ++i) {
      if (k.ys_[i] < k.ys_[i - 1]) rising_done = true;
      else if (k.ys_[i] > k.ys_[i - 1] && rising_done) ok = false;
    }
    k.unimodal_ = ok;
    return k;
  }

  // Two-column CSV (abscissa, value), optional header line.
  static Kernel from_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("kernel csv: cannot open " + path);
    std::vector<double> xs, ys;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::replace(line.begin(), line.end(), ',', ' ');
      std::istringstream row(line);
      double x, y;
      if (!(row >> x >> y)) {
        if (xs.empty()) continue;  // header line
        throw ConfigError("kernel csv: malformed row '" + line + "'");
      }
      xs.push_back(x);
      ys.push_back(y);
    }
    auto k = tabulated(std::move(xs), std::move(ys));
    k.name_ = "file";
    return k;
  }

  double value(double u) const {
    switch (shape_) {
      case Shape::Gaussian:
        return kInvSqrt2Pi * std::exp(-0.5 * u * u);
      case Shape::Laplace:
        return 0.5 * std::exp(-std::abs(u));
      case Shape::Indicator:
        return (u >= 0.0 && u <= 1.0) ? 1.0 : 0.0;
      case Shape::Tabulated: {
        if (u < xs_.front() || u > xs_.back()) return 0.0;
        const double h = xs_[1] - xs_[0];
        auto i = static_cast<std::size_t>((u - xs_.front()) / h);
        if (i >= xs_.size() - 1) i = xs_.size() - 2;
        const double w = (u - xs_[i]) / h;
        return ys_[i] * (1.0 - w) + ys_[i + 1] * w;
      }
    }
    return 0.0;
  }

  // Antiderivative normalised so cdf(-inf) = 0 and cdf(+inf) = 1.
  double cdf(double x) const {
    switch (shape_) {
      case Shape::Gaussian:
        return normal_cdf(x);
      case Shape::Laplace:
        return x < 0.0 ? 0.5 * std::exp(x) : 1.0 - 0.5 * std::exp(-x);
      case Shape::Indicator:
        return std::clamp(x, 0.0, 1.0);
      case Shape::Tabulated: {
        if (x <= xs_.front()) return 0.0;
        if (x >= xs_.back()) return cum_.back();
        const double h = xs_[1] - xs_[0];
        auto i = static_cast<std::size_t>((x - xs_.front()) / h);
        if (i >= xs_.size() - 1) i = xs_.size() - 2;
        const double dx = x - xs_[i];
        const double slope = (ys_[i + 1] - ys_[i]) / h;
        return cum_[i] + ys_[i] * dx + 0.5 * slope * dx * dx;
      }
    }
    return 0.0;
  }

  Shape shape() const { return shape_; }
  const std::string& name() const { return name_; }
  double sup_value() const { return sup_; }
  double mode() const { return mode_; }
  bool compact_support() const { return compact_; }
  bool unimodal() const { return unimodal_; }
  // For compact kernels the exact support; otherwise the range outside
  // which value() is zero to double precision.
  double support_lo() const { return sum_lo_; }
  double support_hi() const { return sum_hi_; }
  const std::vector<double>& breakpoints() const { return breakpoints_; }

  // sup of value(t - shift) over the continuum window t in [-R, R].
  double window_sup(double shift, double R) const {
    return interval_sup(-R - shift, R - shift);
  }

  // sup of value(u) over u in [a, b].
  double interval_sup(double a, double b) const {
    if (a > b) return 0.0;
    if (unimodal_ && shape_ != Shape::Tabulated) {
      if (shape_ == Shape::Indicator) {
        const double lo = std::max(a, 0.0), hi = std::min(b, 1.0);
        return lo <= hi ? 1.0 : 0.0;
      }
      return value(std::clamp(mode_, a, b));
    }
    double best = std::max(value(a), value(b));
    for (double x : xs_)
      if (x >= a && x <= b) best = std::max(best, value(x));
    return best;
  }

  // sup of value(k*delta - shift) over integer k in [kmin, kmax].
  double grid_sup(double shift, double delta, long long kmin, long long kmax) const {
    if (kmin > kmax) return 0.0;
    switch (shape_) {
      case Shape::Gaussian:
      case Shape::Laplace: {
        // strictly unimodal: only the lattice neighbours of the mode matter
        const double kstar = (mode_ + shift) / delta;
        const long long lo = std::clamp(static_cast<long long>(std::floor(kstar)), kmin, kmax);
        const long long hi = std::clamp(static_cast<long long>(std::ceil(kstar)), kmin, kmax);
        return std::max(value(static_cast<double>(lo) * delta - shift),
                        value(static_cast<double>(hi) * delta - shift));
      }
      case Shape::Indicator: {
        // need k*delta - shift in [0, 1]
        const long long lo =
            std::max(kmin, static_cast<long long>(std::ceil(shift / delta - 1e-9)));
        const long long hi =
            std::min(kmax, static_cast<long long>(std::floor((shift + 1.0) / delta + 1e-9)));
        return lo <= hi ? 1.0 : 0.0;
      }
      case Shape::Tabulated: {
        const long long lo =
            std::max(kmin, static_cast<long long>(std::ceil((shift + sum_lo_) / delta - 1e-9)));
        const long long hi =
            std::min(kmax, static_cast<long long>(std::floor((shift + sum_hi_) / delta + 1e-9)));
        double best = 0.0;
        for (long long k = lo; k <= hi; ++k)
          best = std::max(best, value(static_cast<double>(k) * delta - shift));
        return best;
      }
    }
    return 0.0;
  }

  // sup of value(k*delta - shift) over the symmetric lattice window
  // |k*delta| <= R.
  double grid_sup_window(double shift, double delta, double R) const {
    const auto K = static_cast<long long>(std::floor(R / delta + 1e-9));
    return grid_sup(shift, delta, -K, K);
  }

  // Sum of value(k*eta - shift) over |k*eta| <= R; exact to double
  // precision (terms outside [sum_lo, sum_hi] vanish).
  double lattice_sum(double shift, double eta, double R) const {
    const auto K = static_cast<long long>(std::floor(R / eta + 1e-9));
    const long long lo =
        std::max(-K, static_cast<long long>(std::ceil((shift + sum_lo_) / eta - 1e-9)));
    const long long hi =
        std::min(K, static_cast<long long>(std::floor((shift + sum_hi_) / eta + 1e-9)));
    double s = 0.0;
    for (long long k = lo; k <= hi; ++k) s += value(static_cast<double>(k) * eta - shift);
    return s;
  }

  // Integral of value(t - shift) over the window t in [-R, R].
  double window_integral(double shift, double R) const {
    return cdf(R - shift) - cdf(-R - shift);
  }

 private:
  Kernel() = default;

  Shape shape_ = Shape::Gaussian;
  std::string name_;
  double mode_ = 0.0, sup_ = 0.0;
  bool compact_ = false, unimodal_ = true;
  double sum_lo_ = 0.0, sum_hi_ = 0.0;
  std::vector<double> breakpoints_;
  std::vector<double> xs_, ys_, cum_;  // tabulated shape
};

}  // namespace pickands
