#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pickands/errors.hpp"

namespace pickands {

// Power-law growth envelopes of a variance function near 0 and near
// infinity: sigma^2(t) <= c0*|t|^nu0 as |t| -> 0 and <= c_inf*|t|^nu_inf as
// |t| -> infinity. Exponents must lie in (0, 2].
struct Growth {
  double nu0 = 2.0;
  double c0 = 1.0;
  double nu_inf = 2.0;
  double c_inf = 1.0;
};

// Variance function sigma^2 of a centred Gaussian field with stationary
// increments: sigma^2(0) = 0, and the induced covariance
//   Cov(W(s), W(t)) = (sigma^2(s) + sigma^2(t) - sigma^2(t - s)) / 2
// must be positive semidefinite. PSD-ness is verified on sampled grids at
// sampling time, not symbolically.
class VarianceFunction {
 public:
  enum class Kind { Fbm, Linear, Sum, Scaled, NormSphere };

  // sigma^2(t) = scale * |t|^(2*alpha), alpha in (0, 1].
  static VarianceFunction fbm(double alpha, double scale = 1.0) {
    if (!(alpha > 0.0) || !(alpha <= 1.0))
      throw ConfigError("fbm: alpha must lie in (0, 1]");
    if (!(scale > 0.0)) throw ConfigError("fbm: scale must be > 0");
    VarianceFunction v;
    v.kind_ = Kind::Fbm;
    v.a_ = alpha;
    v.b_ = scale;
    v.growth_ = {2.0 * alpha, scale, 2.0 * alpha, scale};
    return v;
  }

  // sigma^2(t) = c^2 * |t|^2; the field is W(t) = c * <t, xi> for a single
  // standard normal vector xi (rank-one, exactly sampleable).
  static VarianceFunction linear(double c) {
    if (!(c > 0.0)) throw ConfigError("linear: c must be > 0");
    VarianceFunction v;
    v.kind_ = Kind::Linear;
    v.a_ = c;
    v.growth_ = {2.0, c * c, 2.0, c * c};
    return v;
  }

  // Sum of two variance functions (independent field sum).
  static VarianceFunction sum(VarianceFunction lhs, VarianceFunction rhs) {
    VarianceFunction v;
    v.kind_ = Kind::Sum;
    const Growth gl = lhs.growth_, gr = rhs.growth_;
    v.left_ = std::make_shared<VarianceFunction>(std::move(lhs));
    v.right_ = std::make_shared<VarianceFunction>(std::move(rhs));
    // Near 0 the smaller exponent dominates the bound; near infinity the
    // larger one does. Summing the constants keeps both envelopes valid.
    v.growth_ = {std::min(gl.nu0, gr.nu0), gl.c0 + gr.c0,
                 std::max(gl.nu_inf, gr.nu_inf), gl.c_inf + gr.c_inf};
    return v;
  }

  // sigma^2(t) = amplitude^2 * base(t); amplitude 0 yields the degenerate
  // sigma == 0 (constant field), which is allowed and flagged downstream.
  static VarianceFunction scaled(double amplitude, VarianceFunction base) {
    if (!(amplitude >= 0.0)) throw ConfigError("scaled: amplitude must be >= 0");
    VarianceFunction v;
    v.kind_ = Kind::Scaled;
    v.a_ = amplitude;
    const Growth g = base.growth_;
    v.left_ = std::make_shared<VarianceFunction>(std::move(base));
    const double q2 = amplitude * amplitude;
    v.growth_ = {g.nu0, g.c0 * q2, g.nu_inf, g.c_inf * q2};
    return v;
  }

  // sigma^2(t) = |t|^lambda * rbar(t/|t|), lambda in (0, 2], where rbar is
  // the even part (r(u) + r(-u))/2 of a non-negative function r on the unit
  // sphere. Stationary increments force an even variance function, so an
  // asymmetric r is symmetrised rather than rejected.
  static VarianceFunction norm_sphere(double lambda, int d,
                                      std::function<double(const double*)> r) {
    if (!(lambda > 0.0) || !(lambda <= 2.0))
      throw ConfigError("norm_sphere: lambda must lie in (0, 2]");
    if (d < 1) throw ConfigError("norm_sphere: dimension must be >= 1");
    if (!r) throw ConfigError("norm_sphere: sphere function required");
    VarianceFunction v;
    v.kind_ = Kind::NormSphere;
    v.a_ = lambda;
    v.dim_ = d;
    v.r_ = std::move(r);
    const double rmax = v.scan_sphere_max();
    v.growth_ = {lambda, rmax, lambda, rmax};
    return v;
  }

  double operator()(const double* t, int d) const {
    switch (kind_) {
      case Kind::Fbm: {
        const double n = norm(t, d);
        return b_ * std::pow(n, 2.0 * a_);
      }
      case Kind::Linear: {
        const double n2 = norm2(t, d);
        return a_ * a_ * n2;
      }
      case Kind::Sum:
        return (*left_)(t, d) + (*right_)(t, d);
      case Kind::Scaled:
        return a_ * a_ * (*left_)(t, d);
      case Kind::NormSphere: {
        if (d != dim_) throw ConfigError("norm_sphere: dimension mismatch");
        const double n = norm(t, d);
        if (n == 0.0) return 0.0;
        return std::pow(n, a_) * rbar(t, n, d);
      }
    }
    return 0.0;
  }

  double at1(double t) const { return (*this)(&t, 1); }

  Kind kind() const { return kind_; }
  const Growth& growth() const { return growth_; }

  // Returns c > 0 if sigma^2(t) == c^2 |t|^2 identically (pure linear
  // through sums/scalings), otherwise -1. Enables the rank-one sampler.
  double linear_coeff() const {
    const double c2 = linear_coeff_sq();
    return c2 >= 0.0 ? std::sqrt(c2) : -1.0;
  }

  // True when sigma^2 vanishes identically (zero-amplitude scaling chain).
  bool is_degenerate() const {
    switch (kind_) {
      case Kind::Scaled:
        return a_ == 0.0 || left_->is_degenerate();
      case Kind::Sum:
        return left_->is_degenerate() && right_->is_degenerate();
      default:
        return false;
    }
  }

  std::string describe() const {
    std::ostringstream os;
    switch (kind_) {
      case Kind::Fbm:
        os << "fbm(alpha=" << a_ << ",scale=" << b_ << ")";
        break;
      case Kind::Linear:
        os << "linear(c=" << a_ << ")";
        break;
      case Kind::Sum:
        os << "sum(" << left_->describe() << "," << right_->describe() << ")";
        break;
      case Kind::Scaled:
        os << "scaled(q=" << a_ << "," << left_->describe() << ")";
        break;
      case Kind::NormSphere:
        os << "normsphere(lambda=" << a_ << ",d=" << dim_ << ")";
        break;
    }
    return os.str();
  }

 private:
  VarianceFunction() = default;

  static double norm2(const double* t, int d) {
    double s = 0.0;
    for (int k = 0; k < d; ++k) s += t[k] * t[k];
    return s;
  }
  static double norm(const double* t, int d) { return std::sqrt(norm2(t, d)); }

  double rbar(const double* t, double n, int d) const {
    std::vector<double> u(static_cast<std::size_t>(d)), mu(static_cast<std::size_t>(d));
    for (int k = 0; k < d; ++k) {
      u[static_cast<std::size_t>(k)] = t[k] / n;
      mu[static_cast<std::size_t>(k)] = -t[k] / n;
    }
    const double rp = r_(u.data());
    const double rm = r_(mu.data());
    if (rp < 0.0 || rm < 0.0)
      throw ConfigError("norm_sphere: sphere function must be non-negative");
    return 0.5 * (rp + rm);
  }

  double scan_sphere_max() const {
    double rmax = 0.0;
    if (dim_ == 1) {
      const double up = 1.0, um = -1.0;
      rmax = std::max(0.5 * (r_(&up) + r_(&um)), rmax);
      if (r_(&up) < 0.0 || r_(&um) < 0.0)
        throw ConfigError("norm_sphere: sphere function must be non-negative");
    } else {
      std::vector<double> u(static_cast<std::size_t>(dim_), 0.0);
      const int scans = 64;
      for (int i = 0; i < scans; ++i) {  // planar scan; growth bound only
        const double phi = 2.0 * 3.14159265358979323846 * i / scans;
        for (auto& c : u) c = 0.0;
        u[0] = std::cos(phi);
        u[1] = std::sin(phi);
        const double val = r_(u.data());
        if (val < 0.0) throw ConfigError("norm_sphere: sphere function must be non-negative");
        rmax = std::max(rmax, val);
      }
    }
    return rmax;
  }

  double linear_coeff_sq() const {
    switch (kind_) {
      case Kind::Linear:
        return a_ * a_;
      case Kind::Fbm:
        return a_ == 1.0 ? b_ : -1.0;
      case Kind::Scaled: {
        const double base = left_->linear_coeff_sq();
        return base >= 0.0 ? a_ * a_ * base : -1.0;
      }
      case Kind::Sum: {
        const double l = left_->linear_coeff_sq();
        const double r = right_->linear_coeff_sq();
        return (l >= 0.0 && r >= 0.0) ? l + r : -1.0;
      }
      default:
        return -1.0;
    }
  }

  Kind kind_ = Kind::Fbm;
  double a_ = 0.5;  // alpha | c | amplitude | lambda
  double b_ = 1.0;  // scale
  int dim_ = 1;
  std::shared_ptr<VarianceFunction> left_, right_;
  std::function<double(const double*)> r_;
  Growth growth_;
};

// Covariance induced by stationary increments and W(0) = 0.
inline double covariance(const VarianceFunction& vf, const double* s, const double* t, int d) {
  std::vector<double> diff(static_cast<std::size_t>(d));
  for (int k = 0; k < d; ++k) diff[static_cast<std::size_t>(k)] = t[k] - s[k];
  return 0.5 * (vf(s, d) + vf(t, d) - vf(diff.data(), d));
}

inline double covariance1(const VarianceFunction& vf, double s, double t) {
  return covariance(vf, &s, &t, 1);
}

}  // namespace pickands
