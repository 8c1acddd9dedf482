#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "pickands/errors.hpp"
#include "pickands/gaussian.hpp"
#include "pickands/grid.hpp"
#include "pickands/kernels.hpp"
#include "pickands/rng.hpp"
#include "pickands/variance.hpp"

namespace pickands {

// Z(t) = exp(W(t) - sigma^2(t)/2) with W centred Gaussian, stationary
// increments, W(0) = 0. Z(0) = 1 almost surely; E Z(t) = 1 for all t.
struct LogGaussianSpec {
  VarianceFunction vf;
};

// Z(t) = exp(W(t) - sigma^2/2) with W a stationary centred Gaussian field
// (Ornstein-Uhlenbeck covariance sigma^2 * exp(-theta |s - t|), d = 1).
// Not anchored: Z(0) != 1, and the associated constant is 0.
struct StationaryLogGaussianSpec {
  double theta = 1.0;
  double sigma2 = 1.0;
};

// Z(t) = L(t - N) / p(N) with a unit-mass kernel L, a single random
// location N with density p (centred normal, configurable sd). d = 1.
struct KernelSpec {
  Kernel L;
  double p_sd = 1.0;
};

// Z(t) = V / p with P(V = 1) = p: a constant random field. The associated
// constant is 0 at every delta.
struct BernoulliSpec {
  double p = 0.5;
};

using FieldSpec =
    std::variant<LogGaussianSpec, StationaryLogGaussianSpec, KernelSpec, BernoulliSpec>;

inline void validate_spec(const FieldSpec& spec, int d) {
  if (d < 1) throw ConfigError("spectral spec: dimension must be >= 1");
  if (std::holds_alternative<KernelSpec>(spec) && d != 1)
    throw ConfigError("kernel spectral processes are one-dimensional");
  if (std::holds_alternative<StationaryLogGaussianSpec>(spec) && d != 1)
    throw ConfigError("stationary log-Gaussian spectral processes are one-dimensional");
  if (const auto* b = std::get_if<BernoulliSpec>(&spec)) {
    if (!(b->p > 0.0) || !(b->p <= 1.0))
      throw ConfigError("bernoulli spec: p must lie in (0, 1]");
  }
  if (const auto* s = std::get_if<StationaryLogGaussianSpec>(&spec)) {
    if (!(s->theta > 0.0) || !(s->sigma2 > 0.0))
      throw ConfigError("stationary spec: theta and sigma2 must be > 0");
  }
  if (const auto* k = std::get_if<KernelSpec>(&spec)) {
    if (!(k->p_sd > 0.0)) throw ConfigError("kernel spec: p_sd must be > 0");
  }
}

// Canonical human/machine-readable description (used in output rows and
// config fingerprints).
inline std::string describe_spec(const FieldSpec& spec) {
  std::ostringstream os;
  if (const auto* g = std::get_if<LogGaussianSpec>(&spec)) {
    os << "lognormal[" << g->vf.describe() << "]";
  } else if (const auto* s = std::get_if<StationaryLogGaussianSpec>(&spec)) {
    os << "stationary[ou,theta=" << s->theta << ",sigma2=" << s->sigma2 << "]";
  } else if (const auto* k = std::get_if<KernelSpec>(&spec)) {
    os << "kernel[" << k->L.name() << ",p_sd=" << k->p_sd << "]";
  } else if (const auto* b = std::get_if<BernoulliSpec>(&spec)) {
    os << "bernoulli[p=" << b->p << "]";
  }
  return os.str();
}

namespace detail {
// True when a 1-d point set is a uniform mesh containing the origin, in
// which case the circulant/rank-one mesh sampler applies.
inline bool is_uniform_mesh_with_origin(const PointSet& pts, double& lo, double& s) {
  if (pts.d != 1 || pts.size() < 2) return false;
  lo = pts.coords.front();
  s = pts.coords[1] - pts.coords[0];
  if (!(s > 0.0)) return false;
  const double span = std::max(1.0, std::abs(pts.coords.back() - lo));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (std::abs(pts.coords[i] - (lo + static_cast<double>(i) * s)) > 1e-9 * span) return false;
  }
  const double iorig = -lo / s;
  const double nearest = std::round(iorig);
  return nearest >= 0.0 && nearest < static_cast<double>(pts.size()) &&
         std::abs(iorig - nearest) < 1e-6;
}
}  // namespace detail

// Prepared sampler of Z over a fixed point set. Construction does the heavy
// lifting (factorisations); sample() draws one replica with a fixed number
// of variates. The three-argument sample() is thread-safe: concurrent calls
// must pass distinct scratch buffers.
class SpectralSampler {
 public:
  SpectralSampler(const FieldSpec& spec, PointSet pts) : spec_(std::make_shared<FieldSpec>(spec)) {
    validate_spec(spec, pts.d);
    if (const auto* g = std::get_if<LogGaussianSpec>(&spec)) {
      half_var_.resize(pts.size());
      for (std::size_t i = 0; i < pts.size(); ++i)
        half_var_[i] = 0.5 * g->vf(pts.at(i), pts.d);
      double lo = 0.0, s = 0.0;
      if (detail::is_uniform_mesh_with_origin(pts, lo, s)) {
        pts_ = std::move(pts);
        mesh_.emplace(g->vf, lo, s, pts_.size());
      } else {
        gauss_.emplace(g->vf, std::move(pts));
      }
    } else if (const auto* s = std::get_if<StationaryLogGaussianSpec>(&spec)) {
      const double theta = s->theta, sigma2 = s->sigma2;
      half_var_.assign(pts.size(), 0.5 * sigma2);
      chol_.emplace(std::move(pts), [theta, sigma2](const double* a, const double* b, int) {
        return sigma2 * std::exp(-theta * std::abs(a[0] - b[0]));
      });
    } else {
      pts_ = std::move(pts);
    }
  }

  const PointSet& points() const {
    if (gauss_) return gauss_->points();
    if (chol_) return chol_->points();
    return pts_;
  }

  // Thread-safe form; w_scratch is the caller-owned Gaussian path buffer.
  void sample(RngStream& rng, std::vector<double>& z, std::vector<double>& w_scratch) const {
    if (mesh_ || gauss_ || chol_) {
      if (mesh_)
        mesh_->sample(rng, w_scratch);
      else if (gauss_)
        gauss_->sample(rng, w_scratch);
      else
        chol_->sample(rng, w_scratch);
      z.resize(w_scratch.size());
      for (std::size_t i = 0; i < z.size(); ++i)
        z[i] = std::exp(w_scratch[i] - half_var_[i]);
      return;
    }
    if (const auto* k = std::get_if<KernelSpec>(spec_.get())) {
      const NormalDensity p{k->p_sd};
      const double n = p.sample(rng);
      const double dens = p.pdf(n);
      const std::size_t m = pts_.size();
      z.resize(m);
      for (std::size_t i = 0; i < m; ++i) z[i] = k->L.value(pts_.coords[i] - n) / dens;
      return;
    }
    const auto& b = std::get<BernoulliSpec>(*spec_);
    const double v = (rng.uniform() < b.p) ? 1.0 / b.p : 0.0;
    z.assign(pts_.size(), v);
  }

  // Convenience form for single-threaded callers.
  void sample(RngStream& rng, std::vector<double>& z) const { sample(rng, z, w_internal_); }

 private:
  std::shared_ptr<const FieldSpec> spec_;
  PointSet pts_;  // kernel / bernoulli / uniform-mesh lognormal
  std::optional<MeshGaussian1D> mesh_;
  std::optional<PointGaussian> gauss_;
  std::optional<CholeskySampler> chol_;
  std::vector<double> half_var_;
  mutable std::vector<double> w_internal_;
};

// Per-point z-scores of the sample mean of Z(t) against its exact value 1.
struct MeanOneReport {
  std::vector<double> point_z;
  double max_abs_z = 0.0;
  std::uint64_t reps = 0;
};

inline MeanOneReport check_mean_one(const FieldSpec& spec, const PointSet& pts,
                                    std::uint64_t reps, std::uint64_t seed) {
  if (reps < 2) throw ConfigError("check_mean_one: need at least 2 replicas");
  SpectralSampler sampler(spec, pts);
  const std::size_t m = sampler.points().size();
  std::vector<double> mean(m, 0.0), m2(m, 0.0), z(m);
  std::vector<double> buf;
  for (std::uint64_t r = 0; r < reps; ++r) {
    RngStream rng(seed, r, stream_tag::kMeanOne);
    sampler.sample(rng, buf);
    const double n = static_cast<double>(r + 1);
    for (std::size_t i = 0; i < m; ++i) {
      const double delta = buf[i] - mean[i];
      mean[i] += delta / n;
      m2[i] += delta * (buf[i] - mean[i]);
    }
  }
  MeanOneReport rep;
  rep.reps = reps;
  rep.point_z.resize(m);
  const double n = static_cast<double>(reps);
  for (std::size_t i = 0; i < m; ++i) {
    const double se = std::sqrt(m2[i] / (n * (n - 1.0)));
    rep.point_z[i] = se > 0.0 ? (mean[i] - 1.0) / se : 0.0;
    rep.max_abs_z = std::max(rep.max_abs_z, std::abs(rep.point_z[i]));
  }
  return rep;
}

// Paired test of E sup_{grid} Z == E sup_{grid + shift} Z (stationarity of
// the associated max-stable field). Both sups are evaluated on a joint
// sample of Z over the union of the two grids.
struct ShiftInvarianceReport {
  double mean_diff = 0.0;
  double se_diff = 0.0;
  double z = 0.0;
  std::uint64_t reps = 0;
};

inline ShiftInvarianceReport check_shift_invariance(const FieldSpec& spec, double box,
                                                    double delta, double shift,
                                                    std::uint64_t reps, std::uint64_t seed) {
  if (reps < 2) throw ConfigError("check_shift_invariance: need at least 2 replicas");
  PointSet base = enumerate_points(1, delta, box);
  const std::size_t nb = base.size();
  PointSet joint;
  joint.d = 1;
  joint.coords = base.coords;
  for (std::size_t i = 0; i < nb; ++i) joint.coords.push_back(base.coords[i] + shift);

  SpectralSampler sampler(spec, std::move(joint));
  std::vector<double> z;
  double mean = 0.0, m2 = 0.0;
  for (std::uint64_t r = 0; r < reps; ++r) {
    RngStream rng(seed, r, stream_tag::kShiftInvariance);
    sampler.sample(rng, z);
    double s0 = 0.0, s1 = 0.0;
    for (std::size_t i = 0; i < nb; ++i) {
      s0 = std::max(s0, z[i]);
      s1 = std::max(s1, z[nb + i]);
    }
    const double diff = s0 - s1;
    const double n = static_cast<double>(r + 1);
    const double d0 = diff - mean;
    mean += d0 / n;
    m2 += d0 * (diff - mean);
  }
  ShiftInvarianceReport rep;
  rep.reps = reps;
  rep.mean_diff = mean;
  const double n = static_cast<double>(reps);
  rep.se_diff = std::sqrt(m2 / (n * (n - 1.0)));
  rep.z = rep.se_diff > 0.0 ? mean / rep.se_diff : 0.0;
  return rep;
}

}  // namespace pickands
