#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pickands/errors.hpp"
#include "pickands/fft.hpp"
#include "pickands/grid.hpp"
#include "pickands/rng.hpp"
#include "pickands/variance.hpp"

namespace pickands {

namespace detail {

// Eigenvalues of the circulant extension of a stationary autocovariance
// sequence gamma(0..n). The circulant has order M = 2n with first row
// [gamma_0, .., gamma_n, gamma_{n-1}, .., gamma_1]; its eigenvalues are the
// real part of the DFT of that row. Exposed for direct testing of the
// not-PSD detection path.
inline std::vector<double> circulant_eigenvalues(const std::vector<double>& gamma) {
  if (gamma.size() < 2) throw Error("circulant_eigenvalues: need gamma(0..n), n >= 1");
  const std::size_t n = gamma.size() - 1;
  const std::size_t M = 2 * n;
  std::vector<std::complex<double>> row(M);
  for (std::size_t j = 0; j <= n; ++j) row[j] = gamma[j];
  for (std::size_t j = n + 1; j < M; ++j) row[j] = gamma[M - j];
  fft_any(row, false);
  std::vector<double> lambda(M);
  for (std::size_t j = 0; j < M; ++j) lambda[j] = row[j].real();
  return lambda;
}

}  // namespace detail

// Exact sampler for W with stationary increments on a uniform 1-d mesh via
// circulant embedding of the increment process (Davies-Harte). Produces the
// cumulative path anchored at the first mesh point. Throws
// EmbeddingNotPsdError when the circulant extension has an eigenvalue below
// -1e-10 * max(eigenvalue); tiny negative eigenvalues above that threshold
// are clipped to zero.
class CirculantSampler {
 public:
  CirculantSampler(const VarianceFunction& vf, std::size_t n_points, double spacing) {
    if (n_points < 2) throw ConfigError("CirculantSampler: need at least 2 mesh points");
    if (!(spacing > 0.0)) throw ConfigError("CirculantSampler: spacing must be > 0");
    n_ = n_points;
    const std::size_t ninc = n_points - 1;
    std::vector<double> gamma(ninc + 1);
    const auto s2 = [&](double t) { return vf.at1(std::abs(t)); };
    const double s = spacing;
    for (std::size_t j = 0; j <= ninc; ++j) {
      const double x = static_cast<double>(j) * s;
      gamma[j] = 0.5 * (s2(x + s) - 2.0 * s2(x) + s2(x - s));
    }
    auto lambda = detail::circulant_eigenvalues(gamma);
    M_ = lambda.size();
    double lmax = 0.0;
    for (double l : lambda) lmax = std::max(lmax, l);
    const double clip = -1e-10 * std::max(lmax, 1e-300);
    for (double& l : lambda) {
      if (l < clip)
        throw EmbeddingNotPsdError(
            "circulant embedding is not positive semidefinite (eigenvalue " +
            std::to_string(l) + " with max " + std::to_string(lmax) + ")");
      if (l < 0.0) l = 0.0;
    }
    sqrt_lambda_.resize(M_);
    for (std::size_t j = 0; j < M_; ++j) sqrt_lambda_[j] = std::sqrt(lambda[j]);
  }

  // Fills w (resized to n_points) with a path W(t_i), t_i = i * spacing
  // relative to the mesh start, W(t_0) = 0. Consumes exactly M normals.
  void sample(RngStream& rng, std::vector<double>& w) const {
    const std::size_t M = M_, half = M / 2;
    std::vector<std::complex<double>> v(M);
    v[0] = sqrt_lambda_[0] * rng.normal();
    for (std::size_t k = 1; k < half; ++k) {
      const double a = rng.normal();
      const double b = rng.normal();
      const double scale = sqrt_lambda_[k] * 0.7071067811865475244;
      v[k] = {scale * a, scale * b};
      v[M - k] = std::conj(v[k]);
    }
    v[half] = sqrt_lambda_[half] * rng.normal();
    detail::fft_any(v, false);
    const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(M));
    w.assign(n_, 0.0);
    double acc = 0.0;
    for (std::size_t i = 1; i < n_; ++i) {
      acc += v[i - 1].real() * inv_sqrt_m;
      w[i] = acc;
    }
  }

  std::size_t normals_per_path() const { return M_; }

 private:
  std::size_t n_ = 0, M_ = 0;
  std::vector<double> sqrt_lambda_;
};

// Dense Cholesky sampler over an arbitrary point set with a caller-supplied
// covariance. Points whose variance is (numerically) zero are pinned to the
// exact value 0 and excluded from the factorisation, so anchored fields get
// W(0) = 0 pathwise. Escalating diagonal jitter up to 1e-10 * mean diagonal
// is attempted before declaring the matrix not PSD.
class CholeskySampler {
 public:
  using Cov = std::function<double(const double*, const double*, int)>;

  static constexpr std::size_t kMaxPoints = 4096;

  CholeskySampler(PointSet pts, const Cov& cov) : pts_(std::move(pts)) {
    const std::size_t n = pts_.size();
    if (n == 0) throw ConfigError("CholeskySampler: empty point set");
    if (n > kMaxPoints)
      throw GridTooLargeError("CholeskySampler: dense factorisation capped at " +
                              std::to_string(kMaxPoints) + " points");
    const int d = pts_.d;
    std::vector<double> var(n);
    double vmax = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      var[i] = cov(pts_.at(i), pts_.at(i), d);
      vmax = std::max(vmax, var[i]);
    }
    const double zero_tol = vmax * 1e-14;
    live_.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
      if (var[i] > zero_tol) live_.push_back(i);

    const std::size_t m = live_.size();
    n_total_ = n;
    if (m == 0) return;  // identically zero field
    Eigen::MatrixXd a(m, m);
    double diag_mean = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        const double c = cov(pts_.at(live_[i]), pts_.at(live_[j]), d);
        a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = c;
        a(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = c;
      }
      diag_mean += a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
    }
    diag_mean /= static_cast<double>(m);

    double jitter = 0.0;
    for (int attempt = 0; attempt < 6; ++attempt) {
      Eigen::MatrixXd aj = a;
      if (jitter > 0.0)
        aj.diagonal().array() += jitter;
      Eigen::LLT<Eigen::MatrixXd> llt(aj);
      if (llt.info() == Eigen::Success) {
        chol_ = llt.matrixL();
        return;
      }
      jitter = (jitter == 0.0) ? diag_mean * 1e-14 : jitter * 10.0;
      if (jitter > diag_mean * 1e-10 * 1.0000001) break;
    }
    throw NotPsdError("covariance matrix is not positive semidefinite within jitter budget");
  }

  // Consumes exactly (number of nonzero-variance points) normals.
  void sample(RngStream& rng, std::vector<double>& w) const {
    w.assign(n_total_, 0.0);
    const auto m = static_cast<Eigen::Index>(live_.size());
    if (m == 0) return;
    Eigen::VectorXd z(m);
    for (Eigen::Index i = 0; i < m; ++i) z(i) = rng.normal();
    Eigen::VectorXd x = chol_ * z;
    for (Eigen::Index i = 0; i < m; ++i) w[live_[static_cast<std::size_t>(i)]] = x(i);
  }

  std::size_t normals_per_path() const { return live_.size(); }
  const PointSet& points() const { return pts_; }

 private:
  PointSet pts_;
  std::vector<std::size_t> live_;
  std::size_t n_total_ = 0;
  Eigen::MatrixXd chol_;
};

// Covariance induced by a variance function (stationary increments, W(0)=0).
inline CholeskySampler::Cov covariance_of(const VarianceFunction& vf) {
  return [vf](const double* s, const double* t, int d) { return covariance(vf, s, t, d); };
}

// Sampler for W on a uniform 1-d mesh lo + i*spacing, i = 0..n-1, that must
// contain the origin; paths satisfy W(0) = 0 exactly. Picks the cheapest
// exact strategy: rank-one for purely quadratic variance, circulant
// embedding otherwise, dense Cholesky as the fallback when the embedding is
// not PSD.
class MeshGaussian1D {
 public:
  enum class Path { RankOne, Circulant, Cholesky };

  MeshGaussian1D(const VarianceFunction& vf, double lo, double spacing, std::size_t n)
      : lo_(lo), spacing_(spacing), n_(n) {
    if (n < 1) throw ConfigError("MeshGaussian1D: empty mesh");
    if (!(spacing > 0.0)) throw ConfigError("MeshGaussian1D: spacing must be > 0");
    const double iorig = -lo / spacing;
    origin_ = static_cast<std::size_t>(std::llround(iorig));
    if (origin_ >= n || std::abs(iorig - static_cast<double>(origin_)) > 1e-6)
      throw ConfigError("MeshGaussian1D: origin must lie on the mesh");
    linear_c_ = vf.linear_coeff();
    if (linear_c_ > 0.0) {
      path_ = Path::RankOne;
      return;
    }
    if (n >= 2) {
      try {
        circ_.emplace(vf, n, spacing);
        path_ = Path::Circulant;
        return;
      } catch (const EmbeddingNotPsdError&) {
        // fall through to dense Cholesky below
      }
    }
    PointSet pts;
    pts.d = 1;
    pts.coords.resize(n);
    for (std::size_t i = 0; i < n; ++i) pts.coords[i] = point(i);
    chol_.emplace(std::move(pts), covariance_of(vf));
    path_ = Path::Cholesky;
  }

  double point(std::size_t i) const { return lo_ + static_cast<double>(i) * spacing_; }
  std::size_t size() const { return n_; }
  Path path() const { return path_; }

  void sample(RngStream& rng, std::vector<double>& w) const {
    switch (path_) {
      case Path::RankOne: {
        const double xi = rng.normal();
        w.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) w[i] = linear_c_ * point(i) * xi;
        return;
      }
      case Path::Circulant: {
        circ_->sample(rng, w);
        const double w0 = w[origin_];
        for (auto& x : w) x -= w0;  // re-anchor: mesh start -> origin
        return;
      }
      case Path::Cholesky:
        chol_->sample(rng, w);
        return;
    }
  }

 private:
  double lo_, spacing_;
  std::size_t n_, origin_ = 0;
  double linear_c_ = -1.0;
  Path path_ = Path::Cholesky;
  std::optional<CirculantSampler> circ_;
  std::optional<CholeskySampler> chol_;
};

// Sampler for W over an arbitrary point set in any dimension with W(0) = 0:
// rank-one when the variance is purely quadratic, dense Cholesky otherwise.
class PointGaussian {
 public:
  PointGaussian(const VarianceFunction& vf, PointSet pts) {
    linear_c_ = vf.linear_coeff();
    if (linear_c_ > 0.0 && pts.d <= 8) {
      pts_ = std::move(pts);
      return;
    }
    linear_c_ = -1.0;
    chol_.emplace(std::move(pts), covariance_of(vf));
  }

  const PointSet& points() const { return chol_ ? chol_->points() : pts_; }

  void sample(RngStream& rng, std::vector<double>& w) const {
    if (chol_) {
      chol_->sample(rng, w);
      return;
    }
    const int d = pts_.d;
    double xi[8];
    for (int k = 0; k < d; ++k) xi[k] = rng.normal();
    const std::size_t n = pts_.size();
    w.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double* t = pts_.at(i);
      double dot = 0.0;
      for (int k = 0; k < d; ++k) dot += t[k] * xi[k];
      w[i] = linear_c_ * dot;
    }
  }

 private:
  double linear_c_ = -1.0;
  PointSet pts_;
  std::optional<CholeskySampler> chol_;
};

}  // namespace pickands
