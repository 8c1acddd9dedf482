#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <thread>
#include <vector>

#include "pickands/errors.hpp"

namespace pickands {

// Streaming mean/variance accumulator (Welford), mergeable so that chunked
// parallel reduction is exactly associative-by-construction: chunk results
// are merged in chunk order, giving bit-identical output for any worker
// count.
struct Welford {
  std::uint64_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();

  void add(double x) {
    ++n;
    const double d0 = x - mean;
    mean += d0 / static_cast<double>(n);
    m2 += d0 * (x - mean);
    if (x < min) min = x;
    if (x > max) max = x;
  }

  void merge(const Welford& o) {
    if (o.n == 0) return;
    if (n == 0) {
      *this = o;
      return;
    }
    const double na = static_cast<double>(n), nb = static_cast<double>(o.n);
    const double d = o.mean - mean;
    const double nt = na + nb;
    mean += d * (nb / nt);
    m2 += o.m2 + d * d * (na * nb / nt);
    n += o.n;
    if (o.min < min) min = o.min;
    if (o.max > max) max = o.max;
  }

  double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
  double stderr_of_mean() const {
    return n > 1 ? std::sqrt(m2 / (static_cast<double>(n) * static_cast<double>(n - 1))) : 0.0;
  }
};

// k-variate Welford with full covariance accumulation; used when several
// statistics share common random numbers and downstream quantities need
// their joint precision (sweep gaps, extrapolation standard errors).
class VectorWelford {
 public:
  explicit VectorWelford(std::size_t k) : k_(k), mean_(k, 0.0), m2_(k * k, 0.0) {}

  void add(const double* x) {
    ++n_;
    const double n = static_cast<double>(n_);
    delta_.resize(k_);
    for (std::size_t i = 0; i < k_; ++i) delta_[i] = x[i] - mean_[i];
    for (std::size_t i = 0; i < k_; ++i) mean_[i] += delta_[i] / n;
    for (std::size_t i = 0; i < k_; ++i)
      for (std::size_t j = 0; j <= i; ++j)
        m2_[i * k_ + j] += delta_[i] * (x[j] - mean_[j]);
  }

  void merge(const VectorWelford& o) {
    if (o.n_ == 0) return;
    if (n_ == 0) {
      *this = o;
      return;
    }
    const double na = static_cast<double>(n_), nb = static_cast<double>(o.n_);
    const double nt = na + nb;
    std::vector<double> d(k_);
    for (std::size_t i = 0; i < k_; ++i) d[i] = o.mean_[i] - mean_[i];
    for (std::size_t i = 0; i < k_; ++i)
      for (std::size_t j = 0; j <= i; ++j)
        m2_[i * k_ + j] += o.m2_[i * k_ + j] + d[i] * d[j] * (na * nb / nt);
    for (std::size_t i = 0; i < k_; ++i) mean_[i] += d[i] * (nb / nt);
    n_ += o.n_;
  }

  std::uint64_t count() const { return n_; }
  std::size_t dim() const { return k_; }
  double mean(std::size_t i) const { return mean_[i]; }
  // Covariance of the sample MEANS: S_ij / (n (n-1)).
  double mean_cov(std::size_t i, std::size_t j) const {
    if (n_ < 2) return 0.0;
    const double s = (i >= j) ? m2_[i * k_ + j] : m2_[j * k_ + i];
    return s / (static_cast<double>(n_) * static_cast<double>(n_ - 1));
  }
  double stderr_of_mean(std::size_t i) const { return std::sqrt(std::max(0.0, mean_cov(i, i))); }

 private:
  std::size_t k_;
  std::uint64_t n_ = 0;
  std::vector<double> mean_, m2_;
  std::vector<double> delta_;
};

// Point estimate with Monte Carlo standard error.
struct EstimateResult {
  double estimate = 0.0;
  double stderr_est = 0.0;
  std::uint64_t reps = 0;
  double elapsed_s = 0.0;
};

// Worker-count resolution: explicit request wins; otherwise the
// PICKANDS_WORKERS environment variable; otherwise hardware concurrency.
inline int resolve_workers(int requested) {
  if (requested > 0) return std::min(requested, 1024);
  if (const char* env = std::getenv("PICKANDS_WORKERS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<int>(std::min(v, 1024L));
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

namespace detail {
inline constexpr std::uint64_t kChunkSize = 1024;

// Chunked deterministic reduction. MakeWorker: () -> (replica -> void with
// accumulate into the worker's chunk accumulator). Generic over the
// accumulator type to serve both scalar and vector reductions.
template <class Acc, class MakeWorker>
std::vector<Acc> run_chunks(std::uint64_t reps, int workers, const Acc& proto,
                            MakeWorker make_worker) {
  const std::uint64_t nchunks = (reps + kChunkSize - 1) / kChunkSize;
  std::vector<Acc> chunk_acc(static_cast<std::size_t>(nchunks), proto);
  if (nchunks == 0) return chunk_acc;
  const int nthreads = static_cast<int>(
      std::min<std::uint64_t>(static_cast<std::uint64_t>(std::max(workers, 1)), nchunks));
  std::atomic<std::uint64_t> next{0};

  auto body = [&]() {
    auto fn = make_worker();
    for (;;) {
      const std::uint64_t c = next.fetch_add(1);
      if (c >= nchunks) break;
      const std::uint64_t lo = c * kChunkSize;
      const std::uint64_t hi = std::min(reps, lo + kChunkSize);
      Acc& acc = chunk_acc[static_cast<std::size_t>(c)];
      for (std::uint64_t r = lo; r < hi; ++r) fn(r, acc);
    }
  };

  if (nthreads <= 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nthreads));
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(body);
    for (auto& t : pool) t.join();
  }
  return chunk_acc;
}
}  // namespace detail

// Scalar Monte Carlo reduction: MakeWorker: () -> (uint64_t replica ->
// double). Bit-identical across worker counts.
template <class MakeWorker>
Welford mc_reduce(std::uint64_t reps, int workers, MakeWorker make_worker) {
  auto chunks = detail::run_chunks<Welford>(
      reps, workers, Welford{}, [&make_worker]() {
        return [fn = make_worker()](std::uint64_t r, Welford& acc) mutable { acc.add(fn(r)); };
      });
  Welford total;
  for (const auto& c : chunks) total.merge(c);
  return total;
}

// Vector Monte Carlo reduction with covariance tracking: MakeWorker: () ->
// (uint64_t replica, double* out_k). Bit-identical across worker counts.
template <class MakeWorker>
VectorWelford mc_reduce_vec(std::uint64_t reps, int workers, std::size_t k,
                            MakeWorker make_worker) {
  auto chunks = detail::run_chunks<VectorWelford>(
      reps, workers, VectorWelford(k),
      [&make_worker, k]() {
        return [fn = make_worker(), buf = std::vector<double>(k)](std::uint64_t r,
                                                                  VectorWelford& acc) mutable {
          fn(r, buf.data());
          acc.add(buf.data());
        };
      });
  VectorWelford total(k);
  for (const auto& c : chunks) total.merge(c);
  return total;
}

}  // namespace pickands
