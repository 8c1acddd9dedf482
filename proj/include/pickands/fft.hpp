#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "pickands/errors.hpp"

namespace pickands::detail {

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 transform. Forward:
//   X_k = sum_j x_j exp(-2*pi*i*j*k/n);
// inverse includes the 1/n factor. Thread-safe (no global plan state).
inline void fft_pow2(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  if (n <= 1) return;
  if (!is_pow2(n)) throw Error("fft_pow2: size must be a power of two");

  for (std::size_t i = 1, j = 0; i < n; ++i) {  // bit-reversal permutation
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  const double pi = 3.14159265358979323846;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * pi / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse) {
    const double inv = 1.0 / static_cast<double>(n);
    for (auto& x : a) x *= inv;
  }
}

// Arbitrary-size transform: radix-2 when possible, otherwise Bluestein's
// chirp-z reduction to a power-of-two convolution. Same normalisation as
// fft_pow2.
inline void fft_any(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  if (n <= 1) return;
  if (is_pow2(n)) {
    fft_pow2(a, inverse);
    return;
  }
  if (inverse) {  // ifft(a) = conj(fft(conj(a))) / n
    for (auto& x : a) x = std::conj(x);
    fft_any(a, false);
    const double inv = 1.0 / static_cast<double>(n);
    for (auto& x : a) x = std::conj(x) * inv;
    return;
  }

  const double pi = 3.14159265358979323846;
  // Chirp w_m = exp(-i*pi*m^2/n); m^2 taken mod 2n to preserve precision.
  std::vector<std::complex<double>> chirp(n);
  for (std::size_t m = 0; m < n; ++m) {
    const std::size_t m2 = (m * m) % (2 * n);
    const double ang = -pi * static_cast<double>(m2) / static_cast<double>(n);
    chirp[m] = {std::cos(ang), std::sin(ang)};
  }

  std::size_t m = 1;
  while (m < 2 * n - 1) m <<= 1;
  std::vector<std::complex<double>> fa(m, {0.0, 0.0}), fb(m, {0.0, 0.0});
  for (std::size_t j = 0; j < n; ++j) fa[j] = a[j] * chirp[j];
  fb[0] = std::conj(chirp[0]);
  for (std::size_t j = 1; j < n; ++j) fb[j] = fb[m - j] = std::conj(chirp[j]);

  fft_pow2(fa, false);
  fft_pow2(fb, false);
  for (std::size_t j = 0; j < m; ++j) fa[j] *= fb[j];
  fft_pow2(fa, true);

  for (std::size_t k = 0; k < n; ++k) a[k] = fa[k] * chirp[k];
}

}  // namespace pickands::detail
