#pragma once

// In-place complex FFT of any length: iterative radix-2 for powers of two,
// Bluestein's chirp-z for everything else. Both directions are unnormalized.

#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

namespace qcs::fft {

using Complex = std::complex<double>;

namespace detail {

inline Complex unit_root(double turns) {
  const double angle = 2.0 * std::numbers::pi * turns;
  return {std::cos(angle), std::sin(angle)};
}

inline void radix2(std::span<Complex> a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    std::vector<Complex> tw(half);
    for (std::size_t k = 0; k < half; ++k) {
      tw[k] = unit_root(sign * static_cast<double>(k) / static_cast<double>(len));
    }
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const Complex u = a[start + k];
        const Complex v = a[start + k + half] * tw[k];
        a[start + k] = u + v;
        a[start + k + half] = u - v;
      }
    }
  }
}

inline void bluestein(std::span<Complex> a, bool inverse) {
  const std::size_t n = a.size();
  const std::size_t m = std::bit_ceil(2 * n - 1);
  const double sign = inverse ? 1.0 : -1.0;

  // chirp_k = exp(sign * i pi k^2 / n); k^2 reduced mod 2n keeps the angle small.
  std::vector<Complex> chirp(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t k2 = (k * k) % (2 * n);
    chirp[k] = unit_root(sign * 0.5 * static_cast<double>(k2) / static_cast<double>(n));
  }
  std::vector<Complex> lhs(m), rhs(m);
  for (std::size_t k = 0; k < n; ++k) lhs[k] = a[k] * chirp[k];
  rhs[0] = std::conj(chirp[0]);
  for (std::size_t k = 1; k < n; ++k) rhs[k] = rhs[m - k] = std::conj(chirp[k]);

  radix2(lhs, false);
  radix2(rhs, false);
  for (std::size_t k = 0; k < m; ++k) lhs[k] *= rhs[k];
  radix2(lhs, true);
  const double scale = 1.0 / static_cast<double>(m);
  for (std::size_t k = 0; k < n; ++k) a[k] = lhs[k] * scale * chirp[k];
}

}  // namespace detail

inline void transform(std::span<Complex> data, bool inverse) {
  const std::size_t n = data.size();
  if (n <= 1) return;
  if (std::has_single_bit(n)) {
    detail::radix2(data, inverse);
  } else {
    detail::bluestein(data, inverse);
  }
}

}  // namespace qcs::fft
