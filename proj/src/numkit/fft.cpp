// SPDX-License-Identifier: Apache-2.0
#include "warp/numkit/fft.hpp"

#include <cmath>
#include <numbers>
#include <utility>

#include "warp/errors.hpp"

namespace warp::numkit {

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

void fft_inplace(Spectrum& a, bool inverse) {
  const std::size_t n = a.size();
  require(n > 0 && (n & (n - 1)) == 0, "fft: size must be a power of two");

  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * std::numbers::pi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    const std::size_t half = len / 2;
    // Twiddles computed directly per index; a running product drifts for long transforms.
    for (std::size_t k = 0; k < half; ++k) {
      const std::complex<double> w(std::cos(ang * static_cast<double>(k)),
                                   std::sin(ang * static_cast<double>(k)));
      for (std::size_t i = 0; i < n; i += len) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + half] * w;
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }

  if (inverse) {
    const double s = 1.0 / static_cast<double>(n);
    for (auto& x : a) x *= s;
  }
}

Spectrum spectrum_padded(std::span<const double> x, std::size_t n) {
  require(x.size() <= n, "spectrum_padded: sequence longer than transform");
  Spectrum s(n);
  for (std::size_t i = 0; i < x.size(); ++i) s[i] = x[i];
  fft_inplace(s, false);
  return s;
}

Vector fft_causal_conv(std::span<const double> kernel, std::span<const double> signal) {
  require(!kernel.empty() && !signal.empty(), "fft_causal_conv: empty input");
  const std::size_t n = next_pow2(kernel.size() + signal.size() - 1);
  Spectrum fk = spectrum_padded(kernel, n);
  const Spectrum fs = spectrum_padded(signal, n);
  for (std::size_t i = 0; i < n; ++i) fk[i] *= fs[i];
  fft_inplace(fk, true);
  Vector out(signal.size());
  for (std::size_t t = 0; t < signal.size(); ++t) out[t] = fk[t].real();
  return out;
}

}  // namespace warp::numkit
