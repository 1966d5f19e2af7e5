// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "warp/numkit/matrix.hpp"

namespace warp::numkit {

using Spectrum = std::vector<std::complex<double>>;

/// Smallest power of two >= n (n >= 1).
std::size_t next_pow2(std::size_t n);

/// In-place iterative radix-2 FFT. Size must be a power of two.
/// The inverse transform includes the 1/n scaling.
void fft_inplace(Spectrum& a, bool inverse);

/// Transform of `x` zero-padded to length `n` (a power of two).
Spectrum spectrum_padded(std::span<const double> x, std::size_t n);

/// out[t] = sum_{l=0..min(t, Tk-1)} kernel[l] * signal[t-l], for t < signal.size().
/// Both sequences are zero-padded to a power of two >= Tk+Ts-1 before transforming.
Vector fft_causal_conv(std::span<const double> kernel, std::span<const double> signal);

}  // namespace warp::numkit
