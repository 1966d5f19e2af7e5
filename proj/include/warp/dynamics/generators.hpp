// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "warp/dynamics/rk45.hpp"

namespace warp::dynamics {

enum class Split { train, test };
std::string_view to_string(Split s);

struct MsdParams {
  double m = 1, k = 1, c = 0;
};
struct LvParams {
  double alpha = 1, beta = 1, gamma = 1, delta = 1;
};

struct MsdRanges {
  double m_lo, m_hi, k_lo, k_hi, c_lo, c_hi;
};
struct LvRanges {
  double a_lo, a_hi, b_lo, b_hi, g_lo, g_hi, d_lo, d_hi;
};
MsdRanges msd_ranges(Split s);
LvRanges lv_ranges(Split s);
inline constexpr double kSinePhaseLimit = 0.52359877559829887;  // pi / 6

VectorField msd_field(const MsdParams& p);
VectorField lv_field(const LvParams& p);

/// Raw trajectories, each (steps + 1) x D on the uniform grid t_k = k / (steps - 1).
struct Trajectories {
  std::vector<Matrix> seqs;
  std::vector<std::vector<double>> params;  // per sequence, in field order
  std::size_t resampled = 0;                // integration failures replaced by a fresh draw
};

/// Mass-spring-damper. `zero_variant` draws x0 uniformly in [-1, 1]^2 instead of (1, 0).
Trajectories gen_msd(std::size_t n, Split split, std::size_t steps, std::uint64_t seed, bool zero_variant = false);

/// Lotka-Volterra from x0 = equilibrium (gamma/delta, alpha/beta) scaled per coordinate by U[0.5, 1.5].
Trajectories gen_lv(std::size_t n, Split split, std::size_t steps, std::uint64_t seed);

/// Sine curves sin(2 pi t + phi), phi ~ U[-pi/6, pi/6], sampled at t_k = k / (steps - 1), steps + 1 points.
Trajectories gen_sine(std::size_t n, Split split, std::size_t steps, std::uint64_t seed);

/// Named SINE split sizes: tiny 1, small 10, medium 100, large 1000, huge 10000.
std::size_t sine_split_size(std::string_view name);

struct Spirals {
  std::vector<Matrix> seqs;  // 64 x 2 each
  std::vector<std::uint16_t> labels;
};

/// Decaying two-turn spirals; label 1 counter-clockwise, label 0 clockwise.
Spirals gen_spirals(std::size_t n, std::uint64_t seed, std::size_t points = 64);

/// Segment length and layout of the repeat-copy target.
inline constexpr std::size_t kCopySegment = 78;
inline constexpr std::size_t kCopyDelimiter = 10;
inline constexpr double kCopyFill = -1.0;

/// target = [seg, D, seg, D, seg, pad] for a 256 x D input with seg = input[0:78].
Matrix repeat_copy_lv(const Matrix& input);

/// Signed area sum_k (x_k y_{k+1} - x_{k+1} y_k) of a 2-D polyline.
double signed_area(const Matrix& pts);

}  // namespace warp::dynamics
