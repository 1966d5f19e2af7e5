// SPDX-License-Identifier: Apache-2.0
#include "warp/dynamics/generators.hpp"

#include <cmath>
#include <numbers>

#include "warp/errors.hpp"
#include "warp/numkit/rng.hpp"

namespace warp::dynamics {

using numkit::RngStream;

namespace {
constexpr std::uint64_t kMsdTag = 0x4d5344;
constexpr std::uint64_t kLvTag = 0x4c56;
constexpr std::uint64_t kSineTag = 0x53494e45;
constexpr std::uint64_t kSpiralTag = 0x535049;
constexpr std::size_t kMaxResample = 100;

RngStream sequence_rng(std::uint64_t seed, std::uint64_t tag, Split split, std::size_t index, std::size_t attempt) {
  return RngStream(seed, numkit::stream_key(tag ^ (static_cast<std::uint64_t>(split) << 32), index, attempt));
}

std::vector<double> uniform_grid(std::size_t steps) {
  require(steps >= 2, "generator: need at least 2 steps");
  std::vector<double> g(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) g[k] = static_cast<double>(k) / static_cast<double>(steps - 1);
  return g;
}
}  // namespace

std::string_view to_string(Split s) { return s == Split::train ? "train" : "test"; }

MsdRanges msd_ranges(Split s) {
  if (s == Split::train) return {0.02, 0.04, 4.0, 16.0, 0.01, 0.2};
  return {0.01, 0.05, 2.0, 18.0, 0.01, 0.3};
}

LvRanges lv_ranges(Split s) {
  if (s == Split::train) return {20, 50, 80, 120, 80, 120, 20, 50};
  return {10, 60, 70, 130, 70, 130, 10, 60};
}

VectorField msd_field(const MsdParams& p) {
  return [p](double, std::span<const double> x, std::span<double> dx) {
    dx[0] = x[1];
    dx[1] = -(p.k * x[0] + p.c * x[1]) / p.m;
  };
}

VectorField lv_field(const LvParams& p) {
  return [p](double, std::span<const double> x, std::span<double> dx) {
    dx[0] = p.alpha * x[0] - p.beta * x[0] * x[1];
    dx[1] = p.delta * x[0] * x[1] - p.gamma * x[1];
  };
}

Trajectories gen_msd(std::size_t n, Split split, std::size_t steps, std::uint64_t seed, bool zero_variant) {
  require(n >= 1, "gen_msd: n must be >= 1");
  const auto grid = uniform_grid(steps);
  const MsdRanges r = msd_ranges(split);
  Trajectories out;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t attempt = 0;; ++attempt) {
      require(attempt < kMaxResample, "gen_msd: too many integration failures");
      RngStream rng = sequence_rng(seed, kMsdTag + zero_variant, split, i, attempt);
      MsdParams p{rng.uniform(r.m_lo, r.m_hi), rng.uniform(r.k_lo, r.k_hi), rng.uniform(r.c_lo, r.c_hi)};
      std::vector<double> x0{1.0, 0.0};
      if (zero_variant) x0 = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
      try {
        out.seqs.push_back(rk45_integrate(msd_field(p), x0, grid));
        out.params.push_back({p.m, p.k, p.c, x0[0], x0[1]});
        break;
      } catch (const IntegrationError&) {
        ++out.resampled;
      }
    }
  }
  return out;
}

Trajectories gen_lv(std::size_t n, Split split, std::size_t steps, std::uint64_t seed) {
  require(n >= 1, "gen_lv: n must be >= 1");
  const auto grid = uniform_grid(steps);
  const LvRanges r = lv_ranges(split);
  Trajectories out;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t attempt = 0;; ++attempt) {
      require(attempt < kMaxResample, "gen_lv: too many integration failures");
      RngStream rng = sequence_rng(seed, kLvTag, split, i, attempt);
      LvParams p{rng.uniform(r.a_lo, r.a_hi), rng.uniform(r.b_lo, r.b_hi), rng.uniform(r.g_lo, r.g_hi),
                 rng.uniform(r.d_lo, r.d_hi)};
      std::vector<double> x0{p.gamma / p.delta * rng.uniform(0.5, 1.5), p.alpha / p.beta * rng.uniform(0.5, 1.5)};
      try {
        out.seqs.push_back(rk45_integrate(lv_field(p), x0, grid));
        out.params.push_back({p.alpha, p.beta, p.gamma, p.delta, x0[0], x0[1]});
        break;
      } catch (const IntegrationError&) {
        ++out.resampled;
      }
    }
  }
  return out;
}

Trajectories gen_sine(std::size_t n, Split split, std::size_t steps, std::uint64_t seed) {
  require(n >= 1, "gen_sine: n must be >= 1");
  const auto grid = uniform_grid(steps);
  Trajectories out;
  for (std::size_t i = 0; i < n; ++i) {
    RngStream rng = sequence_rng(seed, kSineTag, split, i, 0);
    const double phi = rng.uniform(-kSinePhaseLimit, kSinePhaseLimit);
    Matrix s(grid.size(), 1);
    for (std::size_t k = 0; k < grid.size(); ++k) s(k, 0) = std::sin(2.0 * std::numbers::pi * grid[k] + phi);
    out.seqs.push_back(std::move(s));
    out.params.push_back({phi});
  }
  return out;
}

std::size_t sine_split_size(std::string_view name) {
  if (name == "tiny") return 1;
  if (name == "small") return 10;
  if (name == "medium") return 100;
  if (name == "large") return 1000;
  if (name == "huge") return 10000;
  throw ValidationError("unknown SINE split '" + std::string(name) + "'");
}

Spirals gen_spirals(std::size_t n, std::uint64_t seed, std::size_t points) {
  if (n == 0 || n % 2 != 0) throw ContractViolation("gen_spirals: n must be even and positive");
  require(points >= 2, "gen_spirals: need at least 2 points");
  const double last = static_cast<double>(points - 1);
  Spirals out;
  for (std::size_t i = 0; i < n; ++i) {
    RngStream rng(seed, numkit::stream_key(kSpiralTag, i));
    const double psi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const bool ccw = i >= n / 2;
    Matrix s(points, 2);
    for (std::size_t k = 0; k < points; ++k) {
      const double t = 4.0 * std::numbers::pi * static_cast<double>(k) / last;
      const double r = 1.0 - 0.85 * static_cast<double>(k) / last;
      s(k, 0) = r * std::cos(t + psi);
      s(k, 1) = (ccw ? 1.0 : -1.0) * r * std::sin(t + psi);
    }
    out.seqs.push_back(std::move(s));
    out.labels.push_back(ccw ? 1 : 0);
  }
  RngStream shuffle(seed, numkit::stream_key(kSpiralTag, ~std::uint64_t{0}));
  for (std::size_t i = n; i-- > 1;) {
    const std::size_t j = shuffle.below(i + 1);
    std::swap(out.seqs[i], out.seqs[j]);
    std::swap(out.labels[i], out.labels[j]);
  }
  return out;
}

Matrix repeat_copy_lv(const Matrix& input) {
  if (input.rows() != 256) throw ContractViolation("repeat_copy_lv: input must have T = 256 rows");
  const std::size_t d = input.cols();
  Matrix target(256, d, kCopyFill);
  std::size_t pos = 0;
  for (int rep = 0; rep < 3; ++rep) {
    for (std::size_t k = 0; k < kCopySegment; ++k, ++pos)
      for (std::size_t j = 0; j < d; ++j) target(pos, j) = input(k, j);
    if (rep < 2) pos += kCopyDelimiter;
  }
  return target;
}

double signed_area(const Matrix& pts) {
  require(pts.cols() == 2, "signed_area: points must be 2-D");
  double a = 0.0;
  for (std::size_t k = 0; k + 1 < pts.rows(); ++k) a += pts(k, 0) * pts(k + 1, 1) - pts(k + 1, 0) * pts(k, 1);
  return a;
}

}  // namespace warp::dynamics
