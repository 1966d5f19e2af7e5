// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>

#include "warp/numkit/matrix.hpp"

namespace warp::dynamics {

using numkit::Matrix;
using numkit::Vector;

/// dx = f(t, x)
using VectorField = std::function<void(double t, std::span<const double> x, std::span<double> dx)>;

struct Rk45Config {
  double atol = 1e-8;
  double rtol = 1e-6;
  double first_step = 0.0;  // 0 selects the step automatically
  double max_step = std::numeric_limits<double>::infinity();
};

struct Rk45Stats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t evaluations = 0;
};

/// Dormand-Prince 5(4) with local extrapolation, error-based step control and
/// a 4th-order continuous extension evaluated at the grid points.
/// grid[0] is the initial time; the result has one row per grid point.
/// Throws IntegrationError if the step size underflows.
Matrix rk45_integrate(const VectorField& f, std::span<const double> x0, std::span<const double> grid,
                      const Rk45Config& cfg = {}, Rk45Stats* stats = nullptr);

}  // namespace warp::dynamics
