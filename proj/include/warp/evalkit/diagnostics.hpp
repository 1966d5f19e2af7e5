// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "warp/numkit/matrix.hpp"

namespace warp::evalkit {

using numkit::Matrix;
using numkit::Vector;

struct TrajectoryPca {
  std::vector<Matrix> projections;  // T_i x 2 per trajectory
  Vector explained;                 // 2 ratios, nonincreasing
  Matrix components;                // D x 2, orthonormal columns
  Vector mean;                      // global mean removed before projecting
};

/// Top-2 principal components of all points of all trajectories (each T_i x D).
/// The eigenproblem is solved on whichever of the Gram and covariance forms is
/// smaller; above `max_fit` points the fit uses an evenly strided subset.
TrajectoryPca weight_pca(const std::vector<Matrix>& trajectories, std::size_t max_fit = 400);

/// Pearson r of each coordinate against tau_t = t / (T - 1), pooled over trajectories.
/// Constant coordinates get r = 0.
Vector theta_tau_correlation(const std::vector<Matrix>& trajectories);

/// ||theta_t - theta_{t-1}||_2 for t = 1..T-1.
Vector successive_norms(const Matrix& trajectory);

}  // namespace warp::evalkit
