// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <vector>

#include "warp/gradengine/params.hpp"

namespace warp::grad {

/// Rescales `g` in place so that its global L2 norm is at most g_lim.
/// Returns the norm before clipping.
double clip_grad_norm(GradStore& g, double g_lim);

struct OptState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-16;
  std::uint64_t step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> s;

  OptState() = default;
  OptState(const ParamSet& p, double learning_rate);

  bool operator==(const OptState&) const = default;
};

/// One AdaBelief update of every array in `params`.
void adabelief_step(OptState& opt, ParamSet& params, const GradStore& g);

/// Reduce-on-plateau: a running window of iteration losses is compared at
/// each epoch end against the best window average seen so far.
struct PlateauState {
  std::size_t window = 50;
  std::size_t patience = 20;
  double factor = 0.5;
  double threshold = 1e-3;
  std::deque<double> recent;
  double best = std::numeric_limits<double>::infinity();
  bool has_best = false;
  std::size_t since_improvement = 0;

  void record(double iteration_loss);
  double window_average() const;

  bool operator==(const PlateauState&) const = default;
};

/// Compares `avg` with the best average so far. The first call only sets the
/// reference. After `patience` non-improving calls the learning rate is
/// multiplied by `factor` and the counter restarts. Returns true on reduction.
bool plateau_update(PlateauState& ps, double avg, double& lr);

}  // namespace warp::grad
