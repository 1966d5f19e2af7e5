// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

#include "warp/gradengine/params.hpp"

namespace warp::grad {

struct FdReport {
  double max_rel_error = 0.0;   // over smooth coordinates only
  std::size_t worst_index = 0;  // flat scalar index of the worst coordinate
  std::size_t checked = 0;
  std::size_t kinks = 0;        // coordinates excluded because one-sided slopes disagree
  double max_kink_error = 0.0;  // reported, not part of pass/fail
};

/// Central differences of `loss` against `analytic` for every scalar of `params`.
/// Relative error is |g_ad - g_fd| / max(|g_fd|, 1e-8). A coordinate whose
/// forward and backward one-sided slopes disagree is treated as sitting on a
/// kink and reported separately. `params` is restored before returning.
FdReport finite_diff_check(const std::function<double()>& loss, ParamSet& params,
                           const GradStore& analytic, double h = 1e-5);

}  // namespace warp::grad
