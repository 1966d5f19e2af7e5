// SPDX-License-Identifier: Apache-2.0
#include "warp/gradengine/fdcheck.hpp"

#include <algorithm>
#include <cmath>

#include "warp/errors.hpp"

namespace warp::grad {

FdReport finite_diff_check(const std::function<double()>& loss, ParamSet& params,
                           const GradStore& analytic, double h) {
  require(h >= 1e-7 && h <= 1e-3, "finite_diff_check: h must lie in [1e-7, 1e-3]");
  const Vector ad = analytic.flatten();
  require(ad.size() == params.scalar_count(), "finite_diff_check: gradient length mismatch");

  FdReport rep;
  const double f0 = loss();
  for (std::size_t i = 0; i < ad.size(); ++i) {
    double& p = params.scalar(i);
    const double saved = p;
    p = saved + h;
    const double fp = loss();
    p = saved - h;
    const double fm = loss();
    p = saved;

    const double fd = (fp - fm) / (2.0 * h);
    const double err = std::abs(ad[i] - fd) / std::max(std::abs(fd), 1e-8);
    const double fwd = (fp - f0) / h;
    const double bwd = (f0 - fm) / h;
    const double jump = std::abs(fwd - bwd);
    if (jump > 1e-4 && jump > 0.05 * std::max(std::abs(fwd), std::abs(bwd))) {
      ++rep.kinks;
      rep.max_kink_error = std::max(rep.max_kink_error, err);
      continue;
    }
    ++rep.checked;
    if (err > rep.max_rel_error) {
      rep.max_rel_error = err;
      rep.worst_index = i;
    }
  }
  return rep;
}

}  // namespace warp::grad
