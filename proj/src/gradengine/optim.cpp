// SPDX-License-Identifier: Apache-2.0
#include "warp/gradengine/optim.hpp"

#include <cmath>
#include <numeric>

#include "warp/errors.hpp"

namespace warp::grad {

double clip_grad_norm(GradStore& g, double g_lim) {
  require(g_lim > 0.0, "clip_grad_norm: g_lim must be positive");
  const double n = g.norm();
  if (n > g_lim) {
    const double k = g_lim / n;
    for (std::size_t i = 0; i < g.size(); ++i)
      for (double& v : g[i].flat()) v *= k;
  }
  return n;
}

OptState::OptState(const ParamSet& p, double learning_rate) : lr(learning_rate) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    m.emplace_back(p.value(i).rows(), p.value(i).cols());
    s.emplace_back(p.value(i).rows(), p.value(i).cols());
  }
}

void adabelief_step(OptState& opt, ParamSet& params, const GradStore& g) {
  require(opt.m.size() == params.size() && g.size() == params.size(),
          "adabelief_step: optimizer, parameters and gradients are not aligned");
  ++opt.step;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
  for (std::size_t a = 0; a < params.size(); ++a) {
    auto p = params.value(a).flat();
    auto m = opt.m[a].flat();
    auto s = opt.s[a].flat();
    auto gr = g[a].flat();
    require(p.size() == gr.size() && p.size() == m.size(), "adabelief_step: array shapes differ");
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * gr[i];
      const double dev = gr[i] - m[i];
      s[i] = opt.beta2 * s[i] + (1.0 - opt.beta2) * dev * dev + opt.eps;
      const double mhat = m[i] / bc1;
      const double shat = s[i] / bc2;
      p[i] -= opt.lr * mhat / (std::sqrt(shat) + opt.eps);
    }
  }
}

void PlateauState::record(double iteration_loss) {
  recent.push_back(iteration_loss);
  while (recent.size() > window) recent.pop_front();
}

double PlateauState::window_average() const {
  if (recent.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(recent.begin(), recent.end(), 0.0) / static_cast<double>(recent.size());
}

bool plateau_update(PlateauState& ps, double avg, double& lr) {
  require(std::isfinite(avg), "plateau_update: loss must be finite");
  require(ps.factor > 0.0 && ps.factor < 1.0, "plateau_update: factor must lie in (0, 1)");
  if (ps.has_best && avg < (1.0 - ps.threshold) * ps.best) {
    ps.best = avg;
    ps.since_improvement = 0;
    return false;
  }
  if (!ps.has_best) {
    ps.best = avg;
    ps.has_best = true;
  }
  if (++ps.since_improvement >= ps.patience) {
    lr *= ps.factor;
    ps.since_improvement = 0;
    return true;
  }
  return false;
}

}  // namespace warp::grad
