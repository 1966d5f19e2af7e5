// SPDX-License-Identifier: Apache-2.0
#include "warp/dynamics/rk45.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "warp/errors.hpp"

namespace warp::dynamics {

namespace {

constexpr int kStages = 6;
constexpr std::array<double, 6> kC = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0};
constexpr double kA[6][5] = {
    {0, 0, 0, 0, 0},
    {1.0 / 5, 0, 0, 0, 0},
    {3.0 / 40, 9.0 / 40, 0, 0, 0},
    {44.0 / 45, -56.0 / 15, 32.0 / 9, 0, 0},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729, 0},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
};
constexpr std::array<double, 6> kB = {35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84};
constexpr std::array<double, 7> kE = {-71.0 / 57600, 0, 71.0 / 16695, -71.0 / 1920, 17253.0 / 339200, -22.0 / 525,
                                      1.0 / 40};
// Continuous extension: y(t + s h) = y + h * sum_j (K^T P)[:, j] s^(j+1).
constexpr double kP[7][4] = {
    {1, -8048581381.0 / 2820520608, 8663915743.0 / 2820520608, -12715105075.0 / 11282082432},
    {0, 0, 0, 0},
    {0, 131558114200.0 / 32700410799, -68118460800.0 / 10900136933, 87487479700.0 / 32700410799},
    {0, -1754552775.0 / 470086768, 14199869525.0 / 1410260304, -10690763975.0 / 1880347072},
    {0, 127303824393.0 / 49829197408, -318862633887.0 / 49829197408, 701980252875.0 / 199316789632},
    {0, -282668133.0 / 205662961, 2019193451.0 / 616988883, -1453857185.0 / 822651844},
    {0, 40617522.0 / 29380423, -110615467.0 / 29380423, 69997945.0 / 29380423},
};
constexpr double kSafety = 0.9;
constexpr double kMinFactor = 0.2;
constexpr double kMaxFactor = 10.0;
constexpr double kErrorExponent = -1.0 / 5.0;

double rms(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

Matrix rk45_integrate(const VectorField& f, std::span<const double> x0, std::span<const double> grid,
                      const Rk45Config& cfg, Rk45Stats* stats) {
  require(!x0.empty(), "rk45_integrate: empty initial state");
  require(!grid.empty(), "rk45_integrate: empty time grid");
  require(cfg.atol > 0.0 && cfg.rtol > 0.0, "rk45_integrate: tolerances must be positive");
  for (std::size_t i = 1; i < grid.size(); ++i)
    require(grid[i] > grid[i - 1], "rk45_integrate: grid must be strictly increasing");

  const std::size_t n = x0.size();
  Rk45Stats st;
  auto eval = [&](double t, std::span<const double> x, std::span<double> dx) {
    f(t, x, dx);
    ++st.evaluations;
  };

  Matrix out(grid.size(), n);
  std::copy(x0.begin(), x0.end(), out.row(0).begin());
  if (grid.size() == 1) {
    if (stats) *stats = st;
    return out;
  }

  const double t_end = grid.back();
  double t = grid[0];
  Vector y(x0.begin(), x0.end()), y_new(n), tmp(n), err(n), scaled(n);
  std::vector<Vector> k(kStages + 1, Vector(n));
  eval(t, y, k[0]);

  double h = cfg.first_step;
  if (h <= 0.0) {
    for (std::size_t i = 0; i < n; ++i) scaled[i] = y[i] / (cfg.atol + std::abs(y[i]) * cfg.rtol);
    const double d0 = rms(scaled);
    for (std::size_t i = 0; i < n; ++i) scaled[i] = k[0][i] / (cfg.atol + std::abs(y[i]) * cfg.rtol);
    const double d1 = rms(scaled);
    const double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h0 * k[0][i];
    eval(t + h0, tmp, k[1]);
    for (std::size_t i = 0; i < n; ++i)
      scaled[i] = (k[1][i] - k[0][i]) / (cfg.atol + std::abs(y[i]) * cfg.rtol);
    const double d2 = rms(scaled) / h0;
    const double h1 = (d1 <= 1e-15 && d2 <= 1e-15) ? std::max(1e-6, h0 * 1e-3)
                                                   : std::pow(0.01 / std::max(d1, d2), 1.0 / 5.0);
    h = std::min(100.0 * h0, h1);
  }
  h = std::min({h, cfg.max_step, t_end - t});

  std::size_t next = 1;
  while (next < grid.size()) {
    const double min_step = 10.0 * std::abs(std::nextafter(t, std::numeric_limits<double>::infinity()) - t);
    h = std::min({h, cfg.max_step, t_end - t});
    bool rejected = false;
    double err_norm = 0.0;
    double t_new = t;
    for (;;) {
      if (h < min_step)
        throw IntegrationError("rk45: step size underflow at t=" + std::to_string(t), t);
      t_new = t_end - t <= h ? t_end : t + h;
      h = t_new - t;
      for (int s = 1; s < kStages; ++s) {
        for (std::size_t i = 0; i < n; ++i) {
          double acc = 0.0;
          for (int j = 0; j < s; ++j) acc += kA[s][j] * k[j][i];
          tmp[i] = y[i] + h * acc;
        }
        eval(t + kC[s] * h, tmp, k[s]);
      }
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = 0; j < kStages; ++j) acc += kB[j] * k[j][i];
        y_new[i] = y[i] + h * acc;
      }
      eval(t + h, y_new, k[kStages]);
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = 0; j <= kStages; ++j) acc += kE[j] * k[j][i];
        err[i] = h * acc / (cfg.atol + std::max(std::abs(y[i]), std::abs(y_new[i])) * cfg.rtol);
      }
      err_norm = rms(err);
      if (err_norm < 1.0) break;
      ++st.rejected;
      h *= std::max(kMinFactor, kSafety * std::pow(err_norm, kErrorExponent));
      rejected = true;
    }
    ++st.accepted;

    while (next < grid.size() && grid[next] <= t_new) {
      if (grid[next] == t_new) {
        std::copy(y_new.begin(), y_new.end(), out.row(next).begin());
        ++next;
        continue;
      }
      const double s = (grid[next] - t) / h;
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        double sp = s;
        for (int j = 0; j < 4; ++j) {
          double q = 0.0;
          for (int r = 0; r <= kStages; ++r) q += k[r][i] * kP[r][j];
          acc += q * sp;
          sp *= s;
        }
        out(next, i) = y[i] + h * acc;
      }
      ++next;
    }

    double factor = err_norm == 0.0 ? kMaxFactor : std::min(kMaxFactor, kSafety * std::pow(err_norm, kErrorExponent));
    if (rejected) factor = std::min(1.0, factor);
    t = t_new;
    y.swap(y_new);
    std::swap(k[0], k[kStages]);
    h *= factor;
    if (t >= t_end) break;
  }
  for (; next < grid.size(); ++next) std::copy(y.begin(), y.end(), out.row(next).begin());
  if (stats) *stats = st;
  return out;
}

}  // namespace warp::dynamics
