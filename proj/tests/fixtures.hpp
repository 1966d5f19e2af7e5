#pragma once
// Random small models and sequences shared by the test binaries.

#include <cmath>
#include <cstdint>

#include "warp/numkit/rng.hpp"
#include "warp/warpcell/model.hpp"

namespace warp::testing {

using numkit::Matrix;
using numkit::RngStream;

inline Matrix random_matrix(RngStream& rng, std::size_t r, std::size_t c, double s = 1.0) {
  Matrix m(r, c);
  for (double& v : m.flat()) v = rng.uniform(-s, s);
  return m;
}

/// Fills every learnable array with random values. Dense transitions are kept
/// near the identity with spectral norm close to one so long scans stay bounded.
inline void randomize(warpcell::WarpModel& model, std::uint64_t seed, double a_scale = 0.3, double b_scale = 0.5) {
  RngStream rng(seed, 77);
  auto& p = model.params();
  const std::size_t d = model.d_theta();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const std::string& name = p[i].name;
    Matrix& v = p.value(i);
    if (name == "A") {
      for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c = 0; c < d; ++c)
          v(r, c) = (r == c ? 1.0 - a_scale * 0.5 : 0.0) + rng.uniform(-a_scale, a_scale) / std::sqrt(double(d));
    } else if (name == "A.diag") {
      for (double& x : v.flat()) x = rng.uniform(0.7, 1.0);
    } else if (name == "A.core" || name == "A.P" || name == "A.Q") {
      for (double& x : v.flat()) x = rng.uniform(-0.6, 0.6);
    } else if (name == "B") {
      for (double& x : v.flat()) x = rng.uniform(-b_scale, b_scale);
    } else if (name == "head.dyn_tanh") {
      v = Matrix(4, 1, std::vector<double>{rng.uniform(0.8, 2.0), rng.uniform(-0.2, 0.2), rng.uniform(0.8, 2.0),
                                           rng.uniform(-0.2, 0.2)});
    } else {
      for (double& x : v.flat()) x = rng.uniform(-0.8, 0.8);
    }
  }
}

inline Matrix random_inputs(RngStream& rng, std::size_t steps, std::size_t d_x, double s = 1.0) {
  Matrix m(steps, d_x);
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t j = 0; j < d_x; ++j) m(t, j) = s * std::sin(0.3 * double(t) + double(j)) + rng.uniform(-0.2, 0.2);
  return m;
}

/// Point-head spec whose root has exactly the given width and depth.
inline warpcell::ModelSpec small_spec(std::size_t d_x, std::size_t d_y, std::size_t width, std::size_t depth,
                                      warpcell::InitMode init = warpcell::InitMode::direct) {
  warpcell::ModelSpec s;
  s.d_x = d_x;
  s.d_y = d_y;
  s.root = {width, depth, d_y, rootnet::Activation::swish};
  s.init = init;
  return s;
}

}  // namespace warp::testing
