// SPDX-License-Identifier: Apache-2.0
#include "warp/warpcell/model.hpp"

#include <algorithm>
#include <cmath>

#include "warp/errors.hpp"
#include "warp/numkit/rng.hpp"

namespace warp::warpcell {

TransitionKind parse_transition(std::string_view s) {
  if (s == "dense") return TransitionKind::dense;
  if (s == "diagonal") return TransitionKind::diagonal;
  if (s == "low-rank") return TransitionKind::low_rank;
  throw ValidationError("unknown transition '" + std::string(s) + "'");
}

std::string_view to_string(TransitionKind k) {
  switch (k) {
    case TransitionKind::dense: return "dense";
    case TransitionKind::diagonal: return "diagonal";
    case TransitionKind::low_rank: return "low-rank";
  }
  return "?";
}

InitMode parse_init_mode(std::string_view s) {
  if (s == "hypernet") return InitMode::hypernet;
  if (s == "direct") return InitMode::direct;
  throw ValidationError("unknown init mode '" + std::string(s) + "'");
}

std::string_view to_string(InitMode m) { return m == InitMode::hypernet ? "hypernet" : "direct"; }

void validate(const ModelSpec& s) {
  if (s.d_x == 0 || s.d_y == 0) throw ValidationError("model: d_x and d_y must be >= 1");
  if (s.root.width == 0 || s.root.depth == 0) throw ValidationError("model: root width and depth must be >= 1");
  if (s.root.out_dim != rootnet::head_arity(s.head.output, s.d_y))
    throw ValidationError("model: root output width does not match the head");
  if (s.head.output == rootnet::OutputKind::sine_phase && s.d_y != 1)
    throw ValidationError("model: sine-phase head requires d_y = 1");
  if (s.head.output == rootnet::OutputKind::msd_expm && (s.d_y != 2 || s.d_x != 2))
    throw ValidationError("model: msd-expm head requires d_x = d_y = 2");
  if (!(s.head.d_lim > 0.0)) throw ValidationError("model: d_lim must be positive");
  if (!(s.head.sigma_min > 0.0)) throw ValidationError("model: sigma_min must be positive");
  if (s.w_lim && !(*s.w_lim > 0.0)) throw ValidationError("model: w_lim must be positive");
  const std::size_t d = rootnet::param_count(s.root);
  if (s.transition == TransitionKind::low_rank && (s.rank == 0 || s.rank > d))
    throw ValidationError("model: low-rank transition needs 1 <= rank <= D_theta");
}

HyperNetSpec hypernet_spec(std::size_t d_in, std::size_t d_out) {
  require(d_in >= 1 && d_out >= 1, "hypernet_spec: dimensions must be >= 1");
  const std::size_t a = (d_in + 2 * d_out) / 3;
  const std::size_t b = (2 * d_in + d_out) / 3;
  HyperNetSpec h;
  h.d_in = d_in;
  h.d_out = d_out;
  h.h1 = std::max<std::size_t>(1, std::min(a, b));
  h.h2 = std::max<std::size_t>(1, std::max(a, b));
  return h;
}

namespace {

Matrix uniform_matrix(numkit::RngStream& rng, std::size_t rows, std::size_t cols, double bound) {
  Matrix m(rows, cols);
  for (double& v : m.flat()) v = rng.uniform(-bound, bound);
  return m;
}

}  // namespace

WarpModel::WarpModel(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  validate(spec_);
  d_theta_ = rootnet::param_count(spec_.root);
  const std::size_t d = d_theta_;
  numkit::RngStream rng(seed, 0);

  slot_a_ = params_.size();
  switch (spec_.transition) {
    case TransitionKind::dense:
      params_.add("A", Matrix::identity(d));
      break;
    case TransitionKind::diagonal:
      params_.add("A.diag", Matrix(d, 1, 1.0));
      break;
    case TransitionKind::low_rank: {
      const std::size_t r = spec_.rank;
      Matrix p(d, r), q(r, d);
      for (std::size_t i = 0; i < r; ++i) {
        p(i, i) = 1.0;
        q(i, i) = 1.0;
      }
      params_.add("A.P", std::move(p));
      params_.add("A.core", Matrix(r, r));
      params_.add("A.Q", std::move(q));
      break;
    }
  }

  slot_b_ = params_.add("B", Matrix(d, spec_.d_x));

  slot_init_ = params_.size();
  if (spec_.init == InitMode::direct) {
    Vector theta;
    for (auto [rows, cols] : rootnet::layer_shapes(spec_.root)) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
      for (std::size_t i = 0; i < rows * cols + rows; ++i) theta.push_back(rng.uniform(-bound, bound));
    }
    params_.add("theta0", Matrix(d, 1, std::move(theta)));
  } else {
    hyper_ = hypernet_spec(spec_.d_x, d);
    const std::size_t widths[4] = {spec_.d_x, hyper_.h1, hyper_.h2, d};
    for (std::size_t l = 0; l < 3; ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(widths[l]));
      params_.add("phi.W" + std::to_string(l), uniform_matrix(rng, widths[l + 1], widths[l], bound));
      params_.add("phi.b" + std::to_string(l), uniform_matrix(rng, widths[l + 1], 1, bound));
    }
  }

  if (spec_.head.squash == rootnet::Squash::dynamic_tanh) {
    const auto& dt = spec_.head.dyn;
    slot_dyn_ = params_.add("head.dyn_tanh", Matrix(4, 1, std::vector<double>{dt.a, dt.b, dt.alpha, dt.beta}));
  }
}

void WarpModel::set_dyn_tanh(const rootnet::DynTanh& dt) {
  require(slot_dyn_.has_value(), "set_dyn_tanh: model head does not use dynamic tanh");
  require(std::isfinite(dt.a) && dt.a != 0.0 && std::isfinite(dt.b) && std::isfinite(dt.alpha) &&
              std::isfinite(dt.beta),
          "set_dyn_tanh: scalars must be finite with a != 0");
  params_.value(*slot_dyn_) = Matrix(4, 1, std::vector<double>{dt.a, dt.b, dt.alpha, dt.beta});
}

rootnet::DynTanh WarpModel::dyn_tanh() const {
  if (!slot_dyn_) return spec_.head.dyn;
  const Matrix& m = params_.value(*slot_dyn_);
  return {m(0, 0), m(1, 0), m(2, 0), m(3, 0)};
}

Matrix WarpModel::dense_transition() const {
  switch (spec_.transition) {
    case TransitionKind::dense:
      return params_.value(slot_a_);
    case TransitionKind::diagonal: {
      Matrix a(d_theta_, d_theta_);
      for (std::size_t i = 0; i < d_theta_; ++i) a(i, i) = params_.value(slot_a_)(i, 0);
      return a;
    }
    case TransitionKind::low_rank: {
      Matrix a = numkit::matmul(numkit::matmul(params_.value(slot_a_), params_.value(slot_a_ + 1)),
                                params_.value(slot_a_ + 2));
      for (std::size_t i = 0; i < d_theta_; ++i) a(i, i) += 1.0;
      return a;
    }
  }
  return {};
}

}  // namespace warp::warpcell
