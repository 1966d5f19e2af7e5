// SPDX-License-Identifier: Apache-2.0
#include "warp/rootnet/rootnet.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "warp/errors.hpp"

namespace warp::rootnet {

Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::relu;
  if (s == "swish") return Activation::swish;
  if (s == "identity") return Activation::identity;
  throw ValidationError("unknown activation '" + std::string(s) + "'");
}

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::swish: return "swish";
    case Activation::identity: return "identity";
  }
  return "?";
}

namespace {
double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
}  // namespace

double activate(Activation a, double x) {
  switch (a) {
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::swish: return x * sigmoid(x);
    case Activation::identity: return x;
  }
  return x;
}

double activate_grad(Activation a, double x) {
  switch (a) {
    case Activation::relu: return x > 0.0 ? 1.0 : 0.0;
    case Activation::swish: {
      const double s = sigmoid(x);
      return s + x * s * (1.0 - s);
    }
    case Activation::identity: return 1.0;
  }
  return 1.0;
}

std::size_t param_count(const RootSpec& spec) {
  require(spec.width >= 1, "RootSpec: width must be >= 1");
  require(spec.depth >= 1, "RootSpec: depth must be >= 1");
  require(spec.out_dim >= 1, "RootSpec: output dimension must be >= 1");
  const std::size_t w = spec.width;
  return 2 * w + (spec.depth - 1) * (w + 1) * w + (w + 1) * spec.out_dim;
}

std::vector<std::pair<std::size_t, std::size_t>> layer_shapes(const RootSpec& spec) {
  param_count(spec);
  std::vector<std::pair<std::size_t, std::size_t>> shapes;
  shapes.emplace_back(spec.width, 1);
  for (std::size_t i = 1; i < spec.depth; ++i) shapes.emplace_back(spec.width, spec.width);
  shapes.emplace_back(spec.out_dim, spec.width);
  return shapes;
}

Vector flatten(std::span<const Layer> layers) {
  Vector out;
  for (const auto& l : layers) {
    require(l.bias.size() == l.weight.rows(), "flatten: bias length != weight rows");
    out.insert(out.end(), l.weight.flat().begin(), l.weight.flat().end());
    out.insert(out.end(), l.bias.begin(), l.bias.end());
  }
  return out;
}

std::vector<Layer> unflatten(std::span<const double> theta, const RootSpec& spec) {
  if (theta.size() != param_count(spec))
    throw ContractViolation("unflatten: state has " + std::to_string(theta.size()) +
                            " entries, spec needs " + std::to_string(param_count(spec)));
  std::vector<Layer> layers;
  std::size_t off = 0;
  for (auto [rows, cols] : layer_shapes(spec)) {
    Layer l;
    l.weight = Matrix(rows, cols,
                      std::vector<double>(theta.begin() + off, theta.begin() + off + rows * cols));
    off += rows * cols;
    l.bias.assign(theta.begin() + off, theta.begin() + off + rows);
    off += rows;
    layers.push_back(std::move(l));
  }
  return layers;
}

Vector forward(std::span<const double> theta, const RootSpec& spec, double tau) {
  if (theta.size() != param_count(spec))
    throw ContractViolation("forward: state length does not match root spec");
  const auto shapes = layer_shapes(spec);
  Vector h{tau};
  std::size_t off = 0;
  for (std::size_t li = 0; li < shapes.size(); ++li) {
    const auto [rows, cols] = shapes[li];
    const double* w = theta.data() + off;
    const double* b = w + rows * cols;
    off += rows * cols + rows;
    Vector z(rows);
    const bool last = li + 1 == shapes.size();
    for (std::size_t r = 0; r < rows; ++r) {
      double acc = b[r];
      for (std::size_t c = 0; c < cols; ++c) acc += w[r * cols + c] * h[c];
      z[r] = last ? acc : activate(spec.activation, acc);
      if (!std::isfinite(z[r]))
        throw OverflowError("root network produced a non-finite value in layer " +
                            std::to_string(li));
    }
    h = std::move(z);
  }
  return h;
}

OutputKind parse_output_kind(std::string_view s) {
  if (s == "point") return OutputKind::point;
  if (s == "gaussian") return OutputKind::gaussian;
  if (s == "sine-phase") return OutputKind::sine_phase;
  if (s == "msd-expm") return OutputKind::msd_expm;
  throw ValidationError("unknown head '" + std::string(s) + "'");
}

std::string_view to_string(OutputKind k) {
  switch (k) {
    case OutputKind::point: return "point";
    case OutputKind::gaussian: return "gaussian";
    case OutputKind::sine_phase: return "sine-phase";
    case OutputKind::msd_expm: return "msd-expm";
  }
  return "?";
}

Squash parse_squash(std::string_view s) {
  if (s == "none") return Squash::none;
  if (s == "clip") return Squash::minmax_clip;
  if (s == "dyn-tanh") return Squash::dynamic_tanh;
  throw ValidationError("unknown squash '" + std::string(s) + "'");
}

std::string_view to_string(Squash s) {
  switch (s) {
    case Squash::none: return "none";
    case Squash::minmax_clip: return "clip";
    case Squash::dynamic_tanh: return "dyn-tanh";
  }
  return "?";
}

std::size_t head_arity(OutputKind kind, std::size_t d_y) {
  switch (kind) {
    case OutputKind::point: return d_y;
    case OutputKind::gaussian: return 2 * d_y;
    case OutputKind::sine_phase: return 1;
    case OutputKind::msd_expm: return 4;
  }
  return d_y;
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

HeadOutput apply_head(const RootHead& head, std::span<const double> raw, double tau,
                      std::span<const double> x0) {
  require(head.d_lim > 0.0, "RootHead: d_lim must be positive");
  require(head.sigma_min > 0.0, "RootHead: sigma_min must be positive");
  HeadOutput out;
  switch (head.output) {
    case OutputKind::point:
      require(!raw.empty(), "apply_head: empty raw output");
      out.mean.assign(raw.begin(), raw.end());
      break;
    case OutputKind::gaussian: {
      require(!raw.empty() && raw.size() % 2 == 0, "apply_head: gaussian head needs 2*D_y raw values");
      const std::size_t d = raw.size() / 2;
      out.mean.assign(raw.begin(), raw.begin() + d);
      out.sigma.resize(d);
      for (std::size_t i = 0; i < d; ++i)
        out.sigma[i] = std::max(softplus(raw[d + i]), head.sigma_min);
      break;
    }
    case OutputKind::sine_phase:
      require(raw.size() == 1, "apply_head: sine-phase head needs exactly 1 raw value");
      out.mean = {std::sin(2.0 * std::numbers::pi * tau + raw[0])};
      break;
    case OutputKind::msd_expm:
      require(raw.size() == 4, "apply_head: msd-expm head needs exactly 4 raw values");
      require(x0.size() == 2, "apply_head: msd-expm head needs a 2-dimensional x0");
      out.mean = {raw[0] * x0[0] + raw[1] * x0[1], raw[2] * x0[0] + raw[3] * x0[1]};
      break;
  }
  switch (head.squash) {
    case Squash::none: break;
    case Squash::minmax_clip:
      for (auto& v : out.mean) v = std::clamp(v, -head.d_lim, head.d_lim);
      break;
    case Squash::dynamic_tanh:
      for (auto& v : out.mean)
        v = head.dyn.alpha * std::tanh((v - head.dyn.b) / head.dyn.a) + head.dyn.beta;
      break;
  }
  return out;
}

}  // namespace warp::rootnet
