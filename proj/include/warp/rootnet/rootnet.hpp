// SPDX-License-Identifier: Apache-2.0
#pragma once

// The root network: a small MLP R -> R^out whose flattened weights are the
// recurrent state. It is evaluated at the normalized time tau, and its raw
// output is turned into a prediction by a head.

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "warp/numkit/matrix.hpp"

namespace warp::rootnet {

using numkit::Matrix;
using numkit::Vector;

enum class Activation { relu, swish, identity };

Activation parse_activation(std::string_view s);
std::string_view to_string(Activation a);

double activate(Activation a, double x);
double activate_grad(Activation a, double x);

/// Architecture of the root MLP. Input is always the scalar tau.
/// `depth` counts hidden layers; `out_dim` is the raw output width the head consumes.
struct RootSpec {
  std::size_t width = 1;
  std::size_t depth = 1;
  std::size_t out_dim = 1;
  Activation activation = Activation::swish;

  bool operator==(const RootSpec&) const = default;
};

/// Weights + biases, excluding any head scalars.
std::size_t param_count(const RootSpec& spec);

struct Layer {
  Matrix weight;  // fan_out x fan_in
  Vector bias;    // fan_out

  bool operator==(const Layer&) const = default;
};

/// Layer shapes in evaluation order: (width x 1), (depth-1) x (width x width), (out x width).
std::vector<std::pair<std::size_t, std::size_t>> layer_shapes(const RootSpec& spec);

/// Layer-major; within a layer the weight matrix row-major, then the bias.
Vector flatten(std::span<const Layer> layers);
std::vector<Layer> unflatten(std::span<const double> theta, const RootSpec& spec);

/// Flat root weights together with the architecture needed to decode them.
struct WeightState {
  Vector theta;
  RootSpec spec;
};

/// Raw root output at tau. Throws OverflowError naming the layer on a non-finite value.
Vector forward(std::span<const double> theta, const RootSpec& spec, double tau);
inline Vector forward(const WeightState& s, double tau) { return forward(s.theta, s.spec, tau); }

// ---------------------------------------------------------------- heads

enum class OutputKind {
  point,       // mean = raw
  gaussian,    // raw = (mean, sigma~), sigma = max(softplus(sigma~), sigma_min)
  sine_phase,  // raw = (phase), mean = sin(2 pi tau + phase)
  msd_expm,    // raw = row-major 2x2 E, mean = E * x0
};

enum class Squash { none, minmax_clip, dynamic_tanh };

OutputKind parse_output_kind(std::string_view s);
std::string_view to_string(OutputKind k);
Squash parse_squash(std::string_view s);
std::string_view to_string(Squash s);

/// Learnable scalars of alpha * tanh((x - b) / a) + beta.
struct DynTanh {
  double a = 1.0;
  double b = 0.0;
  double alpha = 1.0;
  double beta = 0.0;

  bool operator==(const DynTanh&) const = default;
};

struct RootHead {
  OutputKind output = OutputKind::point;
  Squash squash = Squash::none;
  double d_lim = 1.0;
  double sigma_min = 1e-4;
  DynTanh dyn;

  bool operator==(const RootHead&) const = default;
};

/// Raw root outputs the head needs for a D_y-dimensional prediction.
std::size_t head_arity(OutputKind kind, std::size_t d_y);

struct HeadOutput {
  Vector mean;
  Vector sigma;  // empty unless gaussian
};

double softplus(double x);

/// Applies the head. `tau` is used by sine_phase, `x0` by msd_expm.
HeadOutput apply_head(const RootHead& head, std::span<const double> raw, double tau,
                      std::span<const double> x0 = {});

}  // namespace warp::rootnet
