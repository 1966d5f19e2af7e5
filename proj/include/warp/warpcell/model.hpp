// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "warp/gradengine/params.hpp"
#include "warp/rootnet/rootnet.hpp"

namespace warp::warpcell {

using grad::ParamSet;
using numkit::Matrix;
using numkit::Vector;

enum class TransitionKind { dense, diagonal, low_rank };
enum class InitMode { hypernet, direct };

TransitionKind parse_transition(std::string_view s);
std::string_view to_string(TransitionKind k);
InitMode parse_init_mode(std::string_view s);
std::string_view to_string(InitMode m);

/// Decoding point used when the fixed-tau ablation is on.
inline constexpr double kFixedTau = 0.5;

struct ModelSpec {
  std::size_t d_x = 1;
  std::size_t d_y = 1;
  rootnet::RootSpec root;  // out_dim must equal head_arity(head.output, d_y)
  rootnet::RootHead head;
  TransitionKind transition = TransitionKind::dense;
  std::size_t rank = 0;  // low-rank only
  InitMode init = InitMode::hypernet;
  std::optional<double> w_lim;
  bool fixed_tau = false;

  bool operator==(const ModelSpec&) const = default;
};

/// Throws ValidationError describing the first inconsistency.
void validate(const ModelSpec& spec);

struct HyperNetSpec {
  std::size_t d_in = 1;
  std::size_t d_out = 1;
  std::size_t h1 = 1;
  std::size_t h2 = 1;
};

/// Hidden widths floor(h_in/3 + 2 h_out/3) and floor(2 h_in/3 + h_out/3), ordered
/// ascending toward the output (D_x=3, D_theta=9 gives 5 then 7).
HyperNetSpec hypernet_spec(std::size_t d_in, std::size_t d_out);

/// Learnable bundle. Arrays are enumerated in this order:
///   transition ("A" | "A.diag" | "A.P", "A.core", "A.Q"), "B",
///   initial state ("theta0" | "phi.W0", "phi.b0", "phi.W1", "phi.b1", "phi.W2", "phi.b2"),
///   "head.dyn_tanh" (4 x 1: a, b, alpha, beta) when the head squashes with dynamic tanh.
class WarpModel {
 public:
  /// Fresh model: A = I (or its structured equivalent), B = 0, initial-state
  /// weights drawn uniformly in +-1/sqrt(fan_in) from stream (seed, 0).
  WarpModel(ModelSpec spec, std::uint64_t seed);

  const ModelSpec& spec() const noexcept { return spec_; }
  std::size_t d_theta() const noexcept { return d_theta_; }
  const HyperNetSpec& hypernet() const noexcept { return hyper_; }

  ParamSet& params() noexcept { return params_; }
  const ParamSet& params() const noexcept { return params_; }

  std::size_t slot_b() const noexcept { return slot_b_; }
  std::size_t slot_transition(std::size_t k = 0) const noexcept { return slot_a_ + k; }
  std::size_t slot_init(std::size_t k = 0) const noexcept { return slot_init_ + k; }
  std::optional<std::size_t> slot_dyn() const noexcept { return slot_dyn_; }

  void set_dyn_tanh(const rootnet::DynTanh& d);
  rootnet::DynTanh dyn_tanh() const;

  /// The transition as a dense D_theta x D_theta matrix.
  Matrix dense_transition() const;

 private:
  ModelSpec spec_;
  std::size_t d_theta_ = 0;
  HyperNetSpec hyper_;
  ParamSet params_;
  std::size_t slot_a_ = 0;
  std::size_t slot_b_ = 0;
  std::size_t slot_init_ = 0;
  std::optional<std::size_t> slot_dyn_;
};

}  // namespace warp::warpcell
