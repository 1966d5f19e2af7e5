// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "warp/dynamics/dataset.hpp"
#include "warp/gradengine/optim.hpp"
#include "warp/warpcell/model.hpp"

namespace warp::trainer {

using numkit::Matrix;
using warpcell::WarpModel;

enum class LossKind { mse, nll, cce };
enum class TrainMode { recurrent_ar, recurrent_non_ar, convolutional };

LossKind parse_loss(std::string_view s);
std::string_view to_string(LossKind k);
TrainMode parse_mode(std::string_view s);  // "ar" | "non-ar" | "conv"
std::string_view to_string(TrainMode m);

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  double p_forcing = 1.0;
  LossKind loss = LossKind::mse;
  TrainMode mode = TrainMode::recurrent_non_ar;
  std::uint64_t seed = 0;
  double g_lim = 1e-7;
  /// Reparameterized sampling of fed-back predictions (gaussian head, AR mode).
  bool sample = true;
};

/// Throws ValidationError on an inconsistent config, or one that does not fit
/// the model and dataset.
void validate(const TrainConfig& cfg, const WarpModel& model, const dynamics::Dataset& train);

/// Everything that evolves across epochs besides the model weights.
struct TrainState {
  grad::OptState opt;
  grad::PlateauState plateau;
  std::size_t epoch = 0;  // next epoch to run; all per-epoch randomness is keyed by it

  TrainState() = default;
  TrainState(const WarpModel& model, const TrainConfig& cfg) : opt(model.params(), cfg.lr) {}

  bool operator==(const TrainState&) const = default;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;  // mean of the epoch's iteration losses
  double lr = 0.0;    // learning rate after the plateau update

  bool operator==(const EpochRecord&) const = default;
};

using EpochHook = std::function<void(const EpochRecord&, const TrainState&)>;

/// Fresh model for `train`: sets the dynamic-tanh scalars to (a, b, alpha, beta) =
/// (m, 0, m, 0), m being the largest absolute target in the split.
WarpModel build_model(const warpcell::ModelSpec& spec, const dynamics::Dataset& train, std::uint64_t seed);

/// Runs epochs state.epoch .. cfg.epochs - 1. Divergence or overflow surfaces as
/// DivergenceError whose message names the epoch.
std::vector<EpochRecord> train(WarpModel& model, const dynamics::Dataset& data, const TrainConfig& cfg,
                               TrainState& state, const EpochHook& hook = {});

std::vector<EpochRecord> train(WarpModel& model, const dynamics::Dataset& data, const TrainConfig& cfg);

/// Mean-over-batch loss of the given sequences and its gradient.
struct BatchResult {
  double loss = 0.0;
  grad::GradStore grads;
};

/// `epoch` selects the forcing noise streams, so a fixed (epoch, indices)
/// pair always reproduces the same loss.
BatchResult batch_loss(const WarpModel& model, const dynamics::Dataset& data, std::span<const std::size_t> idx,
                       const TrainConfig& cfg, std::size_t epoch = 0, bool with_grad = true);

}  // namespace warp::trainer
