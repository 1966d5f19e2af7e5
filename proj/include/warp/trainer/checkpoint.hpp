// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "warp/trainer/train.hpp"

namespace warp::trainer {

inline constexpr std::uint16_t kCheckpointVersion = 1;

/// Model spec, learnables and the full training state after `state.epoch` epochs.
struct Checkpoint {
  warpcell::ModelSpec spec;
  grad::ParamSet params;
  TrainState state;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;

  bool operator==(const Checkpoint&) const = default;
};

Checkpoint make_checkpoint(const WarpModel& model, const TrainState& state, std::uint64_t seed,
                           std::uint64_t config_hash);

/// Rebuilds the model and copies the stored arrays into it; names and shapes must match.
WarpModel restore_model(const Checkpoint& ck);

/// `key=value` lines describing a model spec, and the inverse.
std::string spec_to_text(const warpcell::ModelSpec& spec);
warpcell::ModelSpec spec_from_text(std::string_view text);

std::string encode_checkpoint(const Checkpoint& ck);
/// Throws IoError on bad magic, unknown version or truncation.
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace warp::trainer
