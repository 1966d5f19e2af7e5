// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "warp/numkit/rng.hpp"
#include "warp/trainer/train.hpp"
#include "warp/warpcell/scan.hpp"

namespace warp::trainer {

/// Scan options the config implies for a dataset of this length.
warpcell::SequenceOptions sequence_options(const TrainConfig& cfg, const WarpModel& model);

/// Noise stream of sequence `seq` during `epoch`.
numkit::RngStream forcing_stream(std::uint64_t seed, std::size_t epoch, std::size_t seq);

/// Records scan + loss for the sequences `idx` on `g`'s tape and returns the 1 x 1 loss node.
warpcell::NodeId build_loss(warpcell::ModelGraph& g, const dynamics::Dataset& data, std::span<const std::size_t> idx,
                            const TrainConfig& cfg, std::size_t epoch);

}  // namespace warp::trainer
