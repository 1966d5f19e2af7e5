// SPDX-License-Identifier: Apache-2.0
#pragma once

// Experiment configuration: a flat set of `section.key = value` entries with
// a fixed schema. Every key has a default; unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "warp/dynamics/dataset.hpp"
#include "warp/trainer/train.hpp"
#include "warp/warpcell/model.hpp"

namespace warp::cli {

class ExperimentConfig {
 public:
  /// All schema keys at their defaults.
  ExperimentConfig();

  /// Applies `section.key = value` lines on top of the current values. Blank
  /// lines and `#` comments are ignored. Throws ValidationError naming the
  /// source and line for unknown keys, duplicates within `text`, or bad syntax.
  void merge_text(std::string_view text, std::string_view source = "<config>");
  void merge_file(const std::filesystem::path& path);

  void set(std::string_view key, std::string value);
  const std::string& get(std::string_view key) const;

  /// Canonical form: every key in schema order, one `key = value` per line.
  std::string to_text() const;

  /// Typed views. Each throws ValidationError on an unparseable or out-of-range value.
  dynamics::GenSpec gen_spec() const;
  /// Dimensions come from the dataset the model will see.
  warpcell::ModelSpec model_spec(std::size_t d_x, std::size_t d_y) const;
  trainer::TrainConfig train_config() const;
  std::size_t context() const;
  std::size_t checkpoint_every() const;
  std::filesystem::path output_dir() const;

  /// Checks every typed view (model dimensions inferred from the system).
  void validate() const;

  /// Hash over the dataset, model and train blocks except the epoch budget and
  /// checkpoint cadence, so a run may be extended on resume.
  std::uint64_t resume_hash() const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// (D_x, D_y) of a system's datasets; D_y is the class count when labelled.
std::pair<std::size_t, std::size_t> system_dims(dynamics::System s);

}  // namespace warp::cli
