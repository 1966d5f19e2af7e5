// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "warp/dynamics/generators.hpp"

namespace warp::dynamics {

/// Per-feature min and max of the training split. Empty vectors mean the
/// data is used as-is.
struct NormStats {
  Vector min;
  Vector max;

  bool identity() const noexcept { return min.empty(); }
  bool operator==(const NormStats&) const = default;
};

NormStats normalize_fit(const std::vector<Matrix>& train);
/// 2 (x - min) / (max - min) - 1 per column; constant features map to 0.
Matrix normalize_apply(const NormStats& s, const Matrix& x);
Matrix denormalize(const NormStats& s, const Matrix& x);

struct Dataset {
  std::string system;
  std::string split;
  std::uint64_t seed = 0;
  std::size_t steps = 0;  // T
  std::size_t d_x = 0;
  std::size_t d_y = 0;  // class count when labelled
  std::size_t context = 0;
  Matrix inputs;   // N x (T * D_x)
  Matrix targets;  // N x (T * D_y), empty when labelled
  std::vector<std::uint16_t> labels;
  NormStats stats;
  std::map<std::string, std::string> extra;

  std::size_t size() const noexcept { return inputs.rows(); }
  bool labelled() const noexcept { return !labels.empty(); }
  bool operator==(const Dataset&) const = default;
};

enum class System { msd, msd_zero, lv, lv_copy, sine, spirals };
System parse_system(std::string_view s);
std::string_view to_string(System s);

struct GenSpec {
  System system = System::sine;
  std::size_t n_train = 10;
  std::size_t n_test = 100;
  std::size_t steps = 16;
  std::size_t context = 1;
  std::uint64_t seed = 0;
};

struct DatasetPair {
  Dataset train;
  Dataset test;
};

/// Test-split size used when none is given: 10% of train, at least 100.
std::size_t default_test_size(std::size_t n_train);

/// Generates, normalizes with train statistics and splits inputs from targets
/// (y_t = x_{t+1} for forecasting, the repeat-copy target for lv-copy).
DatasetPair generate(const GenSpec& spec);

void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

/// FNV-1a 64 over a byte range / a file.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t file_hash(const std::filesystem::path& path);

}  // namespace warp::dynamics
