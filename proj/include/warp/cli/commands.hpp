// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

#include "warp/cli/config.hpp"

namespace warp::cli {

/// Exit codes shared by every command.
enum ExitCode : int { kOk = 0, kIoFailure = 1, kInvalid = 2, kDiverged = 3 };

struct CommandOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::string> preset;
  std::optional<std::uint64_t> seed;  // overrides dataset.seed and train.seed
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> context;
  std::optional<std::filesystem::path> out;
  std::optional<std::filesystem::path> checkpoint;  // eval / analyze input
  std::optional<std::filesystem::path> dataset;     // eval / analyze input
  bool resume = false;
  bool force = false;
};

/// Preset, then config file, then flags; the result is fully validated.
ExperimentConfig resolve_config(const CommandOptions& opt);

/// Layout of one experiment directory.
struct ExperimentPaths {
  std::filesystem::path root;

  std::filesystem::path train_data() const { return root / "dataset" / "train.wds"; }
  std::filesystem::path test_data() const { return root / "dataset" / "test.wds"; }
  std::filesystem::path checkpoints() const { return root / "checkpoints"; }
  std::filesystem::path last_checkpoint() const { return checkpoints() / "last.ck"; }
  std::filesystem::path loss_csv() const { return root / "metrics" / "loss.csv"; }
  std::filesystem::path eval_csv() const { return root / "metrics" / "eval.csv"; }
  std::filesystem::path analysis() const { return root / "analysis"; }
  std::filesystem::path manifest() const { return root / "manifest.txt"; }
};

void cmd_generate(const ExperimentConfig& cfg, const CommandOptions& opt, std::ostream& log);
void cmd_train(const ExperimentConfig& cfg, const CommandOptions& opt, std::ostream& log);
void cmd_eval(const ExperimentConfig& cfg, const CommandOptions& opt, std::ostream& log);
void cmd_analyze(const ExperimentConfig& cfg, const CommandOptions& opt, std::ostream& log);

/// Resolves the config, dispatches, and maps failures to exit codes with a
/// one-line message on `err`.
int run_command(std::string_view command, const CommandOptions& opt, std::ostream& out, std::ostream& err);

}  // namespace warp::cli
