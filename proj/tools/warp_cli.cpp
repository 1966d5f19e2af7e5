// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "CLI11.hpp"
#include "warp/cli/commands.hpp"
#include "warp/cli/presets.hpp"

int main(int argc, char** argv) {
  using warp::cli::CommandOptions;
  CLI::App app{"warp: weight-space linear RNN experiments"};
  app.require_subcommand(1);

  CommandOptions opt;
  std::string config, preset, out, checkpoint, dataset;
  std::uint64_t seed = 0;
  std::size_t epochs = 0, context = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "config file with section.key = value lines");
    sub->add_option("--preset", preset, "shipped preset applied before --config");
    sub->add_option("--seed", seed, "overrides dataset.seed and train.seed");
    sub->add_option("--out", out, "experiment directory (overrides output.dir)");
    sub->add_flag("--force", opt.force, "overwrite existing outputs");
  };

  auto* gen = app.add_subcommand("generate", "generate train/test datasets");
  add_common(gen);
  auto* train = app.add_subcommand("train", "train a model on the generated training split");
  add_common(train);
  train->add_option("--epochs", epochs, "overrides train.epochs");
  train->add_flag("--resume", opt.resume, "continue from checkpoints/last.ck");
  for (auto* sub : {app.add_subcommand("eval", "evaluate a checkpoint on the test split"),
                    app.add_subcommand("analyze", "weight-trajectory diagnostics")}) {
    add_common(sub);
    sub->add_option("--checkpoint", checkpoint, "checkpoint file (default checkpoints/last.ck)");
    sub->add_option("--dataset", dataset, "dataset file (default dataset/test.wds)");
    sub->add_option("--context", context, "overrides dataset.context");
  }
  app.add_subcommand("presets", "list shipped presets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : warp::cli::kInvalid;
  }

  auto* sub = app.get_subcommands().front();
  if (sub->get_name() == "presets") {
    for (const auto& n : warp::cli::preset_names()) std::cout << n << "\n";
    return 0;
  }
  if (sub->count("--config")) opt.config = config;
  if (sub->count("--preset")) opt.preset = preset;
  if (sub->count("--seed")) opt.seed = seed;
  if (sub->count("--out")) opt.out = out;
  if (sub->get_option_no_throw("--epochs") && sub->count("--epochs")) opt.epochs = epochs;
  if (sub->get_option_no_throw("--checkpoint") && sub->count("--checkpoint")) opt.checkpoint = checkpoint;
  if (sub->get_option_no_throw("--dataset") && sub->count("--dataset")) opt.dataset = dataset;
  if (sub->get_option_no_throw("--context") && sub->count("--context")) opt.context = context;
  return warp::cli::run_command(sub->get_name(), opt, std::cout, std::cerr);
}
