// SPDX-License-Identifier: Apache-2.0
#include "warp/cli/commands.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "warp/cli/presets.hpp"
#include "warp/errors.hpp"
#include "warp/evalkit/csv.hpp"
#include "warp/evalkit/diagnostics.hpp"
#include "warp/trainer/checkpoint.hpp"
#include "warp/trainer/evaluate.hpp"

namespace warp::cli {

namespace fs = std::filesystem;
using evalkit::CsvTable;
using evalkit::format_number;

namespace {

std::string hex(std::uint64_t v) {
  std::ostringstream o;
  o << std::hex << v;
  return o.str();
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Merges `entries` into manifest.txt, a sorted `key=value` file.
void update_manifest(const ExperimentPaths& p, const std::map<std::string, std::string>& entries) {
  std::map<std::string, std::string> kv;
  if (std::ifstream is(p.manifest()); is) {
    for (std::string line; std::getline(is, line);) {
      const auto eq = line.find('=');
      if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
  }
  for (const auto& [k, v] : entries) kv[k] = v;
  fs::create_directories(p.root);
  std::ofstream os(p.manifest(), std::ios::binary);
  if (!os) throw IoError("cannot write " + p.manifest().string());
  for (const auto& [k, v] : kv) os << k << '=' << v << '\n';
}

std::map<std::string, std::string> config_entries(const ExperimentConfig& cfg) {
  std::map<std::string, std::string> kv;
  std::istringstream in(cfg.to_text());
  for (std::string line; std::getline(in, line);) {
    const auto eq = line.find(" = ");
    kv["config." + line.substr(0, eq)] = line.substr(eq + 3);
  }
  return kv;
}

dynamics::Dataset load_existing(const fs::path& path, const char* what) {
  if (!fs::exists(path)) throw IoError(std::string(what) + " not found: " + path.string() + " (run generate first)");
  return dynamics::load_dataset(path);
}

std::uint64_t run_hash(const ExperimentConfig& cfg, const fs::path& train_file) {
  return dynamics::fnv1a(hex(cfg.resume_hash()) + ":" + hex(dynamics::file_hash(train_file)));
}

CsvTable loss_table() {
  CsvTable t;
  t.header = {"epoch", "loss", "lr"};
  return t;
}

/// Rows of an existing loss CSV whose epoch is below `keep_below`.
CsvTable previous_losses(const fs::path& path, std::size_t keep_below) {
  CsvTable t = loss_table();
  std::ifstream is(path);
  if (!is) return t;
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    if (cells.size() == 3 && std::stoull(cells[0]) < keep_below) t.rows.push_back(cells);
  }
  return t;
}

trainer::WarpModel checkpoint_model(const ExperimentPaths& p, const CommandOptions& opt) {
  const fs::path path = opt.checkpoint.value_or(p.last_checkpoint());
  if (!fs::exists(path)) throw IoError("checkpoint not found: " + path.string());
  return trainer::restore_model(trainer::load_checkpoint(path));
}

dynamics::Dataset eval_dataset(const ExperimentPaths& p, const CommandOptions& opt,
                               const trainer::WarpModel& model) {
  const auto ds = load_existing(opt.dataset.value_or(p.test_data()), "dataset");
  if (ds.d_x != model.spec().d_x || ds.d_y != model.spec().d_y)
    throw ValidationError("dataset dimensions (" + std::to_string(ds.d_x) + ", " + std::to_string(ds.d_y) +
                          ") do not match the checkpoint (" + std::to_string(model.spec().d_x) + ", " +
                          std::to_string(model.spec().d_y) + ")");
  return ds;
}

}  // namespace

ExperimentConfig resolve_config(const CommandOptions& opt) {
  ExperimentConfig cfg;
  if (opt.preset) cfg.merge_text(preset_text(*opt.preset), "preset " + *opt.preset);
  if (opt.config) cfg.merge_file(*opt.config);
  if (opt.seed) {
    cfg.set("dataset.seed", std::to_string(*opt.seed));
    cfg.set("train.seed", std::to_string(*opt.seed));
  }
  if (opt.epochs) cfg.set("train.epochs", std::to_string(*opt.epochs));
  if (opt.context) cfg.set("dataset.context", std::to_string(*opt.context));
  if (opt.out) cfg.set("output.dir", opt.out->string());
  cfg.validate();
  return cfg;
}

void cmd_generate(const ExperimentConfig& cfg, const CommandOptions& opt, std::ostream& log) {
  const ExperimentPaths p{cfg.output_dir()};
  if (!opt.force && (fs::exists(p.train_data()) || fs::exists(p.test_data())))
    throw IoError("dataset files already exist under " + (p.root / "dataset").string() + " (use --force)");
  const auto pair = dynamics::generate(cfg.gen_spec());
  dynamics::save_dataset(pair.train, p.train_data());
  dynamics::save_dataset(pair.test, p.test_data());
  auto kv = config_entries(cfg);
  kv["dataset.train.hash"] = hex(dynamics::file_hash(p.train_data()));
  kv["dataset.test.hash"] = hex(dynamics::file_hash(p.test_data()));
  kv["dataset.train.size"] = std::to_string(pair.train.size());
  kv["dataset.test.size"] = std::to_string(pair.test.size());
  kv["generate.timestamp"] = utc_now();
  update_manifest(p, kv);
  log << "generated " << pair.train.size() << " train and " << pair.test.size() << " test sequences ("
      << pair.train.system << ", T=" << pair.train.steps << ") in " << (p.root / "dataset").string() << "\n";
}

void cmd_train(const ExperimentConfig& cfg, const CommandOptions& opt, std::ostream& log) {
  const ExperimentPaths p{cfg.output_dir()};
  const auto data = load_existing(p.train_data(), "training dataset");
  const auto spec = cfg.model_spec(data.d_x, data.d_y);
  const auto tc = cfg.train_config();
  const std::uint64_t hash = run_hash(cfg, p.train_data());

  std::optional<trainer::WarpModel> model;
  trainer::TrainState state;
  if (opt.resume) {
    if (!fs::exists(p.last_checkpoint())) throw IoError("nothing to resume: " + p.last_checkpoint().string());
    const auto ck = trainer::load_checkpoint(p.last_checkpoint());
    if (ck.config_hash != hash)
      throw ValidationError("refusing to resume: config or training data differ from the checkpoint");
    model.emplace(trainer::restore_model(ck));
    state = ck.state;
  } else {
    if (!opt.force && fs::exists(p.last_checkpoint()))
      throw IoError("checkpoint already exists: " + p.last_checkpoint().string() + " (use --resume or --force)");
    model.emplace(trainer::build_model(spec, data, tc.seed));
    state = trainer::TrainState(*model, tc);
  }

  CsvTable losses = opt.resume ? previous_losses(p.loss_csv(), state.epoch) : loss_table();
  const std::size_t every = cfg.checkpoint_every();
  auto hook = [&](const trainer::EpochRecord& r, const trainer::TrainState& st) {
    losses.add_row(std::to_string(r.epoch), {r.loss, r.lr});
    if (every > 0 && st.epoch % every == 0) {
      const auto ck = trainer::make_checkpoint(*model, st, tc.seed, hash);
      char name[32];
      std::snprintf(name, sizeof name, "epoch-%06zu.ck", st.epoch);
      trainer::save_checkpoint(ck, p.checkpoints() / name);
      trainer::save_checkpoint(ck, p.last_checkpoint());
      evalkit::write_csv(p.loss_csv(), losses);
    }
  };
  const auto trace = trainer::train(*model, data, tc, state, hook);
  trainer::save_checkpoint(trainer::make_checkpoint(*model, state, tc.seed, hash), p.last_checkpoint());
  evalkit::write_csv(p.loss_csv(), losses);

  auto kv = config_entries(cfg);
  kv["train.config_hash"] = hex(hash);
  kv["train.epochs_done"] = std::to_string(state.epoch);
  kv["train.checkpoint.hash"] = hex(dynamics::file_hash(p.last_checkpoint()));
  kv["train.timestamp"] = utc_now();
  update_manifest(p, kv);
  log << "trained " << trace.size() << " epoch(s), now at epoch " << state.epoch;
  if (!trace.empty()) log << ", last loss " << format_number(trace.back().loss);
  log << "\n";
}

void cmd_eval(const ExperimentConfig& cfg, const CommandOptions& opt, std::ostream& log) {
  const ExperimentPaths p{cfg.output_dir()};
  const auto model = checkpoint_model(p, opt);
  const auto data = eval_dataset(p, opt, model);
  evalkit::MetricReport rep;
  if (data.labelled()) {
    rep = trainer::evaluate_classify(trainer::WarpClassifier(model), data);
  } else {
    rep = trainer::evaluate_forecast(trainer::WarpForecaster(model), data, cfg.context());
  }
  evalkit::write_csv(p.eval_csv(), evalkit::report_table(rep));
  update_manifest(p, {{"eval.hash", hex(dynamics::file_hash(p.eval_csv()))},
                      {"eval.window", rep.window},
                      {"eval.timestamp", utc_now()}});
  log << "window " << rep.window << ", " << rep.count << " sequence(s)\n";
  for (std::size_t k = 0; k < rep.names.size(); ++k)
    log << rep.names[k] << " " << (rep.applicable ? format_number(rep.aggregate[k]) : std::string("NA")) << "\n";
  if (rep.skipped) log << "mape skipped " << rep.skipped << " near-zero target(s)\n";
}

void cmd_analyze(const ExperimentConfig& cfg, const CommandOptions& opt, std::ostream& log) {
  const ExperimentPaths p{cfg.output_dir()};
  const auto model = checkpoint_model(p, opt);
  const auto data = eval_dataset(p, opt, model);
  if (data.labelled()) throw ValidationError("analyze needs a forecasting dataset and checkpoint");
  const trainer::WarpForecaster f(model);
  const auto states = f.states(trainer::sequences(data.inputs, data.steps, data.d_x), cfg.context());

  const auto pca = evalkit::weight_pca(states);
  CsvTable proj;
  proj.header = {"sequence", "t", "pc1", "pc2"};
  for (std::size_t i = 0; i < pca.projections.size(); ++i)
    for (std::size_t t = 0; t < pca.projections[i].rows(); ++t)
      proj.rows.push_back({std::to_string(i), std::to_string(t), format_number(pca.projections[i](t, 0)),
                           format_number(pca.projections[i](t, 1))});
  CsvTable explained;
  explained.header = {"component", "explained"};
  explained.add_row("pc1", {pca.explained[0]});
  explained.add_row("pc2", {pca.explained[1]});

  CsvTable norms;
  norms.header = {"sequence", "t", "norm"};
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto n = evalkit::successive_norms(states[i]);
    for (std::size_t t = 0; t < n.size(); ++t)
      norms.rows.push_back({std::to_string(i), std::to_string(t + 1), format_number(n[t])});
  }

  const auto r = evalkit::theta_tau_correlation(states);
  CsvTable corr;
  corr.header = {"coordinate", "r"};
  std::size_t strong = 0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    corr.add_row(std::to_string(i), {r[i]});
    strong += std::abs(r[i]) >= 0.5;
  }

  evalkit::write_csv(p.analysis() / "pca_projections.csv", proj);
  evalkit::write_csv(p.analysis() / "pca_explained.csv", explained);
  evalkit::write_csv(p.analysis() / "successive_norms.csv", norms);
  evalkit::write_csv(p.analysis() / "theta_tau.csv", corr);
  update_manifest(p, {{"analyze.timestamp", utc_now()}});
  log << "pca explained " << format_number(pca.explained[0]) << " " << format_number(pca.explained[1]) << "\n"
      << "coordinates with |r| >= 0.5: " << strong << " of " << r.size() << "\n";
}

int run_command(std::string_view command, const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  try {
    const auto cfg = resolve_config(opt);
    if (command == "generate") cmd_generate(cfg, opt, out);
    else if (command == "train") cmd_train(cfg, opt, out);
    else if (command == "eval") cmd_eval(cfg, opt, out);
    else if (command == "analyze") cmd_analyze(cfg, opt, out);
    else throw ValidationError("unknown command '" + std::string(command) + "'");
    return kOk;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIoFailure;
  } catch (const DivergenceError& e) {
    err << "diverged: " << e.what() << "\n";
    return kDiverged;
  } catch (const OverflowError& e) {
    err << "diverged: " << e.what() << "\n";
    return kDiverged;
  } catch (const IntegrationError& e) {
    err << "diverged: " << e.what() << "\n";
    return kDiverged;
  } catch (const std::invalid_argument& e) {
    err << "invalid: " << e.what() << "\n";
    return kInvalid;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kIoFailure;
  }
}

}  // namespace warp::cli
