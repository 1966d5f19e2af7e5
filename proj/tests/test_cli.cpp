#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "warp/cli/commands.hpp"
#include "warp/cli/config.hpp"
#include "warp/cli/presets.hpp"
#include "warp/errors.hpp"
#include "warp/trainer/checkpoint.hpp"

using namespace warp;
using namespace warp::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("warp_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path f = dir / "run.cfg";
  std::ofstream(f) << text;
  return f;
}

constexpr const char* kTinySine = R"(dataset.system = sine
dataset.n_train = 4
dataset.n_test = 3
dataset.steps = 8
dataset.context = 2
model.width = 4
model.depth = 1
model.init = hypernet
train.mode = ar
train.p_forcing = 0.5
train.epochs = 3
train.batch_size = 2
train.lr = 0.001
)";

constexpr const char* kTinySpirals = R"(dataset.system = spirals
dataset.n_train = 4
dataset.n_test = 4
dataset.steps = 8
dataset.context = 8
model.width = 4
model.depth = 1
train.loss = cce
train.mode = non-ar
train.epochs = 2
train.batch_size = 4
)";

struct Run {
  int code;
  std::string out, err;
};

Run run(std::string_view cmd, const CommandOptions& o) {
  std::ostringstream out, err;
  const int code = run_command(cmd, o, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST_CASE("config defaults and canonical text") {
  ExperimentConfig c;
  CHECK(c.get("dataset.steps") == "16");
  CHECK(c.get("train.p_forcing") == "1");
  ExperimentConfig d;
  d.merge_text(c.to_text());
  CHECK(d.to_text() == c.to_text());
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("config parsing errors carry source and line") {
  ExperimentConfig c;
  auto message = [&](const std::string& text) {
    try {
      c.merge_text(text, "f.cfg");
    } catch (const ValidationError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message("# comment\n\nmodel.colour = red\n") == "f.cfg:3: unknown config key 'model.colour'");
  CHECK(message("model.width = 3\nmodel.width = 4\n") == "f.cfg:2: duplicate key 'model.width'");
  CHECK(message("width = 3\n") == "f.cfg:1: key 'width' has no section");
  CHECK(message("model.width 3\n") == "f.cfg:1: expected 'section.key = value'");
  CHECK(message("model.width =\n") == "f.cfg:1: empty value for 'model.width'");
  CHECK_THROWS_AS(c.get("train.colour"), ValidationError);
}

TEST_CASE("typed values are checked on validation") {
  auto message = [](const std::string& text) {
    ExperimentConfig c;
    c.merge_text(text);
    try {
      c.validate();
    } catch (const ValidationError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message("model.width = many\n").starts_with("model.width: expected a non-negative integer"));
  CHECK(message("train.sample = maybe\n").starts_with("train.sample: expected true or false"));
  CHECK(message("train.lr = inf\n").starts_with("train.lr: expected a finite number"));
}

TEST_CASE("validation rejects inconsistent combinations") {
  auto rejects = [](const std::string& text) {
    ExperimentConfig c;
    c.merge_text(text);
    CHECK_THROWS_AS(c.validate(), ValidationError);
  };
  rejects("train.loss = nll\n");
  rejects("train.loss = cce\n");
  rejects("dataset.system = spirals\ntrain.loss = mse\n");
  rejects("dataset.system = spirals\ntrain.loss = cce\ntrain.mode = ar\n");
  rejects("train.mode = conv\nmodel.w_lim = 2\n");
  rejects("dataset.context = 17\n");
  rejects("train.p_forcing = 1.5\n");
  rejects("model.width = 0\n");
  rejects("dataset.system = pendulum\n");
}

TEST_CASE("presets") {
  const auto names = preset_names();
  for (const char* n : {"msd-warp", "msd-warp-phys", "msd-zero-warp", "lv-warp", "lv-copy-warp", "sine-tiny",
                        "sine-huge-phys", "spirals-warp", "desk-sine", "desk-msd", "desk-spirals"})
    CHECK(std::find(names.begin(), names.end(), n) != names.end());
  for (const auto& n : names) {
    CAPTURE(n);
    ExperimentConfig c;
    c.merge_text(preset_text(n), n);
    CHECK_NOTHROW(c.validate());
  }
  ExperimentConfig w, p;
  w.merge_text(preset_text("msd-warp"));
  p.merge_text(preset_text("msd-warp-phys"));
  CHECK(w.get("train.p_forcing") == "0.25");
  CHECK(w.get("train.epochs") == "1000");
  CHECK(w.get("model.init") == "direct");
  CHECK(p.get("model.head") == "msd-expm");
  p.set("model.head", w.get("model.head"));
  CHECK(p.to_text() == w.to_text());
  CHECK_THROWS_AS(preset_text("msd"), ValidationError);
}

TEST_CASE("resume hash ignores the epoch budget only") {
  ExperimentConfig a, b;
  b.set("train.epochs", "77");
  b.set("train.checkpoint_every", "5");
  b.set("output.dir", "elsewhere");
  CHECK(a.resume_hash() == b.resume_hash());
  b.set("train.lr", "0.5");
  CHECK(a.resume_hash() != b.resume_hash());
}

TEST_CASE("resolve_config layers preset, file and flags") {
  const auto dir = scratch("resolve");
  CommandOptions o;
  o.preset = "desk-sine";
  o.config = write_config(dir, "train.epochs = 5\nmodel.width = 3\n");
  o.epochs = 9;
  o.seed = 4;
  o.out = dir / "x";
  const auto c = resolve_config(o);
  CHECK(c.get("train.epochs") == "9");
  CHECK(c.get("model.width") == "3");
  CHECK(c.get("model.depth") == "3");
  CHECK(c.get("dataset.seed") == "4");
  CHECK(c.get("train.seed") == "4");
  CHECK(c.output_dir() == dir / "x");
  fs::remove_all(dir);
}

TEST_CASE("exit codes") {
  const auto dir = scratch("codes");
  CommandOptions o;
  o.config = write_config(dir, "dataset.system = pendulum\n");
  auto r = run("generate", o);
  CHECK(r.code == kInvalid);
  CHECK(r.err.starts_with("invalid: "));

  o.config = dir / "absent.cfg";
  CHECK(run("generate", o).code == kIoFailure);

  o.config = write_config(dir, kTinySine);
  o.out = dir / "exp";
  CHECK(run("train", o).code == kIoFailure);
  CHECK(run("eval", o).code == kIoFailure);
  CHECK(run("fly", o).code == kInvalid);
  fs::remove_all(dir);
}

TEST_CASE("generate is deterministic and refuses to overwrite") {
  const auto dir = scratch("gen");
  CommandOptions o;
  o.config = write_config(dir, kTinySine);
  o.out = dir / "a";
  REQUIRE(run("generate", o).code == kOk);
  const ExperimentPaths a{dir / "a"};
  const std::string train_bytes = slurp(a.train_data());
  CHECK(run("generate", o).code == kIoFailure);
  o.force = true;
  CHECK(run("generate", o).code == kOk);
  CHECK(slurp(a.train_data()) == train_bytes);
  o.out = dir / "b";
  REQUIRE(run("generate", o).code == kOk);
  CHECK(slurp(ExperimentPaths{dir / "b"}.test_data()) == slurp(a.test_data()));
  CHECK(slurp(a.manifest()).find("dataset.train.hash=") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("train with zero epochs saves the initialization") {
  const auto dir = scratch("zero");
  CommandOptions o;
  o.config = write_config(dir, kTinySine);
  o.out = dir / "e";
  REQUIRE(run("generate", o).code == kOk);
  o.epochs = 0;
  REQUIRE(run("train", o).code == kOk);
  const ExperimentPaths p{dir / "e"};
  const auto ck = trainer::load_checkpoint(p.last_checkpoint());
  const auto cfg = resolve_config(o);
  const auto data = dynamics::load_dataset(p.train_data());
  const auto init = trainer::build_model(cfg.model_spec(data.d_x, data.d_y), data, cfg.train_config().seed);
  CHECK(trainer::restore_model(ck).params() == init.params());
  CHECK(ck.state.epoch == 0);
  CHECK(slurp(p.loss_csv()) == "epoch,loss,lr\n");
  fs::remove_all(dir);
}

TEST_CASE("train, resume and evaluate") {
  const auto dir = scratch("resume");
  CommandOptions o;
  o.config = write_config(dir, kTinySine);
  o.out = dir / "full";
  REQUIRE(run("generate", o).code == kOk);
  REQUIRE(run("train", o).code == kOk);
  const ExperimentPaths full{dir / "full"};
  CHECK(run("train", o).code == kIoFailure);

  o.out = dir / "split";
  REQUIRE(run("generate", o).code == kOk);
  o.epochs = 1;
  REQUIRE(run("train", o).code == kOk);
  o.epochs = 3;
  o.resume = true;
  REQUIRE(run("train", o).code == kOk);
  const ExperimentPaths split{dir / "split"};
  CHECK(slurp(split.loss_csv()) == slurp(full.loss_csv()));
  CHECK(slurp(split.last_checkpoint()) == slurp(full.last_checkpoint()));

  o.config = write_config(dir, std::string(kTinySine) + "model.activation = tanh\n");
  CHECK(run("train", o).code == kInvalid);

  o.config = write_config(dir, kTinySine);
  o.resume = false;
  o.out = dir / "full";
  const auto ev = run("eval", o);
  REQUIRE(ev.code == kOk);
  CHECK(ev.out.starts_with("window [2,8), 3 sequence(s)\nmse "));
  const std::string table = slurp(full.eval_csv());
  CHECK(table.starts_with("sequence,mse,mae,mape\n"));
  CHECK(table.find("\nALL,") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("analyze on a fresh model") {
  const auto dir = scratch("analyze");
  CommandOptions o;
  o.config = write_config(dir, kTinySine);
  o.out = dir / "a";
  o.epochs = 0;
  REQUIRE(run("generate", o).code == kOk);
  REQUIRE(run("train", o).code == kOk);
  const auto r = run("analyze", o);
  REQUIRE(r.code == kOk);
  const ExperimentPaths p{dir / "a"};
  std::ifstream norms(p.analysis() / "successive_norms.csv");
  std::string line;
  std::getline(norms, line);
  CHECK(line == "sequence,t,norm");
  std::size_t rows = 0;
  while (std::getline(norms, line)) {
    ++rows;
    CHECK(line.substr(line.rfind(',') + 1) == "0");
  }
  CHECK(rows == 3 * 7);

  const auto cfg = resolve_config(o);
  const auto d_theta = trainer::restore_model(trainer::load_checkpoint(p.last_checkpoint())).d_theta();
  std::ifstream corr(p.analysis() / "theta_tau.csv");
  std::size_t lines = 0;
  while (std::getline(corr, line)) ++lines;
  CHECK(lines == d_theta + 1);
  CHECK(fs::exists(p.analysis() / "pca_projections.csv"));
  CHECK(fs::exists(p.analysis() / "pca_explained.csv"));
  fs::remove_all(dir);
}

TEST_CASE("classification end to end") {
  const auto dir = scratch("spirals");
  CommandOptions o;
  o.config = write_config(dir, kTinySpirals);
  o.out = dir / "s";
  REQUIRE(run("generate", o).code == kOk);
  REQUIRE(run("train", o).code == kOk);
  const auto ev = run("eval", o);
  REQUIRE(ev.code == kOk);
  CHECK(ev.out.find("accuracy ") != std::string::npos);
  CHECK(slurp(ExperimentPaths{dir / "s"}.eval_csv()).starts_with("sequence,accuracy\n"));
  CHECK(run("analyze", o).code == kInvalid);
  fs::remove_all(dir);
}
