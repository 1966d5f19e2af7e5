#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "warp/errors.hpp"
#include "warp/gradengine/fdcheck.hpp"
#include "warp/trainer/checkpoint.hpp"
#include "warp/trainer/evaluate.hpp"
#include "warp/trainer/graph.hpp"
#include "warp/trainer/losses.hpp"
#include "warp/trainer/train.hpp"
#include "warp/warpcell/scan.hpp"

using namespace warp;
using namespace warp::trainer;
using namespace warp::testing;
using warpcell::InitMode;
using warpcell::ModelSpec;

namespace {

dynamics::Dataset forecast_data(std::size_t n, std::size_t steps, std::size_t dim, std::uint64_t seed) {
  RngStream rng(seed, 0);
  dynamics::Dataset ds;
  ds.system = "synthetic";
  ds.split = "train";
  ds.steps = steps;
  ds.d_x = ds.d_y = dim;
  ds.context = 1;
  ds.inputs = Matrix(n, steps * dim);
  ds.targets = Matrix(n, steps * dim);
  for (std::size_t i = 0; i < n; ++i) {
    const double ph = rng.uniform(-0.5, 0.5), fr = rng.uniform(2.0, 4.0);
    for (std::size_t t = 0; t <= steps; ++t)
      for (std::size_t j = 0; j < dim; ++j) {
        const double v = 0.8 * std::sin(fr * double(t) / double(steps) + ph + double(j));
        if (t < steps) ds.inputs(i, t * dim + j) = v;
        if (t >= 1) ds.targets(i, (t - 1) * dim + j) = v;
      }
  }
  return ds;
}

dynamics::Dataset label_data(std::size_t n, std::size_t steps, std::uint64_t seed) {
  RngStream rng(seed, 1);
  dynamics::Dataset ds;
  ds.system = "synthetic";
  ds.split = "train";
  ds.steps = steps;
  ds.d_x = 2;
  ds.d_y = 2;
  ds.context = steps;
  ds.inputs = Matrix(n, steps * 2);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint16_t lab = static_cast<std::uint16_t>(i % 2);
    ds.labels.push_back(lab);
    const double dir = lab ? 1.0 : -1.0, ph = rng.uniform(0, 6.28);
    for (std::size_t t = 0; t < steps; ++t) {
      const double a = dir * 3.0 * double(t) / double(steps) + ph, r = 1.0 - 0.5 * double(t) / double(steps);
      ds.inputs(i, 2 * t) = r * std::cos(a);
      ds.inputs(i, 2 * t + 1) = r * std::sin(a);
    }
  }
  return ds;
}

struct Oracle final : Forecaster {
  std::vector<Matrix> answers;
  std::vector<Prediction> forecast(const std::vector<Matrix>& inputs, std::size_t) const override {
    std::vector<Prediction> out;
    for (std::size_t i = 0; i < inputs.size(); ++i) out.push_back({answers[i], {}});
    return out;
  }
};

struct Constant final : Forecaster {
  double c = 0.0;
  std::vector<Prediction> forecast(const std::vector<Matrix>& inputs, std::size_t) const override {
    std::vector<Prediction> out;
    for (const auto& x : inputs) out.push_back({Matrix(x.rows(), 1, c), {}});
    return out;
  }
};

struct FixedLogits final : Classifier {
  const dynamics::Dataset* data = nullptr;
  bool uniform = false;
  std::vector<Vector> logits(const std::vector<Matrix>& inputs) const override {
    std::vector<Vector> out;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      Vector l(2, 0.0);
      if (!uniform) l[data->labels[i]] = 10.0;
      out.push_back(l);
    }
    return out;
  }
};

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("warp_test_trainer_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("loss_mse examples") {
  const Matrix y{{0.3, 1.0}, {2.0, -1.0}};
  CHECK(loss_mse(y, y) == 0.0);
  CHECK(loss_mse(Matrix{{1.0, 0.0}}, Matrix{{0.0, 0.0}}) == 1.0);
  const Matrix e1{{0.5, 1.0}, {2.0, -2.0}}, e2{{0.7, 1.0}, {2.0, -3.0}};
  CHECK(loss_mse(y, e2) == doctest::Approx(4.0 * loss_mse(y, e1)));
  CHECK_THROWS_AS(loss_mse(y, Matrix(1, 2)), ContractViolation);
}

TEST_CASE("loss_nll examples") {
  const Matrix y{{0.3, 1.0}}, one(1, 2, 1.0), e(1, 2, std::exp(1.0));
  CHECK(loss_nll(y, y, one, 1e-4) == 0.0);
  CHECK(loss_nll(y, y, e, 1e-4) == doctest::Approx(2.0));
  const Matrix mu{{0.0, 0.0}};
  double prev = -1e300;
  for (double s : {10.0, 20.0, 40.0, 80.0}) {
    const double l = loss_nll(y, mu, Matrix(1, 2, s), 1e-4);
    CHECK(l > prev);
    prev = l;
  }
  CHECK_THROWS_AS(loss_nll(y, y, Matrix(1, 2, 1e-5), 1e-4), ContractViolation);
}

TEST_CASE("loss_cce examples") {
  CHECK(std::abs(loss_cce(0, Vector{0.0, 0.0}) - std::log(2.0)) <= 1e-12);
  CHECK(loss_cce(1, Vector{0.0, 1000.0}) <= 1e-12);
  CHECK(loss_cce(0, Vector{2.0, 0.5, 0.5, -1.0}) == loss_cce(0, Vector{2.0, -1.0, 0.5, 0.5}));
  CHECK_THROWS_AS(loss_cce(3, Vector{0.0, 1.0}), ContractViolation);
}

TEST_CASE("tape losses agree with the reference losses") {
  const auto ds = forecast_data(3, 8, 2, 4);
  WarpModel m(small_spec(2, 2, 3, 1), 4);
  randomize(m, 4);
  TrainConfig cfg;
  const std::vector<std::size_t> idx{0, 1, 2};
  const double tape_loss = batch_loss(m, ds, idx, cfg, 0, false).loss;
  double ref = 0.0;
  const auto inputs = sequences(ds.inputs, 8, 2), targets = sequences(ds.targets, 8, 2);
  for (std::size_t i = 0; i < 3; ++i) ref += loss_mse(targets[i], warpcell::scan_recurrent(m, inputs[i], {}).mean);
  CHECK(tape_loss == doctest::Approx(ref / 3.0).epsilon(1e-12));
}

TEST_CASE("end-to-end gradients match finite differences") {
  struct Case {
    rootnet::OutputKind head;
    LossKind loss;
    TrainMode mode;
    double p;
    InitMode init;
    rootnet::Squash squash;
  };
  using rootnet::OutputKind;
  using rootnet::Squash;
  const std::vector<Case> cases{
      {OutputKind::point, LossKind::mse, TrainMode::recurrent_non_ar, 1.0, InitMode::direct, Squash::none},
      {OutputKind::point, LossKind::mse, TrainMode::recurrent_ar, 0.5, InitMode::hypernet, Squash::dynamic_tanh},
      {OutputKind::gaussian, LossKind::nll, TrainMode::recurrent_ar, 0.0, InitMode::hypernet, Squash::none},
      {OutputKind::point, LossKind::mse, TrainMode::convolutional, 1.0, InitMode::hypernet, Squash::none},
      {OutputKind::msd_expm, LossKind::mse, TrainMode::recurrent_ar, 0.5, InitMode::direct, Squash::none},
      {OutputKind::point, LossKind::cce, TrainMode::recurrent_non_ar, 1.0, InitMode::hypernet, Squash::none},
  };
  for (std::size_t k = 0; k < cases.size(); ++k) {
    const Case& c = cases[k];
    CAPTURE(k);
    const bool cls = c.loss == LossKind::cce;
    const auto ds = cls ? label_data(4, 6, k) : forecast_data(3, 5, 2, k);
    ModelSpec s = small_spec(2, 2, 2, 2, c.init);
    s.head.output = c.head;
    s.head.squash = c.squash;
    s.root.out_dim = rootnet::head_arity(c.head, 2);
    WarpModel m(s, 30 + k);
    randomize(m, 30 + k);
    TrainConfig cfg;
    cfg.loss = c.loss;
    cfg.mode = c.mode;
    cfg.p_forcing = c.p;
    cfg.seed = 5;
    std::vector<std::size_t> idx(ds.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    const auto br = batch_loss(m, ds, idx, cfg, 2, true);
    const auto rep = grad::finite_diff_check([&] { return batch_loss(m, ds, idx, cfg, 2, false).loss; }, m.params(),
                                             br.grads);
    CHECK(rep.checked + rep.kinks == m.params().scalar_count());
    CHECK(rep.max_rel_error <= 1e-4);
  }
}

TEST_CASE("AR with full forcing equals non-AR") {
  const auto ds = forecast_data(4, 10, 1, 1);
  WarpModel m(small_spec(1, 1, 3, 2, InitMode::hypernet), 2);
  randomize(m, 2);
  TrainConfig a, b;
  a.mode = TrainMode::recurrent_ar;
  a.p_forcing = 1.0;
  a.sample = false;
  const std::vector<std::size_t> idx{0, 1, 2, 3};
  CHECK(std::abs(batch_loss(m, ds, idx, a).loss - batch_loss(m, ds, idx, b).loss) <= 1e-12);
}

TEST_CASE("convolutional and recurrent training share gradients") {
  const auto ds = forecast_data(5, 24, 2, 8);
  WarpModel m(small_spec(2, 2, 1, 4, InitMode::hypernet), 8);
  REQUIRE(m.d_theta() <= 32);
  randomize(m, 8);
  TrainConfig rec, conv;
  conv.mode = TrainMode::convolutional;
  const std::vector<std::size_t> idx{0, 1, 2, 3, 4};
  const auto gr = batch_loss(m, ds, idx, rec).grads.flatten();
  const auto gc = batch_loss(m, ds, idx, conv).grads.flatten();
  REQUIRE(gr.size() == gc.size());
  for (std::size_t i = 0; i < gr.size(); ++i) CHECK(std::abs(gr[i] - gc[i]) <= 1e-8);
}

TEST_CASE("train config validation") {
  const auto ds = forecast_data(4, 6, 1, 0);
  WarpModel m(small_spec(1, 1, 2, 1), 0);
  TrainConfig c;
  c.p_forcing = 1.5;
  CHECK_THROWS_AS(validate(c, m, ds), ValidationError);
  c = {};
  c.batch_size = 0;
  CHECK_THROWS_AS(validate(c, m, ds), ValidationError);
  c = {};
  c.loss = LossKind::nll;
  CHECK_THROWS_AS(validate(c, m, ds), ValidationError);
  c = {};
  c.mode = TrainMode::convolutional;
  c.loss = LossKind::cce;
  CHECK_THROWS_AS(validate(c, m, ds), ValidationError);
  c = {};
  c.loss = LossKind::cce;
  CHECK_THROWS_AS(validate(c, m, ds), ValidationError);
  CHECK(parse_mode("non-ar") == TrainMode::recurrent_non_ar);
  CHECK(parse_loss("cce") == LossKind::cce);
  CHECK_THROWS(parse_mode("teacher"));
}

TEST_CASE("build_model sets dynamic tanh from the largest target") {
  auto ds = forecast_data(3, 6, 1, 2);
  ds.targets(1, 3) = -1.75;
  ModelSpec s = small_spec(1, 1, 2, 1);
  s.head.squash = rootnet::Squash::dynamic_tanh;
  const WarpModel m = build_model(s, ds, 1);
  CHECK(m.dyn_tanh() == rootnet::DynTanh{1.75, 0.0, 1.75, 0.0});
}

TEST_CASE("training loop") {
  const auto ds = forecast_data(8, 12, 1, 3);
  const ModelSpec s = small_spec(1, 1, 4, 1, InitMode::hypernet);
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.batch_size = 3;
  cfg.lr = 1e-3;
  cfg.g_lim = 1.0;
  WarpModel fresh = build_model(s, ds, 9);
  WarpModel m = build_model(s, ds, 9);
  CHECK(train(m, ds, cfg).empty());
  CHECK(m.params() == fresh.params());

  cfg.epochs = 6;
  WarpModel a = build_model(s, ds, 9), b = build_model(s, ds, 9);
  const auto ta = train(a, ds, cfg), tb = train(b, ds, cfg);
  REQUIRE(ta.size() == 6);
  CHECK(ta == tb);
  CHECK(a.params() == b.params());
  for (const auto& r : ta) CHECK(std::isfinite(r.loss));
  CHECK(ta.back().loss < ta.front().loss);
}

TEST_CASE("training on a small sine split") {
  dynamics::GenSpec g;
  g.system = dynamics::System::sine;
  g.n_train = 10;
  g.n_test = 10;
  g.steps = 16;
  const auto data = dynamics::generate(g);
  ModelSpec s = small_spec(1, 1, 24, 1, InitMode::hypernet);
  WarpModel m = build_model(s, data.train, 0);
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.batch_size = 10;
  cfg.lr = 1e-3;
  cfg.g_lim = 1.0;
  cfg.mode = TrainMode::recurrent_ar;
  cfg.p_forcing = 0.25;
  const auto trace = train(m, data.train, cfg);
  CHECK(trace.back().loss < trace.front().loss / 10.0);
}

TEST_CASE("divergence names the epoch") {
  const auto ds = forecast_data(2, 6, 1, 1);
  WarpModel m = build_model(small_spec(1, 1, 2, 1), ds, 1);
  m.params().value(m.slot_transition()).fill(1e200);
  m.params().value(m.slot_b()).fill(1e200);
  TrainConfig cfg;
  cfg.epochs = 2;
  try {
    train(m, ds, cfg);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(std::string(e.what()).starts_with("epoch 0"));
  }
}

TEST_CASE("checkpoint roundtrip and resume") {
  const auto ds = forecast_data(6, 8, 2, 5);
  ModelSpec s = small_spec(2, 2, 3, 1, InitMode::hypernet);
  s.head.squash = rootnet::Squash::dynamic_tanh;
  s.w_lim = 3.0;
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 4;
  cfg.lr = 1e-3;
  cfg.g_lim = 1.0;
  cfg.mode = TrainMode::recurrent_ar;
  cfg.p_forcing = 0.5;

  WarpModel full = build_model(s, ds, 3);
  TrainState fs(full, cfg);
  const auto trace_full = train(full, ds, cfg, fs);

  WarpModel half = build_model(s, ds, 3);
  TrainState hs(half, cfg);
  TrainConfig first = cfg;
  first.epochs = 2;
  train(half, ds, first, hs);
  const auto dir = scratch("ck");
  const Checkpoint ck = make_checkpoint(half, hs, 3, 0xabcdef);
  save_checkpoint(ck, dir / "a.ck");
  const Checkpoint back = load_checkpoint(dir / "a.ck");
  CHECK(back == ck);
  save_checkpoint(back, dir / "b.ck");
  CHECK(read_bytes(dir / "a.ck") == read_bytes(dir / "b.ck"));
  CHECK(spec_from_text(spec_to_text(s)) == s);

  WarpModel resumed = restore_model(back);
  TrainState rs = back.state;
  CHECK(rs.epoch == 2);
  const auto rest = train(resumed, ds, cfg, rs);
  REQUIRE(rest.size() == 2);
  CHECK(rest[0] == trace_full[2]);
  CHECK(rest[1] == trace_full[3]);
  CHECK(resumed.params() == full.params());

  const std::string bytes = read_bytes(dir / "a.ck");
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), IoError);
  CHECK_THROWS_AS(decode_checkpoint(bytes + "x"), IoError);
  CHECK_THROWS_AS(decode_checkpoint("WARPCK2" + bytes.substr(7)), IoError);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ck"), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("evaluate_forecast examples") {
  auto ds = forecast_data(4, 10, 1, 6);
  Oracle o;
  o.answers = sequences(ds.targets, 10, 1);
  const auto perfect = evaluate_forecast(o, ds, 3);
  CHECK(perfect.window == "[3,10)");
  CHECK(perfect.value("mse") == 0.0);
  CHECK(perfect.value("mae") == 0.0);
  CHECK(perfect.value("mape") == 0.0);
  CHECK(perfect.count == 4);

  ds.targets.fill(0.25);
  Constant c;
  c.c = 0.25;
  CHECK(evaluate_forecast(c, ds, 1).value("mse") == 0.0);
  ds.targets.fill(1.25);
  CHECK(evaluate_forecast(c, ds, 1).value("mse") == 1.0);

  const auto na = evaluate_forecast(c, ds, 10);
  CHECK_FALSE(na.applicable);
  CHECK_THROWS_AS(evaluate_forecast(c, ds, 0), ContractViolation);
}

TEST_CASE("evaluate_classify examples") {
  const auto ds = label_data(10, 5, 1);
  FixedLogits f;
  f.data = &ds;
  CHECK(evaluate_classify(f, ds).value("accuracy") == 1.0);
  f.uniform = true;
  CHECK(evaluate_classify(f, ds).value("accuracy") == 0.5);
  auto empty = ds;
  empty.inputs = Matrix(0, ds.inputs.cols());
  empty.labels.clear();
  CHECK_THROWS(evaluate_classify(f, empty));
}

TEST_CASE("warp forecaster follows the context protocol") {
  const auto ds = forecast_data(5, 12, 1, 7);
  WarpModel m(small_spec(1, 1, 3, 1, InitMode::hypernet), 7);
  randomize(m, 7);
  WarpForecaster wf(m, 2);
  const auto inputs = sequences(ds.inputs, 12, 1);
  const auto preds = wf.forecast(inputs, 4);
  REQUIRE(preds.size() == 5);
  warpcell::SequenceOptions o;
  o.forcing = warpcell::Forcing::context;
  o.context = 4;
  for (std::size_t i = 0; i < 5; ++i) {
    const auto r = warpcell::scan_recurrent(m, inputs[i], o);
    for (std::size_t t = 0; t < 12; ++t) CHECK(preds[i].mean(t, 0) == doctest::Approx(r.mean(t, 0)).epsilon(1e-13));
  }
  const auto st = wf.states(inputs, 4);
  CHECK(st[0].rows() == 12);
  CHECK(st[0].cols() == m.d_theta());
}
