// SPDX-License-Identifier: Apache-2.0
#include "warp/cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "warp/errors.hpp"

namespace warp::cli {

namespace {

const std::vector<std::pair<std::string, std::string>>& schema() {
  static const std::vector<std::pair<std::string, std::string>> keys = {
      {"dataset.system", "sine"},
      {"dataset.n_train", "10"},
      {"dataset.n_test", "0"},
      {"dataset.seed", "0"},
      {"dataset.steps", "16"},
      {"dataset.context", "1"},
      {"model.width", "24"},
      {"model.depth", "1"},
      {"model.activation", "swish"},
      {"model.head", "point"},
      {"model.squash", "none"},
      {"model.d_lim", "1"},
      {"model.sigma_min", "0.0001"},
      {"model.transition", "dense"},
      {"model.rank", "0"},
      {"model.init", "hypernet"},
      {"model.w_lim", "none"},
      {"model.fixed_tau", "false"},
      {"train.epochs", "100"},
      {"train.batch_size", "32"},
      {"train.lr", "0.00001"},
      {"train.p_forcing", "1"},
      {"train.loss", "mse"},
      {"train.mode", "non-ar"},
      {"train.seed", "0"},
      {"train.g_lim", "1e-7"},
      {"train.sample", "true"},
      {"train.checkpoint_every", "0"},
      {"output.dir", "runs/default"},
  };
  return keys;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw ValidationError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size() || !std::isfinite(out))
    throw ValidationError(key + ": expected a finite number, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ValidationError(key + ": expected true or false, got '" + v + "'");
}

template <class Fn>
auto parse_enum(const std::string& key, const std::string& v, Fn&& fn) {
  try {
    return fn(v);
  } catch (const std::invalid_argument& e) {
    throw ValidationError(key + ": " + e.what());
  }
}

}  // namespace

ExperimentConfig::ExperimentConfig() : entries_(schema()) {}

void ExperimentConfig::set(std::string_view key, std::string value) {
  for (auto& [k, v] : entries_)
    if (k == key) {
      v = std::move(value);
      return;
    }
  throw ValidationError("unknown config key '" + std::string(key) + "'");
}

const std::string& ExperimentConfig::get(std::string_view key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return v;
  throw ValidationError("unknown config key '" + std::string(key) + "'");
}

void ExperimentConfig::merge_text(std::string_view text, std::string_view source) {
  std::istringstream in{std::string(text)};
  std::set<std::string> seen;
  std::size_t lineno = 0;
  for (std::string raw; std::getline(in, raw);) {
    ++lineno;
    const std::string where = std::string(source) + ":" + std::to_string(lineno) + ": ";
    std::string line = raw.substr(0, raw.find('#'));
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError(where + "expected 'section.key = value'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.find('.') == std::string::npos) throw ValidationError(where + "key '" + key + "' has no section");
    if (value.empty()) throw ValidationError(where + "empty value for '" + key + "'");
    if (!seen.insert(key).second) throw ValidationError(where + "duplicate key '" + key + "'");
    try {
      set(key, value);
    } catch (const ValidationError& e) {
      throw ValidationError(where + e.what());
    }
  }
}

void ExperimentConfig::merge_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  merge_text(ss.str(), path.string());
}

std::string ExperimentConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
  return out;
}

dynamics::GenSpec ExperimentConfig::gen_spec() const {
  dynamics::GenSpec g;
  g.system = parse_enum("dataset.system", get("dataset.system"), dynamics::parse_system);
  g.n_train = to_uint("dataset.n_train", get("dataset.n_train"));
  const auto n_test = to_uint("dataset.n_test", get("dataset.n_test"));
  g.n_test = n_test == 0 ? dynamics::default_test_size(g.n_train) : n_test;
  g.seed = to_uint("dataset.seed", get("dataset.seed"));
  g.steps = to_uint("dataset.steps", get("dataset.steps"));
  g.context = context();
  if (g.n_train == 0) throw ValidationError("dataset.n_train must be >= 1");
  if (g.steps < 2) throw ValidationError("dataset.steps must be >= 2");
  if (g.context > g.steps) throw ValidationError("dataset.context must not exceed dataset.steps");
  if (g.system == dynamics::System::spirals && (g.n_train % 2 || g.n_test % 2))
    throw ValidationError("spirals split sizes must be even");
  if (g.system == dynamics::System::lv_copy && g.steps != 256) throw ValidationError("lv-copy needs dataset.steps = 256");
  return g;
}

std::size_t ExperimentConfig::context() const {
  const auto l = to_uint("dataset.context", get("dataset.context"));
  if (l == 0) throw ValidationError("dataset.context must be >= 1");
  return l;
}

warpcell::ModelSpec ExperimentConfig::model_spec(std::size_t d_x, std::size_t d_y) const {
  warpcell::ModelSpec s;
  s.d_x = d_x;
  s.d_y = d_y;
  s.root.width = to_uint("model.width", get("model.width"));
  s.root.depth = to_uint("model.depth", get("model.depth"));
  s.root.activation = parse_enum("model.activation", get("model.activation"), rootnet::parse_activation);
  s.head.output = parse_enum("model.head", get("model.head"), rootnet::parse_output_kind);
  s.head.squash = parse_enum("model.squash", get("model.squash"), rootnet::parse_squash);
  s.head.d_lim = to_double("model.d_lim", get("model.d_lim"));
  s.head.sigma_min = to_double("model.sigma_min", get("model.sigma_min"));
  s.transition = parse_enum("model.transition", get("model.transition"), warpcell::parse_transition);
  s.rank = to_uint("model.rank", get("model.rank"));
  s.init = parse_enum("model.init", get("model.init"), warpcell::parse_init_mode);
  if (get("model.w_lim") != "none") s.w_lim = to_double("model.w_lim", get("model.w_lim"));
  s.fixed_tau = to_bool("model.fixed_tau", get("model.fixed_tau"));
  if (s.root.width == 0 || s.root.depth == 0) throw ValidationError("model.width and model.depth must be >= 1");
  s.root.out_dim = rootnet::head_arity(s.head.output, d_y);
  warpcell::validate(s);
  return s;
}

trainer::TrainConfig ExperimentConfig::train_config() const {
  trainer::TrainConfig c;
  c.epochs = to_uint("train.epochs", get("train.epochs"));
  c.batch_size = to_uint("train.batch_size", get("train.batch_size"));
  c.lr = to_double("train.lr", get("train.lr"));
  c.p_forcing = to_double("train.p_forcing", get("train.p_forcing"));
  c.loss = parse_enum("train.loss", get("train.loss"), trainer::parse_loss);
  c.mode = parse_enum("train.mode", get("train.mode"), trainer::parse_mode);
  c.seed = to_uint("train.seed", get("train.seed"));
  c.g_lim = to_double("train.g_lim", get("train.g_lim"));
  c.sample = to_bool("train.sample", get("train.sample"));
  if (c.batch_size == 0) throw ValidationError("train.batch_size must be >= 1");
  if (!(c.lr > 0.0)) throw ValidationError("train.lr must be positive");
  if (c.p_forcing < 0.0 || c.p_forcing > 1.0) throw ValidationError("train.p_forcing must lie in [0, 1]");
  if (!(c.g_lim > 0.0)) throw ValidationError("train.g_lim must be positive");
  if (c.mode == trainer::TrainMode::convolutional && c.loss == trainer::LossKind::cce)
    throw ValidationError("train.mode = conv supports the mse and nll losses only");
  return c;
}

std::size_t ExperimentConfig::checkpoint_every() const {
  return to_uint("train.checkpoint_every", get("train.checkpoint_every"));
}

std::filesystem::path ExperimentConfig::output_dir() const { return get("output.dir"); }

std::pair<std::size_t, std::size_t> system_dims(dynamics::System s) {
  switch (s) {
    case dynamics::System::sine: return {1, 1};
    case dynamics::System::spirals: return {2, 2};
    default: return {2, 2};
  }
}

void ExperimentConfig::validate() const {
  const auto g = gen_spec();
  const auto [dx, dy] = system_dims(g.system);
  const auto spec = model_spec(dx, dy);
  const auto tc = train_config();
  const bool labelled = g.system == dynamics::System::spirals;
  if (labelled != (tc.loss == trainer::LossKind::cce))
    throw ValidationError(labelled ? "spirals needs train.loss = cce" : "train.loss = cce needs the spirals dataset");
  if (tc.loss == trainer::LossKind::cce && tc.mode != trainer::TrainMode::recurrent_non_ar)
    throw ValidationError("classification trains with train.mode = non-ar");
  if (tc.loss == trainer::LossKind::nll && spec.head.output != rootnet::OutputKind::gaussian)
    throw ValidationError("train.loss = nll needs model.head = gaussian");
  if (tc.mode == trainer::TrainMode::convolutional && spec.w_lim)
    throw ValidationError("train.mode = conv cannot be combined with model.w_lim");
  if (labelled && spec.head.output != rootnet::OutputKind::point)
    throw ValidationError("classification needs model.head = point");
  (void)checkpoint_every();
}

std::uint64_t ExperimentConfig::resume_hash() const {
  std::string text;
  for (const auto& [k, v] : entries_) {
    if (k == "train.epochs" || k == "train.checkpoint_every" || k.rfind("output.", 0) == 0) continue;
    text += k + "=" + v + "\n";
  }
  return dynamics::fnv1a(text);
}

}  // namespace warp::cli
