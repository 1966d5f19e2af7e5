// SPDX-License-Identifier: Apache-2.0
#include "warp/trainer/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "warp/errors.hpp"

namespace warp::trainer {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'W', 'A', 'R', 'P', 'C', 'K', '1', '\0'};

template <class T>
void put(std::string& out, T v) {
  char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  out.append(b, sizeof(T));
}

void put_matrix(std::string& out, const std::string& name, const Matrix& m) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
  out += name;
  put<std::uint32_t>(out, 2);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
  for (double v : m.flat()) put<double>(out, v);
}

class Reader {
 public:
  explicit Reader(std::string_view b) : b_(b) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, b_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string bytes(std::size_t n) {
    need(n);
    std::string s(b_.substr(pos_, n));
    pos_ += n;
    return s;
  }

  std::pair<std::string, Matrix> matrix() {
    std::string name = bytes(get<std::uint32_t>());
    const auto rank = get<std::uint32_t>();
    if (rank != 2) throw IoError("checkpoint: array '" + name + "' has unsupported rank " + std::to_string(rank));
    const std::size_t r = get<std::uint32_t>();
    const std::size_t c = get<std::uint32_t>();
    need(r * c * sizeof(double));
    Matrix m(r, c);
    for (double& v : m.flat()) v = get<double>();
    return {std::move(name), std::move(m)};
  }

  bool done() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) throw IoError("checkpoint: truncated file");
  }
  std::string_view b_;
  std::size_t pos_ = 0;
};

std::string num(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, r.ptr);
}

}  // namespace

Checkpoint make_checkpoint(const WarpModel& model, const TrainState& state, std::uint64_t seed,
                           std::uint64_t config_hash) {
  return Checkpoint{model.spec(), model.params(), state, seed, config_hash};
}

WarpModel restore_model(const Checkpoint& ck) {
  WarpModel model(ck.spec, ck.seed);
  auto& p = model.params();
  if (p.size() != ck.params.size()) throw ValidationError("checkpoint: array count does not match the model spec");
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto& src = ck.params[i];
    if (src.name != p[i].name) throw ValidationError("checkpoint: array '" + src.name + "' out of place");
    if (src.value.rows() != p.value(i).rows() || src.value.cols() != p.value(i).cols())
      throw ValidationError("checkpoint: array '" + src.name + "' has the wrong shape");
    p.value(i) = src.value;
  }
  return model;
}

std::string spec_to_text(const warpcell::ModelSpec& s) {
  std::ostringstream o;
  o << "d_x=" << s.d_x << "\n"
    << "d_y=" << s.d_y << "\n"
    << "root.width=" << s.root.width << "\n"
    << "root.depth=" << s.root.depth << "\n"
    << "root.out_dim=" << s.root.out_dim << "\n"
    << "root.activation=" << rootnet::to_string(s.root.activation) << "\n"
    << "head.output=" << rootnet::to_string(s.head.output) << "\n"
    << "head.squash=" << rootnet::to_string(s.head.squash) << "\n"
    << "head.d_lim=" << num(s.head.d_lim) << "\n"
    << "head.sigma_min=" << num(s.head.sigma_min) << "\n"
    << "transition=" << warpcell::to_string(s.transition) << "\n"
    << "rank=" << s.rank << "\n"
    << "init=" << warpcell::to_string(s.init) << "\n"
    << "w_lim=" << (s.w_lim ? num(*s.w_lim) : std::string("none")) << "\n"
    << "fixed_tau=" << (s.fixed_tau ? 1 : 0) << "\n";
  return o.str();
}

warpcell::ModelSpec spec_from_text(std::string_view text) {
  std::map<std::string, std::string> kv;
  std::istringstream in{std::string(text)};
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError("checkpoint: malformed spec line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&](const char* k) -> const std::string& {
    auto it = kv.find(k);
    if (it == kv.end()) throw IoError(std::string("checkpoint: spec lacks '") + k + "'");
    return it->second;
  };
  auto size = [&](const char* k) { return static_cast<std::size_t>(std::stoull(get(k))); };
  warpcell::ModelSpec s;
  try {
    s.d_x = size("d_x");
    s.d_y = size("d_y");
    s.root.width = size("root.width");
    s.root.depth = size("root.depth");
    s.root.out_dim = size("root.out_dim");
    s.root.activation = rootnet::parse_activation(get("root.activation"));
    s.head.output = rootnet::parse_output_kind(get("head.output"));
    s.head.squash = rootnet::parse_squash(get("head.squash"));
    s.head.d_lim = std::stod(get("head.d_lim"));
    s.head.sigma_min = std::stod(get("head.sigma_min"));
    s.transition = warpcell::parse_transition(get("transition"));
    s.rank = size("rank");
    s.init = warpcell::parse_init_mode(get("init"));
    if (get("w_lim") != "none") s.w_lim = std::stod(get("w_lim"));
    s.fixed_tau = get("fixed_tau") == "1";
  } catch (const std::invalid_argument& e) {
    throw IoError(std::string("checkpoint: bad spec value: ") + e.what());
  }
  return s;
}

std::string encode_checkpoint(const Checkpoint& ck) {
  std::string out(kMagic, sizeof kMagic);
  put<std::uint16_t>(out, kCheckpointVersion);
  const std::string spec = spec_to_text(ck.spec);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(spec.size()));
  out += spec;

  put<std::uint32_t>(out, static_cast<std::uint32_t>(ck.params.size()));
  for (std::size_t i = 0; i < ck.params.size(); ++i) put_matrix(out, ck.params[i].name, ck.params[i].value);

  const auto& o = ck.state.opt;
  require(o.m.size() == ck.params.size() && o.s.size() == ck.params.size(),
          "encode_checkpoint: optimizer moments do not match the arrays");
  put<double>(out, o.lr);
  put<double>(out, o.beta1);
  put<double>(out, o.beta2);
  put<double>(out, o.eps);
  put<std::uint64_t>(out, o.step);
  for (std::size_t i = 0; i < o.m.size(); ++i) put_matrix(out, ck.params[i].name, o.m[i]);
  for (std::size_t i = 0; i < o.s.size(); ++i) put_matrix(out, ck.params[i].name, o.s[i]);

  const auto& p = ck.state.plateau;
  put<std::uint64_t>(out, p.window);
  put<std::uint64_t>(out, p.patience);
  put<double>(out, p.factor);
  put<double>(out, p.threshold);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(p.recent.size()));
  for (double v : p.recent) put<double>(out, v);
  put<double>(out, p.best);
  put<std::uint8_t>(out, p.has_best ? 1 : 0);
  put<std::uint64_t>(out, p.since_improvement);

  put<std::uint64_t>(out, ck.seed);
  put<std::uint64_t>(out, ck.state.epoch);
  put<std::uint64_t>(out, ck.config_hash);
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.bytes(sizeof kMagic) != std::string(kMagic, sizeof kMagic)) throw IoError("checkpoint: bad magic");
  const auto version = r.get<std::uint16_t>();
  if (version != kCheckpointVersion) throw IoError("checkpoint: unsupported version " + std::to_string(version));
  Checkpoint ck;
  ck.spec = spec_from_text(r.bytes(r.get<std::uint32_t>()));

  const std::size_t n = r.get<std::uint32_t>();
  for (std::size_t i = 0; i < n; ++i) {
    auto [name, m] = r.matrix();
    ck.params.add(std::move(name), std::move(m));
  }
  auto& o = ck.state.opt;
  o.lr = r.get<double>();
  o.beta1 = r.get<double>();
  o.beta2 = r.get<double>();
  o.eps = r.get<double>();
  o.step = r.get<std::uint64_t>();
  for (auto* moments : {&o.m, &o.s})
    for (std::size_t i = 0; i < n; ++i) {
      auto [name, m] = r.matrix();
      if (name != ck.params[i].name || m.rows() != ck.params.value(i).rows() ||
          m.cols() != ck.params.value(i).cols())
        throw IoError("checkpoint: optimizer block does not match array '" + ck.params[i].name + "'");
      moments->push_back(std::move(m));
    }

  auto& p = ck.state.plateau;
  p.window = r.get<std::uint64_t>();
  p.patience = r.get<std::uint64_t>();
  p.factor = r.get<double>();
  p.threshold = r.get<double>();
  const std::size_t recent = r.get<std::uint32_t>();
  for (std::size_t i = 0; i < recent; ++i) p.recent.push_back(r.get<double>());
  p.best = r.get<double>();
  p.has_best = r.get<std::uint8_t>() != 0;
  p.since_improvement = r.get<std::uint64_t>();

  ck.seed = r.get<std::uint64_t>();
  ck.state.epoch = r.get<std::uint64_t>();
  ck.config_hash = r.get<std::uint64_t>();
  if (!r.done()) throw IoError("checkpoint: trailing bytes");
  return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::string bytes = encode_checkpoint(ck);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return decode_checkpoint(ss.str());
}

}  // namespace warp::trainer
