// SPDX-License-Identifier: Apache-2.0
#include "warp/dynamics/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "warp/errors.hpp"

namespace warp::dynamics {

static_assert(std::endian::native == std::endian::little, "file formats assume a little-endian host");

namespace {

constexpr char kMagic[8] = {'W', 'A', 'R', 'P', 'D', 'S', '1', '\0'};
constexpr std::uint16_t kVersion = 1;

double to_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

std::string join(const Vector& v) {
  std::string s;
  char buf[40];
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", v[i]);
    if (i) s += ',';
    s += buf;
  }
  return s;
}

Vector split_doubles(const std::string& s) {
  Vector out;
  if (s.empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw IoError("dataset: malformed number '" + item + "' in metadata");
    }
  }
  return out;
}

template <class T>
void put(std::string& buf, T v) {
  char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  buf.append(b, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string data) : data_(std::move(data)) {}
  template <class T>
  T get() {
    if (pos_ + sizeof(T) > data_.size()) throw IoError("dataset: file is truncated");
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string bytes(std::size_t n) {
    if (pos_ + n > data_.size()) throw IoError("dataset: file is truncated");
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::string data_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return std::string(std::istreambuf_iterator<char>(in), {});
}

Matrix flatten_rows(const std::vector<Matrix>& seqs, std::size_t begin, std::size_t steps) {
  const std::size_t d = seqs.front().cols();
  Matrix out(seqs.size(), steps * d);
  for (std::size_t i = 0; i < seqs.size(); ++i)
    for (std::size_t t = 0; t < steps; ++t)
      for (std::size_t k = 0; k < d; ++k) out(i, t * d + k) = seqs[i](begin + t, k);
  return out;
}

}  // namespace

NormStats normalize_fit(const std::vector<Matrix>& train) {
  require(!train.empty() && train[0].rows() > 0, "normalize_fit: empty training data");
  const std::size_t d = train[0].cols();
  NormStats s;
  s.min.assign(d, std::numeric_limits<double>::infinity());
  s.max.assign(d, -std::numeric_limits<double>::infinity());
  for (const auto& m : train) {
    require(m.cols() == d, "normalize_fit: feature counts differ");
    for (std::size_t r = 0; r < m.rows(); ++r)
      for (std::size_t k = 0; k < d; ++k) {
        s.min[k] = std::min(s.min[k], m(r, k));
        s.max[k] = std::max(s.max[k], m(r, k));
      }
  }
  return s;
}

Matrix normalize_apply(const NormStats& s, const Matrix& x) {
  if (s.identity()) return x;
  require(s.min.size() == x.cols() && s.max.size() == x.cols(), "normalize_apply: feature count mismatch");
  Matrix out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t k = 0; k < x.cols(); ++k) {
      const double span = s.max[k] - s.min[k];
      out(r, k) = span > 0.0 ? 2.0 * (x(r, k) - s.min[k]) / span - 1.0 : 0.0;
    }
  return out;
}

Matrix denormalize(const NormStats& s, const Matrix& x) {
  if (s.identity()) return x;
  require(s.min.size() == x.cols() && s.max.size() == x.cols(), "denormalize: feature count mismatch");
  Matrix out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t k = 0; k < x.cols(); ++k) {
      const double span = s.max[k] - s.min[k];
      out(r, k) = span > 0.0 ? (x(r, k) + 1.0) * span / 2.0 + s.min[k] : s.min[k];
    }
  return out;
}

System parse_system(std::string_view s) {
  if (s == "msd") return System::msd;
  if (s == "msd-zero") return System::msd_zero;
  if (s == "lv") return System::lv;
  if (s == "lv-copy") return System::lv_copy;
  if (s == "sine") return System::sine;
  if (s == "spirals") return System::spirals;
  throw ValidationError("unknown system '" + std::string(s) + "'");
}

std::string_view to_string(System s) {
  switch (s) {
    case System::msd: return "msd";
    case System::msd_zero: return "msd-zero";
    case System::lv: return "lv";
    case System::lv_copy: return "lv-copy";
    case System::sine: return "sine";
    case System::spirals: return "spirals";
  }
  return "?";
}

std::size_t default_test_size(std::size_t n_train) { return std::max<std::size_t>(100, n_train / 10); }

DatasetPair generate(const GenSpec& spec) {
  if (spec.n_train == 0 || spec.n_test == 0) throw ValidationError("dataset sizes must be >= 1");
  if (spec.steps < 2) throw ValidationError("dataset: T must be >= 2");
  if (spec.context > spec.steps) throw ValidationError("dataset: context L must not exceed T");

  DatasetPair out;
  auto init = [&](Dataset& d, Split split) {
    d.system = std::string(to_string(spec.system));
    d.split = std::string(to_string(split));
    d.seed = spec.seed;
    d.steps = spec.steps;
    d.context = spec.context;
  };
  init(out.train, Split::train);
  init(out.test, Split::test);

  if (spec.system == System::spirals) {
    if (spec.n_train % 2 || spec.n_test % 2) throw ValidationError("spirals: split sizes must be even");
    for (Dataset* d : {&out.train, &out.test}) {
      const bool train = d == &out.train;
      auto sp = gen_spirals(train ? spec.n_train : spec.n_test, spec.seed + (train ? 0 : 1), spec.steps);
      for (auto& m : sp.seqs)
        for (double& v : m.flat()) v = to_f32(v);
      d->inputs = flatten_rows(sp.seqs, 0, spec.steps);
      d->labels = std::move(sp.labels);
      d->d_x = 2;
      d->d_y = 2;
    }
    return out;
  }

  auto trajectories = [&](Split split, std::size_t n) -> Trajectories {
    switch (spec.system) {
      case System::msd: return gen_msd(n, split, spec.steps, spec.seed, false);
      case System::msd_zero: return gen_msd(n, split, spec.steps, spec.seed, true);
      case System::lv:
      case System::lv_copy:
        if (spec.system == System::lv_copy && spec.steps != 256)
          throw ValidationError("lv-copy requires T = 256");
        return gen_lv(n, split, spec.steps, spec.seed);
      case System::sine: return gen_sine(n, split, spec.steps, spec.seed);
      case System::spirals: break;
    }
    throw ValidationError("unsupported system");
  };

  Trajectories tr = trajectories(Split::train, spec.n_train);
  Trajectories te = trajectories(Split::test, spec.n_test);
  const NormStats stats = normalize_fit(tr.seqs);
  for (auto [d, raw] : {std::pair{&out.train, &tr}, std::pair{&out.test, &te}}) {
    std::vector<Matrix> norm;
    for (const auto& m : raw->seqs) {
      Matrix z = normalize_apply(stats, m);
      for (double& v : z.flat()) v = to_f32(v);
      norm.push_back(std::move(z));
    }
    const std::size_t dim = norm.front().cols();
    d->stats = stats;
    d->d_x = dim;
    d->d_y = dim;
    d->inputs = flatten_rows(norm, 0, spec.steps);
    if (spec.system == System::lv_copy) {
      std::vector<Matrix> tgt;
      for (const auto& m : norm) {
        Matrix in(spec.steps, dim, std::vector<double>(m.data(), m.data() + spec.steps * dim));
        tgt.push_back(repeat_copy_lv(in));
      }
      d->targets = flatten_rows(tgt, 0, spec.steps);
    } else {
      d->targets = flatten_rows(norm, 1, spec.steps);
    }
    d->extra["resampled"] = std::to_string(raw->resampled);
  }
  return out;
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t file_hash(const std::filesystem::path& path) { return fnv1a(read_file(path)); }

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  const std::size_t n = ds.size();
  require(ds.inputs.cols() == ds.steps * ds.d_x, "save_dataset: input shape inconsistent");
  if (ds.labelled())
    require(ds.labels.size() == n, "save_dataset: label count mismatch");
  else
    require(ds.targets.rows() == n && ds.targets.cols() == ds.steps * ds.d_y, "save_dataset: target shape inconsistent");

  std::string buf(kMagic, sizeof kMagic);
  put<std::uint16_t>(buf, kVersion);
  for (std::size_t v : {n, ds.steps, ds.d_x, ds.d_y}) {
    if (v > std::numeric_limits<std::uint32_t>::max()) throw IoError("save_dataset: dimension exceeds u32");
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(v));
  }
  put<std::uint8_t>(buf, ds.labelled() ? 1 : 0);
  for (double v : ds.inputs.flat()) put<float>(buf, static_cast<float>(v));
  if (ds.labelled())
    for (auto l : ds.labels) put<std::uint16_t>(buf, l);
  else
    for (double v : ds.targets.flat()) put<float>(buf, static_cast<float>(v));

  std::string meta;
  meta += "system=" + ds.system + "\n";
  meta += "split=" + ds.split + "\n";
  meta += "seed=" + std::to_string(ds.seed) + "\n";
  meta += "T=" + std::to_string(ds.steps) + "\n";
  meta += "L=" + std::to_string(ds.context) + "\n";
  meta += "norm.min=" + join(ds.stats.min) + "\n";
  meta += "norm.max=" + join(ds.stats.max) + "\n";
  for (const auto& [k, v] : ds.extra) meta += k + "=" + v + "\n";
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(meta.size()));
  buf += meta;

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

Dataset load_dataset(const std::filesystem::path& path) {
  Reader r(read_file(path));
  if (r.bytes(sizeof kMagic) != std::string(kMagic, sizeof kMagic))
    throw IoError("'" + path.string() + "' is not a dataset file");
  if (r.get<std::uint16_t>() != kVersion) throw IoError("dataset: unsupported version");
  Dataset ds;
  const std::size_t n = r.get<std::uint32_t>();
  ds.steps = r.get<std::uint32_t>();
  ds.d_x = r.get<std::uint32_t>();
  ds.d_y = r.get<std::uint32_t>();
  const bool labelled = r.get<std::uint8_t>() != 0;
  ds.inputs = Matrix(n, ds.steps * ds.d_x);
  for (double& v : ds.inputs.flat()) v = r.get<float>();
  if (labelled) {
    ds.labels.resize(n);
    for (auto& l : ds.labels) l = r.get<std::uint16_t>();
  } else {
    ds.targets = Matrix(n, ds.steps * ds.d_y);
    for (double& v : ds.targets.flat()) v = r.get<float>();
  }
  const std::size_t meta_len = r.get<std::uint32_t>();
  std::stringstream meta(r.bytes(meta_len));
  if (!r.done()) throw IoError("dataset: trailing bytes after metadata");
  std::string line;
  while (std::getline(meta, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError("dataset: malformed metadata line '" + line + "'");
    const std::string k = line.substr(0, eq), v = line.substr(eq + 1);
    if (k == "system") ds.system = v;
    else if (k == "split") ds.split = v;
    else if (k == "seed") ds.seed = std::stoull(v);
    else if (k == "T") {
      if (std::stoull(v) != ds.steps) throw IoError("dataset: metadata T disagrees with header");
    } else if (k == "L") ds.context = std::stoull(v);
    else if (k == "norm.min") ds.stats.min = split_doubles(v);
    else if (k == "norm.max") ds.stats.max = split_doubles(v);
    else ds.extra[k] = v;
  }
  return ds;
}

}  // namespace warp::dynamics
