// SPDX-License-Identifier: Apache-2.0
#include "warp/cli/presets.hpp"

#include <map>

#include "warp/errors.hpp"

namespace warp::cli {

namespace {

// Dynamical-system reconstruction: width-48 depth-3 Swish root, MSE loss,
// unit dynamic tanh on the mean, learning rate 1e-5.
constexpr const char* kDynamical = R"(model.width = 48
model.depth = 3
model.activation = swish
model.squash = dyn-tanh
train.loss = mse
train.lr = 0.00001
)";

constexpr const char* kMsd = R"(dataset.system = msd
dataset.n_train = 10000
dataset.steps = 256
dataset.context = 100
model.init = direct
train.mode = ar
train.p_forcing = 0.25
train.epochs = 1000
train.batch_size = 1024
)";

constexpr const char* kMsdZero = R"(dataset.system = msd-zero
dataset.n_train = 10000
dataset.steps = 256
dataset.context = 100
model.init = hypernet
train.mode = ar
train.p_forcing = 0.25
train.epochs = 1000
train.batch_size = 1024
)";

constexpr const char* kLv = R"(dataset.system = lv
dataset.n_train = 10000
dataset.steps = 256
dataset.context = 100
model.init = direct
train.mode = ar
train.p_forcing = 1
train.epochs = 1500
train.batch_size = 1024
)";

constexpr const char* kLvCopy = R"(dataset.system = lv-copy
dataset.n_train = 10000
dataset.steps = 256
dataset.context = 100
model.init = direct
train.mode = ar
train.p_forcing = 1
train.epochs = 1500
train.batch_size = 1024
)";

constexpr const char* kSine = R"(dataset.system = sine
dataset.n_test = 100
dataset.steps = 16
dataset.context = 1
model.width = 48
model.depth = 3
model.activation = swish
model.init = hypernet
train.loss = mse
train.lr = 0.00001
train.mode = ar
train.p_forcing = 0.25
train.epochs = 1000
)";

constexpr const char* kSpirals = R"(dataset.system = spirals
dataset.n_train = 10000
dataset.n_test = 1000
dataset.steps = 64
dataset.context = 64
model.width = 24
model.depth = 1
model.activation = swish
model.init = hypernet
train.loss = cce
train.mode = non-ar
train.lr = 0.00001
train.epochs = 4000
train.batch_size = 10000
)";

constexpr const char* kPhysMsd = "model.head = msd-expm\n";
constexpr const char* kPhysSine = "model.head = sine-phase\n";

// Desk-scale runs sized for a single CPU core.
constexpr const char* kDeskSine = R"(dataset.system = sine
dataset.n_train = 10
dataset.n_test = 100
dataset.steps = 16
dataset.context = 1
model.width = 24
model.depth = 3
model.activation = swish
model.init = hypernet
train.loss = mse
train.mode = ar
train.p_forcing = 0.25
train.epochs = 1000
train.batch_size = 10
train.lr = 0.0001
train.g_lim = 1
)";

constexpr const char* kDeskMsd = R"(dataset.system = msd
dataset.n_train = 2000
dataset.n_test = 200
dataset.steps = 256
dataset.context = 100
model.width = 24
model.depth = 1
model.activation = swish
model.squash = dyn-tanh
model.init = direct
train.loss = mse
train.mode = ar
train.p_forcing = 0.25
train.epochs = 300
train.batch_size = 32
train.lr = 0.0001
train.g_lim = 1
)";

constexpr const char* kDeskSpirals = R"(dataset.system = spirals
dataset.n_train = 2000
dataset.n_test = 500
dataset.steps = 64
dataset.context = 64
model.width = 24
model.depth = 1
model.activation = swish
model.init = hypernet
train.loss = cce
train.mode = non-ar
train.epochs = 100
train.batch_size = 100
train.lr = 0.0001
train.g_lim = 1
)";

std::string sine_split(const char* split, const char* n, const char* extra) {
  return std::string(kSine) + "dataset.n_train = " + n + "\n" + extra + "# split " + split + "\n";
}

const std::map<std::string, std::string>& table() {
  static const std::map<std::string, std::string> t = [] {
    std::map<std::string, std::string> m;
    const std::string dyn = kDynamical;
    m["msd-warp"] = dyn + kMsd;
    m["msd-warp-phys"] = dyn + kMsd + kPhysMsd;
    m["msd-zero-warp"] = dyn + kMsdZero;
    m["msd-zero-warp-phys"] = dyn + kMsdZero + kPhysMsd;
    m["lv-warp"] = dyn + kLv;
    m["lv-warp-phys"] = dyn + kLv + kPhysMsd;
    m["lv-copy-warp"] = dyn + kLvCopy;
    const char* splits[][2] = {{"tiny", "1"}, {"small", "10"}, {"medium", "100"}, {"large", "1000"}, {"huge", "10000"}};
    for (const auto& s : splits) {
      const std::string base = std::string("sine-") + s[0];
      const std::string batch = std::string("train.batch_size = ") + s[1] + "\n";
      m[base] = sine_split(s[0], s[1], batch.c_str());
      m[base + "-phys"] = sine_split(s[0], s[1], (batch + kPhysSine).c_str());
    }
    m["spirals-warp"] = kSpirals;
    m["sine-small-fixed-tau"] = m["sine-small"] + "model.fixed_tau = true\n";
    std::string direct = m["sine-small"];
    direct.replace(direct.find("model.init = hypernet"), 21, "model.init = direct");
    m["sine-small-direct"] = direct;
    m["sine-small-diagonal"] = m["sine-small"] + "model.transition = diagonal\n";
    m["sine-small-low-rank"] = m["sine-small"] + "model.transition = low-rank\nmodel.rank = 16\n";
    m["desk-sine"] = kDeskSine;
    m["desk-sine-phys"] = std::string(kDeskSine) + kPhysSine;
    m["desk-msd"] = kDeskMsd;
    m["desk-msd-phys"] = std::string(kDeskMsd) + kPhysMsd;
    m["desk-spirals"] = kDeskSpirals;
    return m;
  }();
  return t;
}

}  // namespace

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& [k, v] : table()) out.push_back(k);
  return out;
}

std::string preset_text(std::string_view name) {
  auto it = table().find(std::string(name));
  if (it == table().end()) throw ValidationError("unknown preset '" + std::string(name) + "'");
  return it->second;
}

}  // namespace warp::cli
