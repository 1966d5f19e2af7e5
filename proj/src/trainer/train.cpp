// SPDX-License-Identifier: Apache-2.0
#include "warp/trainer/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "warp/errors.hpp"
#include "warp/numkit/rng.hpp"
#include "warp/trainer/graph.hpp"

namespace warp::trainer {

LossKind parse_loss(std::string_view s) {
  if (s == "mse") return LossKind::mse;
  if (s == "nll") return LossKind::nll;
  if (s == "cce") return LossKind::cce;
  throw ValidationError("unknown loss '" + std::string(s) + "' (expected mse, nll or cce)");
}

std::string_view to_string(LossKind k) {
  switch (k) {
    case LossKind::mse: return "mse";
    case LossKind::nll: return "nll";
    case LossKind::cce: return "cce";
  }
  return "?";
}

TrainMode parse_mode(std::string_view s) {
  if (s == "ar") return TrainMode::recurrent_ar;
  if (s == "non-ar") return TrainMode::recurrent_non_ar;
  if (s == "conv") return TrainMode::convolutional;
  throw ValidationError("unknown training mode '" + std::string(s) + "' (expected ar, non-ar or conv)");
}

std::string_view to_string(TrainMode m) {
  switch (m) {
    case TrainMode::recurrent_ar: return "ar";
    case TrainMode::recurrent_non_ar: return "non-ar";
    case TrainMode::convolutional: return "conv";
  }
  return "?";
}

void validate(const TrainConfig& cfg, const WarpModel& model, const dynamics::Dataset& data) {
  const auto& s = model.spec();
  if (cfg.batch_size == 0) throw ValidationError("train: batch size must be >= 1");
  if (!(cfg.lr > 0.0) || !std::isfinite(cfg.lr)) throw ValidationError("train: learning rate must be positive");
  if (!(cfg.p_forcing >= 0.0 && cfg.p_forcing <= 1.0)) throw ValidationError("train: p_forcing must lie in [0, 1]");
  if (!(cfg.g_lim > 0.0)) throw ValidationError("train: g_lim must be positive");
  if (data.size() == 0) throw ValidationError("train: dataset is empty");
  if (data.d_x != s.d_x) throw ValidationError("train: dataset D_x does not match the model");
  if (data.d_y != s.d_y) throw ValidationError("train: dataset D_y does not match the model");
  if (cfg.loss == LossKind::cce) {
    if (!data.labelled()) throw ValidationError("train: cce loss needs a labelled dataset");
    if (s.head.output != rootnet::OutputKind::point) throw ValidationError("train: cce loss needs the point head");
    if (cfg.mode != TrainMode::recurrent_non_ar) throw ValidationError("train: classification trains in non-ar mode");
  } else {
    if (data.labelled()) throw ValidationError("train: labelled dataset needs the cce loss");
  }
  if (cfg.loss == LossKind::nll && s.head.output != rootnet::OutputKind::gaussian)
    throw ValidationError("train: nll loss needs the gaussian head");
  if (cfg.mode == TrainMode::convolutional && s.w_lim) throw ValidationError("train: conv mode cannot clip weights");
  if (cfg.mode == TrainMode::recurrent_ar && s.d_x != s.d_y)
    throw ValidationError("train: ar mode feeds predictions back and needs D_x == D_y");
}

WarpModel build_model(const warpcell::ModelSpec& spec, const dynamics::Dataset& train, std::uint64_t seed) {
  WarpModel model(spec, seed);
  if (model.slot_dyn()) {
    const Matrix& src = train.labelled() ? train.inputs : train.targets;
    double m = 0.0;
    for (double v : src.flat()) m = std::max(m, std::abs(v));
    if (m <= 0.0) m = 1.0;
    model.set_dyn_tanh({m, 0.0, m, 0.0});
  }
  return model;
}

namespace {
constexpr std::uint64_t kShuffleTag = 0x73687566ULL;

std::vector<std::size_t> epoch_order(std::uint64_t seed, std::size_t epoch, std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  numkit::RngStream rng(seed, numkit::stream_key(kShuffleTag, epoch));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}
}  // namespace

std::vector<EpochRecord> train(WarpModel& model, const dynamics::Dataset& data, const TrainConfig& cfg,
                               TrainState& state, const EpochHook& hook) {
  validate(cfg, model, data);
  if (state.opt.m.size() != model.params().size()) state = TrainState(model, cfg);
  std::vector<EpochRecord> trace;
  const std::size_t n = data.size();
  for (std::size_t epoch = state.epoch; epoch < cfg.epochs; ++epoch) {
    const auto order = epoch_order(cfg.seed, epoch, n);
    double sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::span<const std::size_t> idx(order.data() + start, std::min(cfg.batch_size, n - start));
      BatchResult r;
      try {
        r = batch_loss(model, data, idx, cfg, epoch);
      } catch (const DivergenceError& e) {
        throw DivergenceError("epoch " + std::to_string(epoch) + ": " + e.what(), e.step());
      } catch (const OverflowError& e) {
        throw DivergenceError("epoch " + std::to_string(epoch) + ": " + e.what(), 0);
      }
      if (!std::isfinite(r.loss)) throw DivergenceError("epoch " + std::to_string(epoch) + ": non-finite loss", 0);
      grad::clip_grad_norm(r.grads, cfg.g_lim);
      grad::adabelief_step(state.opt, model.params(), r.grads);
      state.plateau.record(r.loss);
      sum += r.loss;
      ++batches;
    }
    grad::plateau_update(state.plateau, state.plateau.window_average(), state.opt.lr);
    state.epoch = epoch + 1;
    trace.push_back({epoch, sum / static_cast<double>(batches), state.opt.lr});
    if (hook) hook(trace.back(), state);
  }
  return trace;
}

std::vector<EpochRecord> train(WarpModel& model, const dynamics::Dataset& data, const TrainConfig& cfg) {
  TrainState state(model, cfg);
  return train(model, data, cfg, state);
}

}  // namespace warp::trainer
