// SPDX-License-Identifier: Apache-2.0
#include "warp/trainer/graph.hpp"

#include <cmath>
#include <vector>

#include "warp/errors.hpp"

namespace warp::trainer {

using warpcell::Forcing;
using warpcell::NodeId;

namespace {
constexpr std::uint64_t kForcingTag = 0x666f7263ULL;
}

warpcell::SequenceOptions sequence_options(const TrainConfig& cfg, const WarpModel& model) {
  warpcell::SequenceOptions o;
  switch (cfg.mode) {
    case TrainMode::recurrent_ar:
      o.forcing = Forcing::bernoulli;
      o.p_forcing = cfg.p_forcing;
      o.sample = cfg.sample && model.spec().head.output == rootnet::OutputKind::gaussian;
      break;
    case TrainMode::recurrent_non_ar:
      break;
    case TrainMode::convolutional:
      o.convolutional = true;
      break;
  }
  o.decode_final_only = cfg.loss == LossKind::cce;
  return o;
}

numkit::RngStream forcing_stream(std::uint64_t seed, std::size_t epoch, std::size_t seq) {
  return numkit::RngStream(seed, numkit::stream_key(kForcingTag, epoch, seq));
}

NodeId build_loss(warpcell::ModelGraph& g, const dynamics::Dataset& data, std::span<const std::size_t> idx,
                  const TrainConfig& cfg, std::size_t epoch) {
  require(!idx.empty(), "build_loss: empty batch");
  const WarpModel& model = g.model();
  const std::size_t steps = data.steps;
  const std::size_t batch = idx.size();
  auto inputs = warpcell::time_major(data.inputs, steps, data.d_x, idx);

  auto opt = sequence_options(cfg, model);
  opt.train_T = steps;
  std::vector<numkit::RngStream> rngs;
  if (opt.forcing == Forcing::bernoulli)
    for (std::size_t i : idx) rngs.push_back(forcing_stream(cfg.seed, epoch, i));
  auto sg = warpcell::build_sequence(g, inputs, opt, rngs.empty() ? nullptr : &rngs);
  grad::Tape& tape = g.tape();

  if (cfg.loss == LossKind::cce) {
    std::vector<std::size_t> labels;
    for (std::size_t i : idx) labels.push_back(data.labels.at(i));
    return tape.softmax_cce(sg.outputs.back().mean, std::move(labels));
  }

  const std::size_t dy = model.spec().d_y;
  Matrix target(steps * dy, batch);
  for (std::size_t b = 0; b < batch; ++b) {
    const auto row = data.targets.row(idx[b]);
    for (std::size_t r = 0; r < steps * dy; ++r) target(r, b) = row[r];
  }
  std::vector<NodeId> means;
  std::vector<NodeId> sigmas;
  for (const auto& o : sg.outputs) {
    means.push_back(o.mean);
    if (o.sigma) sigmas.push_back(*o.sigma);
  }
  NodeId loss;
  if (cfg.loss == LossKind::nll) {
    require(sigmas.size() == means.size(), "build_loss: nll needs a gaussian head");
    loss = tape.gaussian_nll(tape.vstack(means), tape.vstack(sigmas), std::move(target));
  } else {
    loss = tape.mse(tape.vstack(means), std::move(target));
  }
  return tape.scale(loss, 1.0 / static_cast<double>(steps));
}

BatchResult batch_loss(const WarpModel& model, const dynamics::Dataset& data, std::span<const std::size_t> idx,
                       const TrainConfig& cfg, std::size_t epoch, bool with_grad) {
  grad::Tape tape;
  warpcell::ModelGraph g(tape, model);
  NodeId loss = build_loss(g, data, idx, cfg, epoch);
  BatchResult r;
  r.loss = tape.scalar(loss);
  r.grads = grad::GradStore(model.params());
  if (with_grad) tape.backward(loss, r.grads);
  return r;
}

}  // namespace warp::trainer
