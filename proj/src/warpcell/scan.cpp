// SPDX-License-Identifier: Apache-2.0
#include "warp/warpcell/scan.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "warp/errors.hpp"

namespace warp::warpcell {

NodeId ModelGraph::param(std::size_t slot) {
  if (leaves_.size() < model_.params().size()) leaves_.resize(model_.params().size());
  if (!leaves_[slot]) leaves_[slot] = tape_.parameter(slot, model_.params().value(slot));
  return *leaves_[slot];
}

NodeId ModelGraph::init_state(const Matrix& x0) {
  const ModelSpec& s = model_.spec();
  require(x0.rows() == s.d_x, "init_state: x0 must have D_x rows");
  if (s.init == InitMode::direct) return tape_.broadcast_cols(param(model_.slot_init()), x0.cols());
  NodeId h = tape_.constant(x0);
  for (std::size_t l = 0; l < 3; ++l) {
    h = tape_.add_bias(tape_.matmul(param(model_.slot_init(2 * l)), h), param(model_.slot_init(2 * l + 1)));
    if (l < 2) h = tape_.activation(s.root.activation, h);
  }
  return h;
}

NodeId ModelGraph::apply_transition(NodeId x) {
  switch (model_.spec().transition) {
    case TransitionKind::dense:
      return tape_.matmul(param(model_.slot_transition()), x);
    case TransitionKind::diagonal:
      return tape_.mul_rows(param(model_.slot_transition()), x);
    case TransitionKind::low_rank: {
      NodeId q = tape_.matmul(param(model_.slot_transition(2)), x);
      NodeId c = tape_.matmul(param(model_.slot_transition(1)), q);
      return tape_.add(x, tape_.matmul(param(model_.slot_transition(0)), c));
    }
  }
  return x;
}

namespace {
void check_finite_state(const Tape& tape, NodeId id, std::size_t t) {
  if (!numkit::all_finite(tape.value(id).flat()))
    throw DivergenceError("weight state became non-finite at step " + std::to_string(t), t);
}
}  // namespace

NodeId ModelGraph::step(NodeId theta, NodeId dx, std::size_t t) {
  NodeId next = tape_.add(apply_transition(theta), tape_.matmul(param(model_.slot_b()), dx));
  if (model_.spec().w_lim) next = tape_.clamp(next, -*model_.spec().w_lim, *model_.spec().w_lim);
  check_finite_state(tape_, next, t);
  return next;
}

ModelGraph::Decoded ModelGraph::decode(NodeId theta, double tau, std::optional<NodeId> x0) {
  const ModelSpec& s = model_.spec();
  Decoded d;
  d.raw = tape_.root_eval(theta, s.root, tau);
  switch (s.head.output) {
    case rootnet::OutputKind::point:
      d.mean = d.raw;
      break;
    case rootnet::OutputKind::gaussian: {
      d.mean = tape_.slice_rows(d.raw, 0, s.d_y);
      NodeId sp = tape_.unary(grad::Unary::softplus, tape_.slice_rows(d.raw, s.d_y, s.d_y));
      d.sigma = tape_.clamp(sp, s.head.sigma_min, std::numeric_limits<double>::infinity());
      break;
    }
    case rootnet::OutputKind::sine_phase:
      d.mean = tape_.unary(grad::Unary::sin, tape_.add_const(d.raw, 2.0 * std::numbers::pi * tau));
      break;
    case rootnet::OutputKind::msd_expm:
      require(x0.has_value(), "decode: msd-expm head needs x0");
      d.mean = tape_.col_matvec(d.raw, *x0, 2);
      break;
  }
  switch (s.head.squash) {
    case rootnet::Squash::none:
      break;
    case rootnet::Squash::minmax_clip:
      d.mean = tape_.clamp(d.mean, -s.head.d_lim, s.head.d_lim);
      break;
    case rootnet::Squash::dynamic_tanh:
      d.mean = tape_.dyn_tanh(d.mean, param(*model_.slot_dyn()));
      break;
  }
  return d;
}

double decode_tau(std::size_t t, std::size_t train_T, bool fixed) {
  if (fixed) return kFixedTau;
  if (train_T < 2) return 0.0;
  return static_cast<double>(t) / static_cast<double>(train_T - 1);
}

namespace {

Matrix minus(const Matrix& a, const Matrix& b) {
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.flat()[i] -= b.flat()[i];
  return out;
}

SequenceGraph build_convolutional(ModelGraph& g, const std::vector<Matrix>& inputs, const SequenceOptions& opt,
                                  std::size_t train_T) {
  const WarpModel& model = g.model();
  Tape& tape = g.tape();
  const std::size_t steps = inputs.size();
  const std::size_t d = model.d_theta();
  const std::size_t dx = model.spec().d_x;
  const std::size_t batch = inputs[0].cols();

  std::vector<NodeId> kernel{g.param(model.slot_b())};
  for (std::size_t l = 1; l < steps; ++l) kernel.push_back(g.apply_transition(kernel.back()));
  NodeId stack = tape.vstack(kernel);

  Matrix signal(steps * dx, batch);
  for (std::size_t t = 1; t < steps; ++t)
    for (std::size_t j = 0; j < dx; ++j)
      for (std::size_t b = 0; b < batch; ++b) signal(t * dx + j, b) = inputs[t](j, b) - inputs[t - 1](j, b);
  NodeId conv = tape.causal_conv(stack, tape.constant(std::move(signal)), steps);

  SequenceGraph sg;
  NodeId x0 = tape.constant(inputs[0]);
  NodeId chain = g.init_state(inputs[0]);
  for (std::size_t t = 0; t < steps; ++t) {
    if (t > 0) chain = g.apply_transition(chain);
    NodeId theta = tape.add(chain, tape.slice_rows(conv, t * d, d));
    check_finite_state(tape, theta, t);
    sg.states.push_back(theta);
  }
  for (std::size_t t = 0; t < steps; ++t) {
    if (opt.decode_final_only && t + 1 != steps) continue;
    sg.outputs.push_back(g.decode(sg.states[t], decode_tau(t, train_T, model.spec().fixed_tau), x0));
  }
  return sg;
}

}  // namespace

SequenceGraph build_sequence(ModelGraph& g, const std::vector<Matrix>& inputs, const SequenceOptions& opt,
                             std::vector<numkit::RngStream>* rngs) {
  const WarpModel& model = g.model();
  const ModelSpec& s = model.spec();
  Tape& tape = g.tape();
  require(!inputs.empty(), "build_sequence: need at least one step");
  const std::size_t steps = inputs.size();
  const std::size_t batch = inputs[0].cols();
  for (const auto& x : inputs)
    require(x.rows() == s.d_x && x.cols() == batch, "build_sequence: every step must be D_x x B");
  const std::size_t train_T = opt.train_T == 0 ? steps : opt.train_T;

  if (opt.convolutional) {
    if (opt.forcing != Forcing::ground_truth)
      throw UnsupportedMode("convolutional mode cannot feed back predictions");
    if (s.w_lim) throw UnsupportedMode("convolutional mode cannot apply weight clipping");
    return build_convolutional(g, inputs, opt, train_T);
  }

  const bool feedback = opt.forcing != Forcing::ground_truth;
  if (feedback) require(s.d_x == s.d_y, "build_sequence: feeding back predictions needs D_x == D_y");
  if (opt.forcing == Forcing::bernoulli) {
    require(opt.p_forcing >= 0.0 && opt.p_forcing <= 1.0, "build_sequence: p_forcing must lie in [0, 1]");
    require(rngs != nullptr && rngs->size() == batch, "build_sequence: one RngStream per column required");
  }

  SequenceGraph sg;
  NodeId x0 = tape.constant(inputs[0]);
  NodeId theta = g.init_state(inputs[0]);
  check_finite_state(tape, theta, 0);
  std::optional<NodeId> prev_token;  // only when the previous token lives on the tape
  std::optional<ModelGraph::Decoded> prev_out;

  for (std::size_t t = 0; t < steps; ++t) {
    if (t > 0) {
      std::optional<NodeId> token;
      if (opt.forcing == Forcing::bernoulli) {
        std::vector<double> mask(batch);
        Matrix eps(s.d_y, batch);
        for (std::size_t b = 0; b < batch; ++b) {
          auto& rng = (*rngs)[b];
          mask[b] = rng.bernoulli(opt.p_forcing) ? 1.0 : 0.0;
          for (std::size_t k = 0; k < s.d_y; ++k) eps(k, b) = rng.normal();
        }
        NodeId pred = prev_out->mean;
        if (opt.sample && prev_out->sigma) pred = tape.add(pred, tape.mul_const(*prev_out->sigma, std::move(eps)));
        token = tape.blend(std::move(mask), tape.constant(inputs[t]), pred);
      } else if (opt.forcing == Forcing::context && t >= opt.context) {
        token = prev_out->mean;
      }

      NodeId dx;
      if (!token && !prev_token) {
        dx = tape.constant(minus(inputs[t], inputs[t - 1]));
      } else {
        NodeId cur = token ? *token : tape.constant(inputs[t]);
        NodeId prev = prev_token ? *prev_token : tape.constant(inputs[t - 1]);
        dx = tape.sub(cur, prev);
      }
      prev_token = token;
      theta = g.step(theta, dx, t);
    }
    sg.states.push_back(theta);
    const bool want = !opt.decode_final_only || t + 1 == steps;
    if (want || feedback) {
      auto out = g.decode(theta, decode_tau(t, train_T, s.fixed_tau), x0);
      if (want) sg.outputs.push_back(out);
      prev_out = out;
    }
  }
  return sg;
}

// ------------------------------------------------------------ single-sequence API

Vector init_state(const WarpModel& model, std::span<const double> x0) {
  require(x0.size() == model.spec().d_x, "init_state: x0 length must equal D_x");
  Tape tape;
  ModelGraph g(tape, model);
  NodeId th = g.init_state(Matrix::column(x0));
  return tape.value(th).storage();
}

Vector step(const WarpModel& model, std::span<const double> theta_prev, std::span<const double> dx, std::size_t t) {
  require(theta_prev.size() == model.d_theta(), "step: state length must equal D_theta");
  require(dx.size() == model.spec().d_x, "step: dx length must equal D_x");
  Tape tape;
  ModelGraph g(tape, model);
  NodeId th = g.step(tape.constant(Matrix::column(theta_prev)), tape.constant(Matrix::column(dx)), t);
  return tape.value(th).storage();
}

namespace {

ScanResult collect(const Tape& tape, const SequenceGraph& sg, std::size_t d_theta, std::size_t d_y) {
  ScanResult r;
  const std::size_t steps = sg.states.size();
  r.states = Matrix(steps, d_theta);
  for (std::size_t t = 0; t < steps; ++t) {
    const Matrix& v = tape.value(sg.states[t]);
    for (std::size_t i = 0; i < d_theta; ++i) r.states(t, i) = v(i, 0);
  }
  r.mean = Matrix(sg.outputs.size(), d_y);
  const bool has_sigma = !sg.outputs.empty() && sg.outputs[0].sigma.has_value();
  if (has_sigma) r.sigma = Matrix(sg.outputs.size(), d_y);
  for (std::size_t t = 0; t < sg.outputs.size(); ++t) {
    const Matrix& m = tape.value(sg.outputs[t].mean);
    for (std::size_t k = 0; k < d_y; ++k) r.mean(t, k) = m(k, 0);
    if (has_sigma) {
      const Matrix& sg_v = tape.value(*sg.outputs[t].sigma);
      for (std::size_t k = 0; k < d_y; ++k) r.sigma(t, k) = sg_v(k, 0);
    }
  }
  return r;
}

std::vector<Matrix> rows_as_columns(const Matrix& inputs) {
  std::vector<Matrix> out;
  for (std::size_t t = 0; t < inputs.rows(); ++t) out.push_back(Matrix::column(inputs.row(t)));
  return out;
}

}  // namespace

ScanResult scan_recurrent(const WarpModel& model, const Matrix& inputs, const SequenceOptions& opt,
                          numkit::RngStream* rng) {
  require(inputs.cols() == model.spec().d_x && inputs.rows() >= 1, "scan_recurrent: inputs must be T x D_x");
  SequenceOptions o = opt;
  o.convolutional = false;
  Tape tape;
  ModelGraph g(tape, model);
  std::vector<numkit::RngStream> rngs;
  if (opt.forcing == Forcing::bernoulli) {
    require(rng != nullptr, "scan_recurrent: bernoulli forcing needs an RngStream");
    rngs.push_back(*rng);
  }
  auto sg = build_sequence(g, rows_as_columns(inputs), o, rngs.empty() ? nullptr : &rngs);
  if (rng && !rngs.empty()) *rng = rngs[0];
  return collect(tape, sg, model.d_theta(), model.spec().d_y);
}

std::vector<Matrix> materialize_kernel(const WarpModel& model, std::size_t steps) {
  require(steps >= 1, "materialize_kernel: T must be >= 1");
  Tape tape;
  ModelGraph g(tape, model);
  std::vector<Matrix> out;
  NodeId k = g.param(model.slot_b());
  out.push_back(tape.value(k));
  for (std::size_t l = 1; l < steps; ++l) {
    k = g.apply_transition(k);
    out.push_back(tape.value(k));
  }
  return out;
}

ScanResult conv_forward(const WarpModel& model, const Matrix& inputs, std::size_t train_T) {
  require(inputs.cols() == model.spec().d_x && inputs.rows() >= 1, "conv_forward: inputs must be T x D_x");
  SequenceOptions o;
  o.convolutional = true;
  o.train_T = train_T;
  Tape tape;
  ModelGraph g(tape, model);
  auto sg = build_sequence(g, rows_as_columns(inputs), o);
  return collect(tape, sg, model.d_theta(), model.spec().d_y);
}

std::vector<Matrix> time_major(const Matrix& seqs, std::size_t steps, std::size_t dim,
                               std::span<const std::size_t> cols) {
  require(seqs.cols() == steps * dim, "time_major: row length must be T * D");
  std::vector<Matrix> out(steps, Matrix(dim, cols.size()));
  for (std::size_t b = 0; b < cols.size(); ++b) {
    require(cols[b] < seqs.rows(), "time_major: sequence index out of range");
    const auto row = seqs.row(cols[b]);
    for (std::size_t t = 0; t < steps; ++t)
      for (std::size_t k = 0; k < dim; ++k) out[t](k, b) = row[t * dim + k];
  }
  return out;
}

}  // namespace warp::warpcell
