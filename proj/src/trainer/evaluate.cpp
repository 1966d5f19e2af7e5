// SPDX-License-Identifier: Apache-2.0
#include "warp/trainer/evaluate.hpp"

#include <algorithm>
#include <string>

#include "warp/errors.hpp"
#include "warp/warpcell/scan.hpp"

namespace warp::trainer {

using warpcell::NodeId;

namespace {

template <class Fn>
void for_chunks(std::size_t n, std::size_t chunk, Fn&& fn) {
  for (std::size_t start = 0; start < n; start += chunk) fn(start, std::min(chunk, n - start));
}

std::vector<Matrix> column_steps(const std::vector<Matrix>& inputs, std::size_t start, std::size_t count) {
  const std::size_t steps = inputs[start].rows();
  const std::size_t dim = inputs[start].cols();
  std::vector<Matrix> out(steps, Matrix(dim, count));
  for (std::size_t b = 0; b < count; ++b) {
    const Matrix& x = inputs[start + b];
    require(x.rows() == steps && x.cols() == dim, "forecast: all inputs must share one shape");
    for (std::size_t t = 0; t < steps; ++t)
      for (std::size_t k = 0; k < dim; ++k) out[t](k, b) = x(t, k);
  }
  return out;
}

warpcell::SequenceOptions context_options(std::size_t context) {
  warpcell::SequenceOptions o;
  o.forcing = warpcell::Forcing::context;
  o.context = context;
  return o;
}

}  // namespace

std::vector<Prediction> WarpForecaster::forecast(const std::vector<Matrix>& inputs, std::size_t context) const {
  std::vector<Prediction> out;
  const std::size_t dy = model_.spec().d_y;
  for_chunks(inputs.size(), batch_, [&](std::size_t start, std::size_t count) {
    grad::Tape tape;
    warpcell::ModelGraph g(tape, model_);
    auto sg = warpcell::build_sequence(g, column_steps(inputs, start, count), context_options(context));
    const std::size_t steps = sg.outputs.size();
    for (std::size_t b = 0; b < count; ++b) {
      Prediction p;
      p.mean = Matrix(steps, dy);
      if (sg.outputs[0].sigma) p.sigma = Matrix(steps, dy);
      for (std::size_t t = 0; t < steps; ++t)
        for (std::size_t k = 0; k < dy; ++k) {
          p.mean(t, k) = tape.value(sg.outputs[t].mean)(k, b);
          if (sg.outputs[t].sigma) p.sigma(t, k) = tape.value(*sg.outputs[t].sigma)(k, b);
        }
      out.push_back(std::move(p));
    }
  });
  return out;
}

std::vector<Matrix> WarpForecaster::states(const std::vector<Matrix>& inputs, std::size_t context) const {
  std::vector<Matrix> out;
  const std::size_t d = model_.d_theta();
  for_chunks(inputs.size(), batch_, [&](std::size_t start, std::size_t count) {
    grad::Tape tape;
    warpcell::ModelGraph g(tape, model_);
    auto sg = warpcell::build_sequence(g, column_steps(inputs, start, count), context_options(context));
    for (std::size_t b = 0; b < count; ++b) {
      Matrix s(sg.states.size(), d);
      for (std::size_t t = 0; t < sg.states.size(); ++t)
        for (std::size_t i = 0; i < d; ++i) s(t, i) = tape.value(sg.states[t])(i, b);
      out.push_back(std::move(s));
    }
  });
  return out;
}

std::vector<Vector> WarpClassifier::logits(const std::vector<Matrix>& inputs) const {
  std::vector<Vector> out;
  warpcell::SequenceOptions o;
  o.decode_final_only = true;
  for_chunks(inputs.size(), batch_, [&](std::size_t start, std::size_t count) {
    grad::Tape tape;
    warpcell::ModelGraph g(tape, model_);
    auto sg = warpcell::build_sequence(g, column_steps(inputs, start, count), o);
    const Matrix& z = tape.value(sg.outputs.back().mean);
    for (std::size_t b = 0; b < count; ++b) out.push_back(z.col(b));
  });
  return out;
}

std::vector<Matrix> sequences(const Matrix& block, std::size_t steps, std::size_t dim) {
  require(block.cols() == steps * dim, "sequences: row length must be T * D");
  std::vector<Matrix> out;
  for (std::size_t i = 0; i < block.rows(); ++i)
    out.emplace_back(steps, dim, std::vector<double>(block.row(i).begin(), block.row(i).end()));
  return out;
}

MetricReport evaluate_forecast(const Forecaster& f, const dynamics::Dataset& data, std::size_t context) {
  require(context >= 1, "evaluate_forecast: L must be >= 1");
  require(context <= data.steps, "evaluate_forecast: L must not exceed T");
  require(!data.labelled(), "evaluate_forecast: dataset is labelled");
  MetricReport rep;
  rep.names = {"mse", "mae", "mape"};
  rep.window = "[" + std::to_string(context) + "," + std::to_string(data.steps) + ")";
  if (context == data.steps) {
    rep.applicable = false;
    rep.aggregate.assign(rep.names.size(), 0.0);
    return rep;
  }
  const auto inputs = sequences(data.inputs, data.steps, data.d_x);
  const auto targets = sequences(data.targets, data.steps, data.d_y);
  const auto preds = f.forecast(inputs, context);
  require(preds.size() == inputs.size(), "evaluate_forecast: forecaster returned the wrong count");
  const bool gaussian = !preds.empty() && !preds[0].sigma.empty();
  if (gaussian) {
    rep.names.push_back("nll");
    rep.names.push_back("bpd");
  }
  const std::size_t w = data.steps - context;
  auto window = [&](const Matrix& m) {
    require(m.rows() == data.steps && m.cols() == data.d_y, "evaluate_forecast: prediction must be T x D_y");
    return Matrix(w, m.cols(), std::vector<double>(m.data() + context * m.cols(), m.data() + m.size()));
  };
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Matrix y = window(targets[i]);
    const Matrix mu = window(preds[i].mean);
    const auto mp = evalkit::mape(y, mu);
    rep.skipped += mp.skipped;
    std::vector<double> row{evalkit::mse(y, mu), evalkit::mae(y, mu), mp.value};
    if (gaussian) {
      const Matrix sg = window(preds[i].sigma);
      const double nll = evalkit::nll_eval(y, mu, sg);
      row.push_back(nll);
      row.push_back(nll * evalkit::kLog2E);
    }
    rep.per_sequence.push_back(std::move(row));
  }
  rep.finalize();
  return rep;
}

MetricReport evaluate_classify(const Classifier& c, const dynamics::Dataset& data) {
  require(data.labelled(), "evaluate_classify: dataset has no labels");
  const auto inputs = sequences(data.inputs, data.steps, data.d_x);
  const auto z = c.logits(inputs);
  require(z.size() == inputs.size(), "evaluate_classify: classifier returned the wrong count");
  std::vector<std::size_t> pred;
  std::vector<std::size_t> labels(data.labels.begin(), data.labels.end());
  for (const auto& v : z) pred.push_back(evalkit::argmax(v));
  MetricReport rep;
  rep.names = {"accuracy"};
  rep.window = "final";
  for (std::size_t i = 0; i < pred.size(); ++i) rep.per_sequence.push_back({pred[i] == labels[i] ? 1.0 : 0.0});
  rep.finalize();
  rep.aggregate[0] = evalkit::accuracy(pred, labels);
  return rep;
}

}  // namespace warp::trainer
