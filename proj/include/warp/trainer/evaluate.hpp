// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "warp/dynamics/dataset.hpp"
#include "warp/evalkit/metrics.hpp"
#include "warp/warpcell/model.hpp"

namespace warp::trainer {

using evalkit::MetricReport;
using numkit::Matrix;
using numkit::Vector;

struct Prediction {
  Matrix mean;   // T x D_y
  Matrix sigma;  // T x D_y, empty for point forecasts
};

/// Produces forecasts for whole sequences given L observed tokens.
class Forecaster {
 public:
  virtual ~Forecaster() = default;
  /// inputs[i] is T x D_x; tokens at t < context are observed, later ones are the
  /// forecaster's own mean predictions.
  virtual std::vector<Prediction> forecast(const std::vector<Matrix>& inputs, std::size_t context) const = 0;
};

class Classifier {
 public:
  virtual ~Classifier() = default;
  /// Final-token logits for each T x D_x input.
  virtual std::vector<Vector> logits(const std::vector<Matrix>& inputs) const = 0;
};

/// Context forcing through a trained model, batched over sequences.
class WarpForecaster final : public Forecaster {
 public:
  explicit WarpForecaster(const warpcell::WarpModel& model, std::size_t batch = 128) : model_(model), batch_(batch) {}
  std::vector<Prediction> forecast(const std::vector<Matrix>& inputs, std::size_t context) const override;

  /// theta_0..theta_{T-1} for each sequence under the same protocol.
  std::vector<Matrix> states(const std::vector<Matrix>& inputs, std::size_t context) const;

 private:
  const warpcell::WarpModel& model_;
  std::size_t batch_;
};

class WarpClassifier final : public Classifier {
 public:
  explicit WarpClassifier(const warpcell::WarpModel& model, std::size_t batch = 256) : model_(model), batch_(batch) {}
  std::vector<Vector> logits(const std::vector<Matrix>& inputs) const override;

 private:
  const warpcell::WarpModel& model_;
  std::size_t batch_;
};

/// Rows of an N x (T * D) block as N matrices of T x D.
std::vector<Matrix> sequences(const Matrix& block, std::size_t steps, std::size_t dim);

/// Metrics mse, mae, mape (plus nll and bpd for gaussian forecasts) over output
/// steps [L, T) in normalized space. L == T reports not-applicable.
MetricReport evaluate_forecast(const Forecaster& f, const dynamics::Dataset& data, std::size_t context);

/// Metric "accuracy": per sequence 1 or 0, aggregate = fraction correct.
MetricReport evaluate_classify(const Classifier& c, const dynamics::Dataset& data);

}  // namespace warp::trainer
