// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "warp/numkit/matrix.hpp"

namespace warp::evalkit {

using numkit::Matrix;
using numkit::Vector;

inline constexpr double kLog2E = 1.4426950408889634;

/// All take T x D arrays and average over every element (time and feature).
double mse(const Matrix& y, const Matrix& yhat);
double mae(const Matrix& y, const Matrix& yhat);

struct MapeResult {
  double value = 0.0;       // percent
  std::size_t skipped = 0;  // entries with |y| < 1e-8
};
MapeResult mape(const Matrix& y, const Matrix& yhat);

/// mean of 0.5 log(2 pi sigma^2) + 0.5 (y - mu)^2 / sigma^2.
double nll_eval(const Matrix& y, const Matrix& mu, const Matrix& sigma);
/// nll_eval converted to bits.
double bpd(const Matrix& y, const Matrix& mu, const Matrix& sigma);

/// Fraction of predictions equal to labels.
double accuracy(const std::vector<std::size_t>& predicted, const std::vector<std::size_t>& labels);

/// Index of the largest logit, lowest index on ties.
std::size_t argmax(const std::vector<double>& logits);

struct MetricReport {
  std::vector<std::string> names;
  std::vector<std::vector<double>> per_sequence;  // one row per sequence, aligned with names
  std::vector<double> aggregate;                  // column means
  std::string window;                             // e.g. "[100,256)"
  std::size_t count = 0;
  std::size_t skipped = 0;  // MAPE entries skipped across all sequences
  bool applicable = true;   // false when the window is empty

  void finalize();
  double value(const std::string& name) const;
};

}  // namespace warp::evalkit
