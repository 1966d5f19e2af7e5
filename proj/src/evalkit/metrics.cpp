// SPDX-License-Identifier: Apache-2.0
#include "warp/evalkit/metrics.hpp"

#include <cmath>
#include <numbers>

#include "warp/errors.hpp"

namespace warp::evalkit {

namespace {
void check(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ContractViolation(std::string(what) + ": shapes differ");
  if (a.empty()) throw ContractViolation(std::string(what) + ": empty input");
}
}  // namespace

double mse(const Matrix& y, const Matrix& yhat) {
  check(y, yhat, "mse");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double e = y.flat()[i] - yhat.flat()[i];
    s += e * e;
  }
  return s / static_cast<double>(y.size());
}

double mae(const Matrix& y, const Matrix& yhat) {
  check(y, yhat, "mae");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(y.flat()[i] - yhat.flat()[i]);
  return s / static_cast<double>(y.size());
}

MapeResult mape(const Matrix& y, const Matrix& yhat) {
  check(y, yhat, "mape");
  MapeResult r;
  double s = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double yi = y.flat()[i];
    if (std::abs(yi) < 1e-8) {
      ++r.skipped;
      continue;
    }
    s += std::abs((yi - yhat.flat()[i]) / yi);
    ++used;
  }
  r.value = used ? 100.0 * s / static_cast<double>(used) : 0.0;
  return r;
}

double nll_eval(const Matrix& y, const Matrix& mu, const Matrix& sigma) {
  check(y, mu, "nll_eval");
  check(y, sigma, "nll_eval");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double sg = sigma.flat()[i];
    require(sg > 0.0, "nll_eval: sigma must be positive");
    const double e = y.flat()[i] - mu.flat()[i];
    s += 0.5 * std::log(2.0 * std::numbers::pi * sg * sg) + 0.5 * e * e / (sg * sg);
  }
  return s / static_cast<double>(y.size());
}

double bpd(const Matrix& y, const Matrix& mu, const Matrix& sigma) { return nll_eval(y, mu, sigma) * kLog2E; }

double accuracy(const std::vector<std::size_t>& predicted, const std::vector<std::size_t>& labels) {
  if (labels.empty()) throw ContractViolation("accuracy: empty set");
  require(predicted.size() == labels.size(), "accuracy: predictions and labels differ in length");
  std::size_t ok = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) ok += predicted[i] == labels[i];
  return static_cast<double>(ok) / static_cast<double>(labels.size());
}

std::size_t argmax(const std::vector<double>& logits) {
  require(!logits.empty(), "argmax: empty logits");
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[best]) best = i;
  return best;
}

void MetricReport::finalize() {
  count = per_sequence.size();
  aggregate.assign(names.size(), 0.0);
  if (count == 0) return;
  for (const auto& row : per_sequence) {
    require(row.size() == names.size(), "MetricReport: row width differs from header");
    for (std::size_t k = 0; k < row.size(); ++k) aggregate[k] += row[k];
  }
  for (double& v : aggregate) v /= static_cast<double>(count);
}

double MetricReport::value(const std::string& name) const {
  for (std::size_t k = 0; k < names.size(); ++k)
    if (names[k] == name) return aggregate.at(k);
  throw ContractViolation("MetricReport: no metric named '" + name + "'");
}

}  // namespace warp::evalkit
