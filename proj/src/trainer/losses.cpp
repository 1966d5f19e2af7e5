// SPDX-License-Identifier: Apache-2.0
#include "warp/trainer/losses.hpp"

#include <algorithm>
#include <cmath>

#include "warp/errors.hpp"

namespace warp::trainer {

namespace {
void same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ContractViolation(std::string(what) + ": shapes differ");
  if (a.rows() == 0) throw ContractViolation(std::string(what) + ": T must be >= 1");
}
}  // namespace

double loss_mse(const Matrix& y, const Matrix& yhat) {
  same_shape(y, yhat, "loss_mse");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double e = y.flat()[i] - yhat.flat()[i];
    s += e * e;
  }
  return s / static_cast<double>(y.rows());
}

double loss_nll(const Matrix& y, const Matrix& mu, const Matrix& sigma, double sigma_min) {
  same_shape(y, mu, "loss_nll");
  same_shape(y, sigma, "loss_nll");
  require(sigma_min > 0.0, "loss_nll: sigma_min must be positive");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double sg = sigma.flat()[i];
    if (!(sg >= sigma_min)) throw ContractViolation("loss_nll: sigma below sigma_min");
    const double e = y.flat()[i] - mu.flat()[i];
    s += e * e / (2.0 * sg * sg) + std::log(sg);
  }
  return s / static_cast<double>(y.rows());
}

double loss_cce(std::size_t label, std::span<const double> logits) {
  require(!logits.empty(), "loss_cce: empty logits");
  if (label >= logits.size()) throw ContractViolation("loss_cce: label out of range");
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - mx);
  return std::log(z) - (logits[label] - mx);
}

}  // namespace warp::trainer
