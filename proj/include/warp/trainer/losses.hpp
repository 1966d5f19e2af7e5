// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>

#include "warp/numkit/matrix.hpp"

namespace warp::trainer {

using numkit::Matrix;
using numkit::Vector;

/// (1/T) sum_t ||y_t - yhat_t||^2 over T x D_y arrays.
double loss_mse(const Matrix& y, const Matrix& yhat);

/// (1/T) sum_t [ ||y_t - mu_t||^2 / (2 sigma_t^2) + sum_d log sigma_{t,d} ], with sigma
/// applied elementwise. Throws ContractViolation when any sigma is below sigma_min.
double loss_nll(const Matrix& y, const Matrix& mu, const Matrix& sigma, double sigma_min);

/// -log softmax(logits)[label], max-subtracted.
double loss_cce(std::size_t label, std::span<const double> logits);

}  // namespace warp::trainer
