// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

#include "warp/numkit/matrix.hpp"

namespace warp::numkit {

struct EigenPairs {
  Vector values;        // descending
  Matrix vectors;       // n x k, column i pairs with values[i]
};

/// Top-k eigenpairs of a symmetric matrix by cyclic Jacobi rotations.
/// Throws ContractViolation if `m` is not square and symmetric within 1e-10
/// (relative to its largest entry) or k > rows.
EigenPairs symmetric_eigh_topk(const Matrix& m, std::size_t k);

}  // namespace warp::numkit
