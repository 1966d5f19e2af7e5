// SPDX-License-Identifier: Apache-2.0
#pragma once

// Reverse-mode tape over matrix-valued nodes. Every node holds a rows x cols
// matrix; by convention columns index the sequences of a mini-batch, so one
// tape carries a whole batch and per-sequence work becomes GEMM.

#include <cstddef>
#include <span>
#include <vector>

#include "warp/gradengine/params.hpp"
#include "warp/rootnet/rootnet.hpp"

namespace warp::grad {

using NodeId = std::size_t;

enum class Unary { relu, swish, tanh, sigmoid, softplus, sin };

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  // ------------------------------------------------------------ leaves
  NodeId constant(Matrix v);
  /// Leaf that reads `value` in place; `value` must outlive the tape.
  NodeId parameter(std::size_t slot, const Matrix& value);

  // ------------------------------------------------------------ ops
  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);                    // elementwise
  NodeId mul_const(NodeId x, Matrix c);              // elementwise by a constant
  NodeId add_bias(NodeId x, NodeId bias);            // bias: rows x 1, added to every column
  NodeId mul_rows(NodeId d, NodeId x);               // d: rows x 1, scales each row of x
  NodeId broadcast_cols(NodeId x, std::size_t cols); // x: rows x 1 -> rows x cols
  NodeId scale(NodeId x, double s);
  NodeId add_const(NodeId x, double c);
  NodeId unary(Unary f, NodeId x);
  NodeId activation(rootnet::Activation a, NodeId x);
  /// Pass-through strictly inside (lo, hi); gradient 0 on and beyond the bounds.
  NodeId clamp(NodeId x, double lo, double hi);
  NodeId slice_rows(NodeId x, std::size_t begin, std::size_t count);
  NodeId vstack(std::span<const NodeId> parts);
  NodeId add_n(std::span<const NodeId> parts);
  /// Column b of the result is mask[b] != 0 ? a[:, b] : b_node[:, b].
  NodeId blend(std::vector<double> mask, NodeId a, NodeId b);
  /// Per column: reshape m[:, b] (rows*k entries, row-major) to rows x k and multiply v[:, b].
  NodeId col_matvec(NodeId m, NodeId v, std::size_t rows);
  /// Evaluates the root MLP at `tau` once per column, each column of `theta` being a flat state.
  NodeId root_eval(NodeId theta, const rootnet::RootSpec& spec, double tau);
  /// alpha * tanh((x - b) / a) + beta with p = (a, b, alpha, beta) as a 4 x 1 node.
  NodeId dyn_tanh(NodeId x, NodeId p);
  /// kernel: (T*D) x Dx stacked K_0..K_{T-1}; signal: (T*Dx) x B stacked d_0..d_{T-1}.
  /// Result (T*D) x B with block t equal to sum_{l<=t} K_l d_{t-l}, evaluated with FFTs.
  NodeId causal_conv(NodeId kernel, NodeId signal, std::size_t steps);

  // ------------------------------------------------------------ losses (1 x 1, batch mean)
  /// mean_b sum_r (pred - target)^2
  NodeId mse(NodeId pred, Matrix target);
  /// mean_b sum_r [(y - mu)^2 / (2 sigma^2) + log sigma]
  NodeId gaussian_nll(NodeId mu, NodeId sigma, Matrix target);
  /// mean_b -log softmax(logits[:, b])[label_b]
  NodeId softmax_cce(NodeId logits, std::vector<std::size_t> labels);

  // ------------------------------------------------------------ access
  const Matrix& value(NodeId id) const;
  double scalar(NodeId id) const;
  std::size_t size() const noexcept { return nodes_.size(); }
  bool requires_grad(NodeId id) const { return nodes_.at(id).needs_grad; }

  /// Reverse sweep from a 1 x 1 seed node; parameter gradients are added into `store`.
  void backward(NodeId seed, GradStore& store) const;

 private:
  enum class Op {
    constant, parameter, matmul, add, sub, mul, mul_const, add_bias, mul_rows, broadcast_cols,
    scale, add_const, unary, activation, clamp, slice_rows, vstack, add_n, blend, col_matvec,
    root_eval, dyn_tanh, causal_conv, mse, gaussian_nll, softmax_cce
  };

  struct Node {
    Op op = Op::constant;
    std::vector<NodeId> in;
    Matrix value;
    const Matrix* external = nullptr;
    std::size_t slot = 0;
    std::size_t i0 = 0;
    std::size_t i1 = 0;
    double s0 = 0.0;
    double s1 = 0.0;
    Unary fn = Unary::relu;
    rootnet::Activation act = rootnet::Activation::identity;
    rootnet::RootSpec spec;
    Matrix aux;
    std::vector<double> mask;
    std::vector<std::size_t> labels;
    bool needs_grad = false;
  };

  NodeId push(Node n);
  const Matrix& val(NodeId id) const { return nodes_[id].external ? *nodes_[id].external : nodes_[id].value; }
  void check_id(NodeId id) const;
  void backprop_node(NodeId id, std::vector<Matrix>& grads) const;

  std::vector<Node> nodes_;
};

}  // namespace warp::grad
