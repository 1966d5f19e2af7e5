// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "warp/gradengine/tape.hpp"
#include "warp/numkit/rng.hpp"
#include "warp/warpcell/model.hpp"

namespace warp::warpcell {

using grad::NodeId;
using grad::Tape;

/// Binds a model to a tape. Parameter leaves are created once, on first use.
class ModelGraph {
 public:
  ModelGraph(Tape& tape, const WarpModel& model) : tape_(tape), model_(model) {}

  Tape& tape() noexcept { return tape_; }
  const WarpModel& model() const noexcept { return model_; }

  /// theta_0 for every column of x0 (D_x x B).
  NodeId init_state(const Matrix& x0);
  /// A x for a D_theta x k node.
  NodeId apply_transition(NodeId x);
  /// A theta + B dx, clamped to +-w_lim when configured. Throws DivergenceError(t) on a non-finite state.
  NodeId step(NodeId theta, NodeId dx, std::size_t t);

  struct Decoded {
    NodeId raw = 0;
    NodeId mean = 0;
    std::optional<NodeId> sigma;
  };
  /// Root evaluation at tau followed by the head. `x0` (D_x x B) is used by msd-expm only.
  Decoded decode(NodeId theta, double tau, std::optional<NodeId> x0);

  NodeId param(std::size_t slot);

 private:
  Tape& tape_;
  const WarpModel& model_;
  std::vector<std::optional<NodeId>> leaves_;
};

enum class Forcing {
  ground_truth,  // every token is the observed input (non-AR)
  bernoulli,     // token t is observed with probability p_forcing, else the prediction from t-1
  context,       // observed for t < context, own mean prediction afterwards
};

struct SequenceOptions {
  Forcing forcing = Forcing::ground_truth;
  double p_forcing = 1.0;
  std::size_t context = 0;
  /// Feed back mu + sigma * eps instead of mu when the head is gaussian.
  bool sample = false;
  /// Denominator length for tau = t / (train_T - 1); 0 means the sequence length.
  std::size_t train_T = 0;
  bool convolutional = false;
  bool decode_final_only = false;
};

struct SequenceGraph {
  std::vector<NodeId> states;
  std::vector<ModelGraph::Decoded> outputs;  // one per step, or only the last step
};

double decode_tau(std::size_t t, std::size_t train_T, bool fixed);

/// Builds states and decoded outputs for a batch. inputs[t] is D_x x B.
/// Bernoulli forcing needs one RngStream per column; each step draws one
/// uniform and D_y normals per column whether or not they are used.
SequenceGraph build_sequence(ModelGraph& g, const std::vector<Matrix>& inputs, const SequenceOptions& opt,
                             std::vector<numkit::RngStream>* rngs = nullptr);

// ------------------------------------------------------------ single-sequence API

Vector init_state(const WarpModel& model, std::span<const double> x0);
Vector step(const WarpModel& model, std::span<const double> theta_prev, std::span<const double> dx,
            std::size_t t = 1);

struct ScanResult {
  Matrix states;  // T x D_theta
  Matrix mean;    // T x D_y
  Matrix sigma;   // T x D_y, empty unless the head is gaussian
};

/// `inputs` is T x D_x. AR (bernoulli) forcing needs `rng`.
ScanResult scan_recurrent(const WarpModel& model, const Matrix& inputs, const SequenceOptions& opt,
                          numkit::RngStream* rng = nullptr);

/// K_l = A^l B for l = 0..T-1.
std::vector<Matrix> materialize_kernel(const WarpModel& model, std::size_t steps);

/// Non-AR states and outputs through the convolutional path.
ScanResult conv_forward(const WarpModel& model, const Matrix& inputs, std::size_t train_T = 0);

/// Splits an N x T x D block (rows = sequences, each row T*D values) into T matrices D x |cols|.
std::vector<Matrix> time_major(const Matrix& seqs, std::size_t steps, std::size_t dim,
                               std::span<const std::size_t> cols);

}  // namespace warp::warpcell
