#pragma once

#include <array>
#include <functional>
#include <span>
#include <vector>

#include "pyformer/kernels.hpp"

namespace pyformer {

// Reverse-mode differentiation over an explicit operation record. Operations
// append nodes in execution order; backward() seeds the (scalar) loss with
// gradient 1 and walks the record once in reverse, accumulating into each
// node's gradient buffer. Gradients are zeroed at the start of every
// backward, so repeated calls give bitwise-identical results.
//
// The tape itself is single-threaded: forward construction and backward must
// happen on one logical thread. The kernels it calls parallelize internally.
class Tape {
 public:
  using NodeId = std::size_t;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  NodeId leaf(Tensor value, bool requires_grad = false);

  NodeId add(NodeId a, NodeId b);
  // m (R, C) plus bias (C) broadcast over rows.
  NodeId add_row_bias(NodeId m, NodeId bias);
  NodeId scale(NodeId x, double factor);
  NodeId matmul(NodeId a, NodeId b);
  NodeId transpose2d(NodeId m);
  NodeId relu(NodeId x);
  NodeId softmax(NodeId x, std::size_t axis);
  NodeId conv3d(NodeId input, NodeId weights, NodeId bias, Pad3 pad);
  NodeId avg_pool3d(NodeId x, std::size_t factor);
  NodeId reshape(NodeId x, Shape shape);
  NodeId permute3(NodeId x, std::array<std::size_t, 3> perm);
  // Columns [first, last) of a rank-2 input.
  NodeId slice_cols(NodeId m, std::size_t first, std::size_t last);
  NodeId concat_cols(std::span<const NodeId> parts);
  NodeId concat_rows(std::span<const NodeId> parts);
  // Concatenation of the flattened parts into one rank-1 vector.
  NodeId flatten_concat(std::span<const NodeId> parts);
  // Row-wise standardisation (population variance, epsilon 1e-5, no affine).
  NodeId layer_norm_rows(NodeId m);
  NodeId sum(NodeId x);
  NodeId sum_squares(NodeId x);
  // probs (R, K); target_cols holds R zero-based column indices. Value is
  // sum_r -ln(max(probs[r, t_r], 1e-12)) / denom.
  NodeId cross_entropy(NodeId probs, std::span<const int> target_cols,
                       std::size_t denom);

  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  bool requires_grad(NodeId id) const { return nodes_[id].needs_grad; }
  std::size_t size() const { return nodes_.size(); }

  void backward(NodeId loss);
  const Tensor& grad(NodeId id) const;

  static constexpr double kProbFloor = 1e-12;

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool needs_grad = false;
    std::function<void(Tape&)> backprop;
  };

  std::vector<Node> nodes_;
  bool ran_backward_ = false;

  NodeId record(Tensor value, bool needs_grad,
                std::function<void(Tape&)> backprop);
  void check_id(NodeId id, const char* op) const;
  // Accumulation target for `id`; only valid when the node needs gradients.
  Tensor& gbuf(NodeId id) { return nodes_[id].grad; }
};

}  // namespace pyformer
