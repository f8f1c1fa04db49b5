#pragma once

#include <cstddef>

#include "pyformer/tensor.hpp"

namespace pyformer {

struct Pad3 {
  std::size_t d = 0, h = 0, w = 0;
};

namespace kernels {

// OpenMP-parallel kernels. Determinism contract: threads only ever own
// disjoint output elements, and each element is accumulated in a fixed
// serial order, so results are bitwise identical for any thread count
// (including the serial fallback when OpenMP is absent).

// Shapes as in ref::conv3d.
Tensor conv3d(const Tensor& input, const Tensor& weights, const Tensor& bias,
              Pad3 pad);
Tensor matmul(const Tensor& a, const Tensor& b);     // a . b
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // a . b^T
Tensor matmul_tn(const Tensor& a, const Tensor& b);  // a^T . b
Tensor relu(const Tensor& x);
// Softmax along `axis`, numerically stabilised by the slice max.
Tensor softmax(const Tensor& x, std::size_t axis);
// x (C, D, H, W) -> (C, D/f, H/f, W/f), each output the mean of an f^3 block.
Tensor avg_pool3d(const Tensor& x, std::size_t factor);

// Backward kernels accumulate (+=) into their grad output argument, which
// must be preallocated at the matching shape. All are gather formulations:
// each thread writes only grad elements it owns.
void conv3d_grad_input(const Tensor& grad_out, const Tensor& weights, Pad3 pad,
                       Tensor& grad_in);
void conv3d_grad_weights(const Tensor& grad_out, const Tensor& input, Pad3 pad,
                         Tensor& grad_w);
void conv3d_grad_bias(const Tensor& grad_out, Tensor& grad_b);
void softmax_backward(const Tensor& y, const Tensor& grad_y, std::size_t axis,
                      Tensor& grad_x);
void avg_pool3d_backward(const Tensor& grad_out, std::size_t factor,
                         Tensor& grad_in);

}  // namespace kernels
}  // namespace pyformer
