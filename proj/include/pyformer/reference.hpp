#pragma once

#include "pyformer/tensor.hpp"

namespace pyformer::ref {

// Straight-line serial kernels. Tests compare the parallel kernels against
// these, so they are written as literally as possible and stay free of
// OpenMP. Also the baseline side of the kernel benchmark.

// input (C_in, D, H, W), weights (C_out, C_in, KD, KH, KW), bias (C_out);
// stride 1, symmetric zero padding. Output spatial extent per axis is
// D + 2*pad - K + 1.
Tensor conv3d(const Tensor& input, const Tensor& weights, const Tensor& bias,
              std::size_t pad_d, std::size_t pad_h, std::size_t pad_w);

// a (M, K) times b (K, N).
Tensor matmul(const Tensor& a, const Tensor& b);

}  // namespace pyformer::ref
