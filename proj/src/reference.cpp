#include "pyformer/reference.hpp"

#include <stdexcept>

namespace pyformer::ref {

Tensor conv3d(const Tensor& input, const Tensor& weights, const Tensor& bias,
              std::size_t pad_d, std::size_t pad_h, std::size_t pad_w) {
  if (input.shape().rank() != 4 || weights.shape().rank() != 5)
    throw std::invalid_argument("ref::conv3d: expects rank-4 input and rank-5 weights");
  const std::size_t ci = input.shape()[0], d = input.shape()[1],
                    h = input.shape()[2], w = input.shape()[3];
  const std::size_t co = weights.shape()[0], kd = weights.shape()[2],
                    kh = weights.shape()[3], kw = weights.shape()[4];
  if (weights.shape()[1] != ci)
    throw std::invalid_argument("ref::conv3d: channel mismatch");
  if (bias.shape().count() != co)
    throw std::invalid_argument("ref::conv3d: bias size mismatch");
  if (d + 2 * pad_d < kd || h + 2 * pad_h < kh || w + 2 * pad_w < kw)
    throw std::invalid_argument("ref::conv3d: kernel larger than padded input");

  const std::size_t od = d + 2 * pad_d - kd + 1;
  const std::size_t oh = h + 2 * pad_h - kh + 1;
  const std::size_t ow = w + 2 * pad_w - kw + 1;
  Tensor out(Shape{co, od, oh, ow});

  // Deliberately naive: every output element is a fully written-out sum over
  // channel and the three kernel axes, with bounds-checked padded reads.
  for (std::size_t f = 0; f < co; ++f)
    for (std::size_t z = 0; z < od; ++z)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
          double acc = 0.0;
          for (std::size_t c = 0; c < ci; ++c)
            for (std::size_t m = 0; m < kd; ++m)
              for (std::size_t n = 0; n < kh; ++n)
                for (std::size_t p = 0; p < kw; ++p) {
                  // Position in the (conceptually) zero-padded input.
                  std::size_t iz = z + m, iy = y + n, ix = x + p;
                  if (iz < pad_d || iz >= d + pad_d) continue;
                  if (iy < pad_h || iy >= h + pad_h) continue;
                  if (ix < pad_w || ix >= w + pad_w) continue;
                  double in_v = input[((c * d + (iz - pad_d)) * h + (iy - pad_h)) * w + (ix - pad_w)];
                  double w_v = weights[(((f * ci + c) * kd + m) * kh + n) * kw + p];
                  acc += in_v * w_v;
                }
          out[((f * od + z) * oh + y) * ow + x] = acc + bias[f];
        }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().rank() != 2 || b.shape().rank() != 2)
    throw std::invalid_argument("ref::matmul: expects rank-2 operands");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k)
    throw std::invalid_argument("ref::matmul: inner extent mismatch");
  Tensor out(Shape{m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < k; ++t) acc += a[i * k + t] * b[t * n + j];
      out[i * n + j] = acc;
    }
  return out;
}

}  // namespace pyformer::ref
