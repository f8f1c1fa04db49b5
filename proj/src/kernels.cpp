#include "pyformer/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace pyformer::kernels {

namespace {

using std::int64_t;

void check_conv_shapes(const Tensor& input, const Tensor& weights,
                       const Tensor& bias, Pad3 pad) {
  if (input.shape().rank() != 4)
    throw std::invalid_argument("conv3d: input must be rank 4 (C,D,H,W), got " +
                                input.shape().str());
  if (weights.shape().rank() != 5)
    throw std::invalid_argument(
        "conv3d: weights must be rank 5 (C_out,C_in,KD,KH,KW), got " +
        weights.shape().str());
  if (weights.shape()[1] != input.shape()[0])
    throw std::invalid_argument(
        "conv3d: input channels " + std::to_string(input.shape()[0]) +
        " (shape " + input.shape().str() + ") do not match weight channels " +
        std::to_string(weights.shape()[1]) + " (shape " +
        weights.shape().str() + ")");
  if (bias.shape().rank() != 1 || bias.shape()[0] != weights.shape()[0])
    throw std::invalid_argument("conv3d: bias shape " + bias.shape().str() +
                                " does not match " +
                                std::to_string(weights.shape()[0]) +
                                " output channels");
  if (input.shape()[1] + 2 * pad.d < weights.shape()[2] ||
      input.shape()[2] + 2 * pad.h < weights.shape()[3] ||
      input.shape()[3] + 2 * pad.w < weights.shape()[4])
    throw std::invalid_argument("conv3d: kernel " + weights.shape().str() +
                                " exceeds padded input " + input.shape().str());
}

}  // namespace

Tensor conv3d(const Tensor& input, const Tensor& weights, const Tensor& bias,
              Pad3 pad) {
  check_conv_shapes(input, weights, bias, pad);
  const int64_t ci = input.shape()[0], d = input.shape()[1],
                h = input.shape()[2], w = input.shape()[3];
  const int64_t co = weights.shape()[0], kd = weights.shape()[2],
                kh = weights.shape()[3], kw = weights.shape()[4];
  const int64_t pd = pad.d, ph = pad.h, pw = pad.w;
  const int64_t od = d + 2 * pd - kd + 1, oh = h + 2 * ph - kh + 1,
                ow = w + 2 * pw - kw + 1;

  Tensor out(Shape{static_cast<std::size_t>(co), static_cast<std::size_t>(od),
                   static_cast<std::size_t>(oh), static_cast<std::size_t>(ow)});
  const double* in = input.data();
  const double* wt = weights.data();
  const int64_t total = co * od * oh * ow;

#pragma omp parallel for schedule(static)
  for (int64_t idx = 0; idx < total; ++idx) {
    int64_t rem = idx;
    const int64_t x = rem % ow;
    rem /= ow;
    const int64_t y = rem % oh;
    rem /= oh;
    const int64_t z = rem % od;
    const int64_t f = rem / od;
    // Clip kernel ranges so only in-bounds (non-padding) taps are visited.
    const int64_t m0 = std::max<int64_t>(0, pd - z), m1 = std::min(kd - 1, d - 1 + pd - z);
    const int64_t n0 = std::max<int64_t>(0, ph - y), n1 = std::min(kh - 1, h - 1 + ph - y);
    const int64_t p0 = std::max<int64_t>(0, pw - x), p1 = std::min(kw - 1, w - 1 + pw - x);
    double acc = 0.0;
    for (int64_t c = 0; c < ci; ++c)
      for (int64_t m = m0; m <= m1; ++m)
        for (int64_t n = n0; n <= n1; ++n) {
          const double* in_row = in + ((c * d + (z + m - pd)) * h + (y + n - ph)) * w + (x - pw);
          const double* wt_row = wt + (((f * ci + c) * kd + m) * kh + n) * kw;
          for (int64_t p = p0; p <= p1; ++p) acc += in_row[p] * wt_row[p];
        }
    out[static_cast<std::size_t>(idx)] = acc + bias[static_cast<std::size_t>(f)];
  }
  return out;
}

void conv3d_grad_input(const Tensor& grad_out, const Tensor& weights, Pad3 pad,
                       Tensor& grad_in) {
  const int64_t ci = grad_in.shape()[0], d = grad_in.shape()[1],
                h = grad_in.shape()[2], w = grad_in.shape()[3];
  const int64_t co = weights.shape()[0], kd = weights.shape()[2],
                kh = weights.shape()[3], kw = weights.shape()[4];
  const int64_t pd = pad.d, ph = pad.h, pw = pad.w;
  const int64_t od = grad_out.shape()[1], oh = grad_out.shape()[2],
                ow = grad_out.shape()[3];
  const double* g = grad_out.data();
  const double* wt = weights.data();
  const int64_t total = ci * d * h * w;

  // Gather: each input element sums the output positions its value fed.
#pragma omp parallel for schedule(static)
  for (int64_t idx = 0; idx < total; ++idx) {
    int64_t rem = idx;
    const int64_t ix = rem % w;
    rem /= w;
    const int64_t iy = rem % h;
    rem /= h;
    const int64_t iz = rem % d;
    const int64_t c = rem / d;
    const int64_t m0 = std::max<int64_t>(0, iz + pd - (od - 1)), m1 = std::min(kd - 1, iz + pd);
    const int64_t n0 = std::max<int64_t>(0, iy + ph - (oh - 1)), n1 = std::min(kh - 1, iy + ph);
    const int64_t p0 = std::max<int64_t>(0, ix + pw - (ow - 1)), p1 = std::min(kw - 1, ix + pw);
    double acc = 0.0;
    for (int64_t f = 0; f < co; ++f)
      for (int64_t m = m0; m <= m1; ++m)
        for (int64_t n = n0; n <= n1; ++n)
          for (int64_t p = p0; p <= p1; ++p)
            acc += g[((f * od + (iz + pd - m)) * oh + (iy + ph - n)) * ow + (ix + pw - p)] *
                   wt[(((f * ci + c) * kd + m) * kh + n) * kw + p];
    grad_in[static_cast<std::size_t>(idx)] += acc;
  }
}

void conv3d_grad_weights(const Tensor& grad_out, const Tensor& input, Pad3 pad,
                         Tensor& grad_w) {
  const int64_t ci = input.shape()[0], d = input.shape()[1],
                h = input.shape()[2], w = input.shape()[3];
  const int64_t co = grad_w.shape()[0], kd = grad_w.shape()[2],
                kh = grad_w.shape()[3], kw = grad_w.shape()[4];
  const int64_t pd = pad.d, ph = pad.h, pw = pad.w;
  const int64_t od = grad_out.shape()[1], oh = grad_out.shape()[2],
                ow = grad_out.shape()[3];
  const double* g = grad_out.data();
  const double* in = input.data();
  const int64_t total = co * ci * kd * kh * kw;

#pragma omp parallel for schedule(static)
  for (int64_t idx = 0; idx < total; ++idx) {
    int64_t rem = idx;
    const int64_t p = rem % kw;
    rem /= kw;
    const int64_t n = rem % kh;
    rem /= kh;
    const int64_t m = rem % kd;
    rem /= kd;
    const int64_t c = rem % ci;
    const int64_t f = rem / ci;
    const int64_t z0 = std::max<int64_t>(0, pd - m), z1 = std::min(od - 1, d - 1 + pd - m);
    const int64_t y0 = std::max<int64_t>(0, ph - n), y1 = std::min(oh - 1, h - 1 + ph - n);
    const int64_t x0 = std::max<int64_t>(0, pw - p), x1 = std::min(ow - 1, w - 1 + pw - p);
    double acc = 0.0;
    for (int64_t z = z0; z <= z1; ++z)
      for (int64_t y = y0; y <= y1; ++y)
        for (int64_t x = x0; x <= x1; ++x)
          acc += g[((f * od + z) * oh + y) * ow + x] *
                 in[((c * d + (z + m - pd)) * h + (y + n - ph)) * w + (x + p - pw)];
    grad_w[static_cast<std::size_t>(idx)] += acc;
  }
}

void conv3d_grad_bias(const Tensor& grad_out, Tensor& grad_b) {
  const int64_t co = grad_out.shape()[0];
  const int64_t spatial = static_cast<int64_t>(grad_out.size()) / co;
  const double* g = grad_out.data();
#pragma omp parallel for schedule(static)
  for (int64_t f = 0; f < co; ++f) {
    double acc = 0.0;
    for (int64_t i = 0; i < spatial; ++i) acc += g[f * spatial + i];
    grad_b[static_cast<std::size_t>(f)] += acc;
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().rank() != 2 || b.shape().rank() != 2)
    throw std::invalid_argument("matmul: expects rank-2 operands, got " +
                                a.shape().str() + " and " + b.shape().str());
  if (a.shape()[1] != b.shape()[0])
    throw std::invalid_argument(
        "matmul: inner extents " + std::to_string(a.shape()[1]) + " and " +
        std::to_string(b.shape()[0]) + " differ (shapes " + a.shape().str() +
        ", " + b.shape().str() + ")");
  const int64_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  Tensor out(Shape{static_cast<std::size_t>(m), static_cast<std::size_t>(n)});
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < m; ++i)
    for (int64_t t = 0; t < k; ++t) {
      const double av = pa[i * k + t];
      const double* brow = pb + t * n;
      double* orow = po + i * n;
      for (int64_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.shape().rank() != 2 || b.shape().rank() != 2)
    throw std::invalid_argument("matmul_nt: expects rank-2 operands, got " +
                                a.shape().str() + " and " + b.shape().str());
  if (a.shape()[1] != b.shape()[1])
    throw std::invalid_argument(
        "matmul_nt: inner extents " + std::to_string(a.shape()[1]) + " and " +
        std::to_string(b.shape()[1]) + " differ (shapes " + a.shape().str() +
        ", " + b.shape().str() + ")");
  const int64_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[0];
  Tensor out(Shape{static_cast<std::size_t>(m), static_cast<std::size_t>(n)});
  const double* pa = a.data();
  const double* pb = b.data();
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) {
      const double* arow = pa + i * k;
      const double* brow = pb + j * k;
      double acc = 0.0;
      for (int64_t t = 0; t < k; ++t) acc += arow[t] * brow[t];
      out[static_cast<std::size_t>(i * n + j)] = acc;
    }
  return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  if (a.shape().rank() != 2 || b.shape().rank() != 2)
    throw std::invalid_argument("matmul_tn: expects rank-2 operands, got " +
                                a.shape().str() + " and " + b.shape().str());
  if (a.shape()[0] != b.shape()[0])
    throw std::invalid_argument(
        "matmul_tn: inner extents " + std::to_string(a.shape()[0]) + " and " +
        std::to_string(b.shape()[0]) + " differ (shapes " + a.shape().str() +
        ", " + b.shape().str() + ")");
  const int64_t k = a.shape()[0], m = a.shape()[1], n = b.shape()[1];
  Tensor out(Shape{static_cast<std::size_t>(m), static_cast<std::size_t>(n)});
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < m; ++i)
    for (int64_t t = 0; t < k; ++t) {
      const double av = pa[t * m + i];
      const double* brow = pb + t * n;
      double* orow = po + i * n;
      for (int64_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out(x.shape());
  const double* px = x.data();
  double* po = out.data();
  const int64_t total = x.size();
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < total; ++i) po[i] = px[i] > 0.0 ? px[i] : 0.0;
  return out;
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  if (axis >= x.shape().rank())
    throw std::invalid_argument("softmax: axis " + std::to_string(axis) +
                                " out of range for shape " + x.shape().str());
  const std::size_t rank = x.shape().rank();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= x.shape()[i];
  for (std::size_t i = axis + 1; i < rank; ++i) inner *= x.shape()[i];
  const int64_t n = x.shape()[axis];
  const int64_t slices = static_cast<int64_t>(outer * inner);

  Tensor out(x.shape());
  const double* px = x.data();
  double* po = out.data();
#pragma omp parallel for schedule(static)
  for (int64_t s = 0; s < slices; ++s) {
    const int64_t o = s / static_cast<int64_t>(inner);
    const int64_t r = s % static_cast<int64_t>(inner);
    const int64_t base = (o * n) * static_cast<int64_t>(inner) + r;
    const int64_t stride = static_cast<int64_t>(inner);
    double mx = px[base];
    for (int64_t i = 1; i < n; ++i) mx = std::max(mx, px[base + i * stride]);
    double sum = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      const double e = std::exp(px[base + i * stride] - mx);
      po[base + i * stride] = e;
      sum += e;
    }
    for (int64_t i = 0; i < n; ++i) po[base + i * stride] /= sum;
  }
  return out;
}

void softmax_backward(const Tensor& y, const Tensor& grad_y, std::size_t axis,
                      Tensor& grad_x) {
  const std::size_t rank = y.shape().rank();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= y.shape()[i];
  for (std::size_t i = axis + 1; i < rank; ++i) inner *= y.shape()[i];
  const int64_t n = y.shape()[axis];
  const int64_t slices = static_cast<int64_t>(outer * inner);
  const double* py = y.data();
  const double* pg = grad_y.data();
#pragma omp parallel for schedule(static)
  for (int64_t s = 0; s < slices; ++s) {
    const int64_t o = s / static_cast<int64_t>(inner);
    const int64_t r = s % static_cast<int64_t>(inner);
    const int64_t base = (o * n) * static_cast<int64_t>(inner) + r;
    const int64_t stride = static_cast<int64_t>(inner);
    double dot = 0.0;
    for (int64_t i = 0; i < n; ++i)
      dot += pg[base + i * stride] * py[base + i * stride];
    for (int64_t i = 0; i < n; ++i)
      grad_x[static_cast<std::size_t>(base + i * stride)] +=
          py[base + i * stride] * (pg[base + i * stride] - dot);
  }
}

Tensor avg_pool3d(const Tensor& x, std::size_t factor) {
  if (x.shape().rank() != 4)
    throw std::invalid_argument("avg_pool3d: input must be rank 4 (C,D,H,W), got " +
                                x.shape().str());
  if (factor == 0) throw std::invalid_argument("avg_pool3d: factor must be positive");
  const char* axis_name[3] = {"depth", "height", "width"};
  for (std::size_t i = 0; i < 3; ++i)
    if (x.shape()[i + 1] % factor != 0)
      throw std::invalid_argument(
          "avg_pool3d: " + std::string(axis_name[i]) + " extent " +
          std::to_string(x.shape()[i + 1]) + " not divisible by factor " +
          std::to_string(factor));

  const int64_t c = x.shape()[0], d = x.shape()[1], h = x.shape()[2],
                w = x.shape()[3];
  const int64_t f = factor;
  const int64_t od = d / f, oh = h / f, ow = w / f;
  Tensor out(Shape{static_cast<std::size_t>(c), static_cast<std::size_t>(od),
                   static_cast<std::size_t>(oh), static_cast<std::size_t>(ow)});
  const double* px = x.data();
  const double block = static_cast<double>(f) * f * f;
  const int64_t total = c * od * oh * ow;
#pragma omp parallel for schedule(static)
  for (int64_t idx = 0; idx < total; ++idx) {
    int64_t rem = idx;
    const int64_t x0 = rem % ow;
    rem /= ow;
    const int64_t y0 = rem % oh;
    rem /= oh;
    const int64_t z0 = rem % od;
    const int64_t ch = rem / od;
    double acc = 0.0;
    for (int64_t dz = 0; dz < f; ++dz)
      for (int64_t dy = 0; dy < f; ++dy)
        for (int64_t dx = 0; dx < f; ++dx)
          acc += px[((ch * d + (z0 * f + dz)) * h + (y0 * f + dy)) * w + (x0 * f + dx)];
    out[static_cast<std::size_t>(idx)] = acc / block;
  }
  return out;
}

void avg_pool3d_backward(const Tensor& grad_out, std::size_t factor,
                         Tensor& grad_in) {
  const int64_t c = grad_in.shape()[0], d = grad_in.shape()[1],
                h = grad_in.shape()[2], w = grad_in.shape()[3];
  const int64_t f = factor;
  const int64_t od = d / f, oh = h / f, ow = w / f;
  const double block = static_cast<double>(f) * f * f;
  const double* g = grad_out.data();
  const int64_t total = c * d * h * w;
#pragma omp parallel for schedule(static)
  for (int64_t idx = 0; idx < total; ++idx) {
    int64_t rem = idx;
    const int64_t x = rem % w;
    rem /= w;
    const int64_t y = rem % h;
    rem /= h;
    const int64_t z = rem % d;
    const int64_t ch = rem / d;
    grad_in[static_cast<std::size_t>(idx)] +=
        g[((ch * od + z / f) * oh + y / f) * ow + x / f] / block;
  }
}

}  // namespace pyformer::kernels
