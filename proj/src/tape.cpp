#include "pyformer/tape.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace pyformer {

Tape::NodeId Tape::record(Tensor value, bool needs_grad,
                          std::function<void(Tape&)> backprop) {
  Node node;
  node.value = std::move(value);
  node.needs_grad = needs_grad;
  node.backprop = std::move(backprop);
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

void Tape::check_id(NodeId id, const char* op) const {
  if (id >= nodes_.size())
    throw std::invalid_argument(std::string(op) + ": node id " +
                                std::to_string(id) + " out of range");
}

Tape::NodeId Tape::leaf(Tensor value, bool requires_grad) {
  if (value.empty()) throw std::invalid_argument("leaf: empty tensor");
  return record(std::move(value), requires_grad, nullptr);
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  check_id(a, "add");
  check_id(b, "add");
  const Tensor& va = nodes_[a].value;
  const Tensor& vb = nodes_[b].value;
  if (!(va.shape() == vb.shape()))
    throw std::invalid_argument("add: shape " + va.shape().str() +
                                " does not match " + vb.shape().str());
  Tensor out(va.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] + vb[i];
  const bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
  NodeId self = record(std::move(out), ng, nullptr);
  if (ng)
    nodes_[self].backprop = [self, a, b](Tape& t) {
      const Tensor& g = t.nodes_[self].grad;
      if (t.nodes_[a].needs_grad) axpy(t.gbuf(a), g);
      if (t.nodes_[b].needs_grad) axpy(t.gbuf(b), g);
    };
  return self;
}

Tape::NodeId Tape::add_row_bias(NodeId m, NodeId bias) {
  check_id(m, "add_row_bias");
  check_id(bias, "add_row_bias");
  const Tensor& vm = nodes_[m].value;
  const Tensor& vb = nodes_[bias].value;
  if (vm.shape().rank() != 2)
    throw std::invalid_argument("add_row_bias: matrix must be rank 2, got " +
                                vm.shape().str());
  if (vb.shape().rank() != 1 || vb.shape()[0] != vm.shape()[1])
    throw std::invalid_argument("add_row_bias: bias shape " + vb.shape().str() +
                                " does not match " +
                                std::to_string(vm.shape()[1]) + " columns");
  const std::size_t rows = vm.shape()[0], cols = vm.shape()[1];
  Tensor out(vm.shape());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      out[r * cols + c] = vm[r * cols + c] + vb[c];
  const bool ng = nodes_[m].needs_grad || nodes_[bias].needs_grad;
  NodeId self = record(std::move(out), ng, nullptr);
  if (ng)
    nodes_[self].backprop = [self, m, bias, rows, cols](Tape& t) {
      const Tensor& g = t.nodes_[self].grad;
      if (t.nodes_[m].needs_grad) axpy(t.gbuf(m), g);
      if (t.nodes_[bias].needs_grad) {
        Tensor& gb = t.gbuf(bias);
        for (std::size_t c = 0; c < cols; ++c) {
          double acc = 0.0;
          for (std::size_t r = 0; r < rows; ++r) acc += g[r * cols + c];
          gb[c] += acc;
        }
      }
    };
  return self;
}

Tape::NodeId Tape::scale(NodeId x, double factor) {
  check_id(x, "scale");
  const Tensor& vx = nodes_[x].value;
  Tensor out(vx.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = vx[i] * factor;
  const bool ng = nodes_[x].needs_grad;
  NodeId self = record(std::move(out), ng, nullptr);
  if (ng)
    nodes_[self].backprop = [self, x, factor](Tape& t) {
      const Tensor& g = t.nodes_[self].grad;
      Tensor& gx = t.gbuf(x);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += factor * g[i];
    };
  return self;
}

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
  check_id(a, "matmul");
  check_id(b, "matmul");
  Tensor out = kernels::matmul(nodes_[a].value, nodes_[b].value);
  const bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
  NodeId self = record(std::move(out), ng, nullptr);
  if (ng)
    nodes_[self].backprop = [self, a, b](Tape& t) {
      const Tensor& g = t.nodes_[self].grad;
      if (t.nodes_[a].needs_grad)
        axpy(t.gbuf(a), kernels::matmul_nt(g, t.nodes_[b].value));
      if (t.nodes_[b].needs_grad)
        axpy(t.gbuf(b), kernels::matmul_tn(t.nodes_[a].value, g));
    };
  return self;
}

Tape::NodeId Tape::transpose2d(NodeId m) {
  check_id(m, "transpose2d");
  const Tensor& vm = nodes_[m].value;
  if (vm.shape().rank() != 2)
    throw std::invalid_argument("transpose2d: expects rank 2, got " +
                                vm.shape().str());
  const std::size_t rows = vm.shape()[0], cols = vm.shape()[1];
  Tensor out(Shape{cols, rows});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = vm[r * cols + c];
  const bool ng = nodes_[m].needs_grad;
  NodeId self = record(std::move(out), ng, nullptr);
  if (ng)
    nodes_[self].backprop = [self, m, rows, cols](Tape& t) {
      const Tensor& g = t.nodes_[self].grad;
      Tensor& gm = t.gbuf(m);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
          gm[r * cols + c] += g[c * rows + r];
    };
  return self;
}

Tape::NodeId Tape::relu(NodeId x) {
  check_id(x, "relu");
  Tensor out = kernels::relu(nodes_[x].value);
  const bool ng = nodes_[x].needs_grad;
  NodeId self = record(std::move(out), ng, nullptr);
  if (ng)
    nodes_[self].backprop = [self, x](Tape& t) {
      const Tensor& g = t.nodes_[self].grad;
      const Tensor& vx = t.nodes_[x].value;
      Tensor& gx = t.gbuf(x);
      for (std::size_t i = 0; i < g.size(); ++i)
        if (vx[i] > 0.0) gx[i] += g[i];
    };
  return self;
}

Tape::NodeId Tape::softmax(NodeId x, std::size_t axis) {
  check_id(x, "softmax");
  Tensor out = kernels::softmax(nodes_[x].value, axis);
  const bool ng = nodes_[x].needs_grad;
  NodeId self = record(std::move(out), ng, nullptr);
  if (ng)
    nodes_[self].backprop = [self, x, axis](Tape& t) {
      kernels::softmax_backward(t.nodes_[self].value, t.nodes_[self].grad,
                                axis, t.gbuf(x));
    };
  return self;
}

Tape::NodeId Tape::conv3d(NodeId input, NodeId weights, NodeId bias, Pad3 pad) {
  check_id(input, "conv3d");
  check_id(weights, "conv3d");
  check_id(bias, "conv3d");
  Tensor out = kernels::conv3d(nodes_[input].value, nodes_[weights].value,
                               nodes_[bias].value, pad);
  const bool ng = nodes_[input].needs_grad || nodes_[weights].needs_grad ||
                  nodes_[bias].needs_grad;
  NodeId self = record(std::move(out), ng, nullptr);
  if (ng)
    nodes_[self].backprop = [self, input, weights, bias, pad](Tape& t) {
      const Tensor& g = t.nodes_[self].grad;
      if (t.nodes_[input].needs_grad)
        kernels::conv3d_grad_input(g, t.nodes_[weights].value, pad,
                                   t.gbuf(input));
      if (t.nodes_[weights].needs_grad)
        kernels::conv3d_grad_weights(g, t.nodes_[input].value, pad,
                                     t.gbuf(weights));
      if (t.nodes_[bias].needs_grad) kernels::conv3d_grad_bias(g, t.gbuf(bias));
    };
  return self;
}

Tape::NodeId Tape::avg_pool3d(NodeId x, std::size_t factor) {
  check_id(x, "avg_pool3d");
  Tensor out = kernels::avg_pool3d(nodes_[x].value, factor);
  const bool ng = nodes_[x].needs_grad;
  NodeId self = record(std::move(out), ng, nullptr);
  if (ng)
    nodes_[self].backprop = [self, x, factor](Tape& t) {
      kernels::avg_pool3d_backward(t.nodes_[self].grad, factor, t.gbuf(x));
    };
  return self;
}

Tape::NodeId Tape::reshape(NodeId x, Shape shape) {
  check_id(x, "reshape");
  const Tensor& vx = nodes_[x].value;
  if (shape.count() != vx.size())
    throw std::invalid_argument("reshape: cannot view " + vx.shape().str() +
                                " as " + shape.str());
  Tensor out(shape);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = vx[i];
  const bool ng = nodes_[x].needs_grad;
  NodeId self = record(std::move(out), ng, nullptr);
  if (ng)
    nodes_[self].backprop = [self, x](Tape& t) {
      const Tensor& g = t.nodes_[self].grad;
      Tensor& gx = t.gbuf(x);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    };
  return self;
}

Tape::NodeId Tape::permute3(NodeId x, std::array<std::size_t, 3> perm) {
  check_id(x, "permute3");
  const Tensor& vx = nodes_[x].value;
  if (vx.shape().rank() != 3)
    throw std::invalid_argument("permute3: expects rank 3, got " +
                                vx.shape().str());
  bool seen[3] = {false, false, false};
  for (std::size_t p : perm) {
    if (p > 2 || seen[p])
      throw std::invalid_argument("permute3: invalid permutation");
    seen[p] = true;
  }
  const std::size_t in_d[3] = {vx.shape()[0], vx.shape()[1], vx.shape()[2]};
  const std::size_t out_d[3] = {in_d[perm[0]], in_d[perm[1]], in_d[perm[2]]};
  Tensor out(Shape{out_d[0], out_d[1], out_d[2]});
  // out[i0,i1,i2] = in[j0,j1,j2] with j[perm[k]] = i_k.
  for (std::size_t i0 = 0; i0 < out_d[0]; ++i0)
    for (std::size_t i1 = 0; i1 < out_d[1]; ++i1)
      for (std::size_t i2 = 0; i2 < out_d[2]; ++i2) {
        std::size_t j[3];
        j[perm[0]] = i0;
        j[perm[1]] = i1;
        j[perm[2]] = i2;
        out[(i0 * out_d[1] + i1) * out_d[2] + i2] =
            vx[(j[0] * in_d[1] + j[1]) * in_d[2] + j[2]];
      }
  const bool ng = nodes_[x].needs_grad;
  NodeId self = record(std::move(out), ng, nullptr);
  if (ng)
    nodes_[self].backprop = [self, x, perm](Tape& t) {
      const Tensor& g = t.nodes_[self].grad;
      Tensor& gx = t.gbuf(x);
      const Shape& os = t.nodes_[self].value.shape();
      const Shape& is = t.nodes_[x].value.shape();
      const std::size_t od[3] = {os[0], os[1], os[2]};
      const std::size_t id[3] = {is[0], is[1], is[2]};
      for (std::size_t i0 = 0; i0 < od[0]; ++i0)
        for (std::size_t i1 = 0; i1 < od[1]; ++i1)
          for (std::size_t i2 = 0; i2 < od[2]; ++i2) {
            std::size_t j[3];
            j[perm[0]] = i0;
            j[perm[1]] = i1;
            j[perm[2]] = i2;
            gx[(j[0] * id[1] + j[1]) * id[2] + j[2]] +=
                g[(i0 * od[1] + i1) * od[2] + i2];
          }
    };
  return self;
}

Tape::NodeId Tape::slice_cols(NodeId m, std::size_t first, std::size_t last) {
  check_id(m, "slice_cols");
  const Tensor& vm = nodes_[m].value;
  if (vm.shape().rank() != 2)
    throw std::invalid_argument("slice_cols: expects rank 2, got " +
                                vm.shape().str());
  if (first >= last || last > vm.shape()[1])
    throw std::invalid_argument(
        "slice_cols: range [" + std::to_string(first) + ", " +
        std::to_string(last) + ") invalid for " + vm.shape().str());
  const std::size_t rows = vm.shape()[0], cols = vm.shape()[1],
                    width = last - first;
  Tensor out(Shape{rows, width});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < width; ++c)
      out[r * width + c] = vm[r * cols + first + c];
  const bool ng = nodes_[m].needs_grad;
  NodeId self = record(std::move(out), ng, nullptr);
  if (ng)
    nodes_[self].backprop = [self, m, first, rows, cols, width](Tape& t) {
      const Tensor& g = t.nodes_[self].grad;
      Tensor& gm = t.gbuf(m);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < width; ++c)
          gm[r * cols + first + c] += g[r * width + c];
    };
  return self;
}

Tape::NodeId Tape::concat_cols(std::span<const NodeId> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  std::vector<NodeId> ids(parts.begin(), parts.end());
  std::size_t rows = 0, total_cols = 0;
  bool ng = false;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    check_id(ids[i], "concat_cols");
    const Tensor& v = nodes_[ids[i]].value;
    if (v.shape().rank() != 2)
      throw std::invalid_argument("concat_cols: expects rank 2, got " +
                                  v.shape().str());
    if (i == 0)
      rows = v.shape()[0];
    else if (v.shape()[0] != rows)
      throw std::invalid_argument("concat_cols: row count mismatch (" +
                                  std::to_string(rows) + " vs " +
                                  v.shape().str() + ")");
    total_cols += v.shape()[1];
    ng = ng || nodes_[ids[i]].needs_grad;
  }
  Tensor out(Shape{rows, total_cols});
  std::size_t off = 0;
  for (NodeId id : ids) {
    const Tensor& v = nodes_[id].value;
    const std::size_t w = v.shape()[1];
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < w; ++c)
        out[r * total_cols + off + c] = v[r * w + c];
    off += w;
  }
  NodeId self = record(std::move(out), ng, nullptr);
  if (ng)
    nodes_[self].backprop = [self, ids, rows, total_cols](Tape& t) {
      const Tensor& g = t.nodes_[self].grad;
      std::size_t off = 0;
      for (NodeId id : ids) {
        const std::size_t w = t.nodes_[id].value.shape()[1];
        if (t.nodes_[id].needs_grad) {
          Tensor& gp = t.gbuf(id);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < w; ++c)
              gp[r * w + c] += g[r * total_cols + off + c];
        }
        off += w;
      }
    };
  return self;
}

Tape::NodeId Tape::concat_rows(std::span<const NodeId> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  std::vector<NodeId> ids(parts.begin(), parts.end());
  std::size_t cols = 0, total_rows = 0;
  bool ng = false;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    check_id(ids[i], "concat_rows");
    const Tensor& v = nodes_[ids[i]].value;
    if (v.shape().rank() != 2)
      throw std::invalid_argument("concat_rows: expects rank 2, got " +
                                  v.shape().str());
    if (i == 0)
      cols = v.shape()[1];
    else if (v.shape()[1] != cols)
      throw std::invalid_argument("concat_rows: column count mismatch (" +
                                  std::to_string(cols) + " vs " +
                                  v.shape().str() + ")");
    total_rows += v.shape()[0];
    ng = ng || nodes_[ids[i]].needs_grad;
  }
  Tensor out(Shape{total_rows, cols});
  std::size_t off = 0;
  for (NodeId id : ids) {
    const Tensor& v = nodes_[id].value;
    for (std::size_t i = 0; i < v.size(); ++i) out[off + i] = v[i];
    off += v.size();
  }
  NodeId self = record(std::move(out), ng, nullptr);
  if (ng)
    nodes_[self].backprop = [self, ids](Tape& t) {
      const Tensor& g = t.nodes_[self].grad;
      std::size_t off = 0;
      for (NodeId id : ids) {
        const std::size_t n = t.nodes_[id].value.size();
        if (t.nodes_[id].needs_grad) {
          Tensor& gp = t.gbuf(id);
          for (std::size_t i = 0; i < n; ++i) gp[i] += g[off + i];
        }
        off += n;
      }
    };
  return self;
}

Tape::NodeId Tape::flatten_concat(std::span<const NodeId> parts) {
  if (parts.empty()) throw std::invalid_argument("flatten_concat: no inputs");
  std::vector<NodeId> ids(parts.begin(), parts.end());
  std::size_t total = 0;
  bool ng = false;
  for (NodeId id : ids) {
    check_id(id, "flatten_concat");
    total += nodes_[id].value.size();
    ng = ng || nodes_[id].needs_grad;
  }
  Tensor out(Shape{total});
  std::size_t off = 0;
  for (NodeId id : ids) {
    const Tensor& v = nodes_[id].value;
    for (std::size_t i = 0; i < v.size(); ++i) out[off + i] = v[i];
    off += v.size();
  }
  NodeId self = record(std::move(out), ng, nullptr);
  if (ng)
    nodes_[self].backprop = [self, ids](Tape& t) {
      const Tensor& g = t.nodes_[self].grad;
      std::size_t off = 0;
      for (NodeId id : ids) {
        const std::size_t n = t.nodes_[id].value.size();
        if (t.nodes_[id].needs_grad) {
          Tensor& gp = t.gbuf(id);
          for (std::size_t i = 0; i < n; ++i) gp[i] += g[off + i];
        }
        off += n;
      }
    };
  return self;
}

Tape::NodeId Tape::layer_norm_rows(NodeId m) {
  check_id(m, "layer_norm_rows");
  const Tensor& vm = nodes_[m].value;
  if (vm.shape().rank() != 2)
    throw std::invalid_argument("layer_norm_rows: expects rank 2, got " +
                                vm.shape().str());
  const std::size_t rows = vm.shape()[0], cols = vm.shape()[1];
  constexpr double kEps = 1e-5;
  Tensor out(vm.shape());
  std::vector<double> inv_s(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double mu = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mu += vm[r * cols + c];
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = vm[r * cols + c] - mu;
      var += d * d;
    }
    var /= static_cast<double>(cols);
    const double s = std::sqrt(var + kEps);
    inv_s[r] = 1.0 / s;
    for (std::size_t c = 0; c < cols; ++c)
      out[r * cols + c] = (vm[r * cols + c] - mu) * inv_s[r];
  }
  const bool ng = nodes_[m].needs_grad;
  NodeId self = record(std::move(out), ng, nullptr);
  if (ng)
    nodes_[self].backprop = [self, m, rows, cols, inv_s](Tape& t) {
      const Tensor& g = t.nodes_[self].grad;
      const Tensor& y = t.nodes_[self].value;
      Tensor& gm = t.gbuf(m);
      for (std::size_t r = 0; r < rows; ++r) {
        double gmean = 0.0, gydot = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
          gmean += g[r * cols + c];
          gydot += g[r * cols + c] * y[r * cols + c];
        }
        gmean /= static_cast<double>(cols);
        gydot /= static_cast<double>(cols);
        for (std::size_t c = 0; c < cols; ++c)
          gm[r * cols + c] +=
              inv_s[r] * (g[r * cols + c] - gmean - y[r * cols + c] * gydot);
      }
    };
  return self;
}

Tape::NodeId Tape::sum(NodeId x) {
  check_id(x, "sum");
  const Tensor& vx = nodes_[x].value;
  double acc = 0.0;
  for (std::size_t i = 0; i < vx.size(); ++i) acc += vx[i];
  const bool ng = nodes_[x].needs_grad;
  NodeId self = record(Tensor::scalar(acc), ng, nullptr);
  if (ng)
    nodes_[self].backprop = [self, x](Tape& t) {
      const double g0 = t.nodes_[self].grad[0];
      Tensor& gx = t.gbuf(x);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g0;
    };
  return self;
}

Tape::NodeId Tape::sum_squares(NodeId x) {
  check_id(x, "sum_squares");
  const Tensor& vx = nodes_[x].value;
  double acc = 0.0;
  for (std::size_t i = 0; i < vx.size(); ++i) acc += vx[i] * vx[i];
  const bool ng = nodes_[x].needs_grad;
  NodeId self = record(Tensor::scalar(acc), ng, nullptr);
  if (ng)
    nodes_[self].backprop = [self, x](Tape& t) {
      const double g0 = t.nodes_[self].grad[0];
      const Tensor& vx = t.nodes_[x].value;
      Tensor& gx = t.gbuf(x);
      for (std::size_t i = 0; i < vx.size(); ++i) gx[i] += 2.0 * vx[i] * g0;
    };
  return self;
}

Tape::NodeId Tape::cross_entropy(NodeId probs, std::span<const int> target_cols,
                                 std::size_t denom) {
  check_id(probs, "cross_entropy");
  const Tensor& vp = nodes_[probs].value;
  if (vp.shape().rank() != 2)
    throw std::invalid_argument("cross_entropy: probs must be rank 2, got " +
                                vp.shape().str());
  const std::size_t rows = vp.shape()[0], cols = vp.shape()[1];
  if (target_cols.size() != rows)
    throw std::invalid_argument(
        "cross_entropy: " + std::to_string(target_cols.size()) +
        " targets for " + std::to_string(rows) + " rows");
  if (denom == 0) throw std::invalid_argument("cross_entropy: zero denominator");
  std::vector<int> targets(target_cols.begin(), target_cols.end());
  for (int tc : targets)
    if (tc < 0 || static_cast<std::size_t>(tc) >= cols)
      throw std::invalid_argument("cross_entropy: target column " +
                                  std::to_string(tc) + " out of range for " +
                                  vp.shape().str());
  double acc = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double p = vp[r * cols + static_cast<std::size_t>(targets[r])];
    acc += -std::log(p > kProbFloor ? p : kProbFloor);
  }
  acc /= static_cast<double>(denom);
  const bool ng = nodes_[probs].needs_grad;
  NodeId self = record(Tensor::scalar(acc), ng, nullptr);
  if (ng)
    nodes_[self].backprop = [self, probs, targets, denom, cols](Tape& t) {
      const double g0 = t.nodes_[self].grad[0];
      const Tensor& vp = t.nodes_[probs].value;
      Tensor& gp = t.gbuf(probs);
      for (std::size_t r = 0; r < targets.size(); ++r) {
        const std::size_t i = r * cols + static_cast<std::size_t>(targets[r]);
        // Below the floor the clamped value is constant, so no gradient.
        if (vp[i] > kProbFloor)
          gp[i] += -g0 / (static_cast<double>(denom) * vp[i]);
      }
    };
  return self;
}

void Tape::backward(NodeId loss) {
  check_id(loss, "backward");
  if (nodes_[loss].value.size() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got " +
                                nodes_[loss].value.shape().str());
  if (!nodes_[loss].needs_grad)
    throw std::invalid_argument(
        "backward: loss does not depend on any gradient-requiring leaf");
  for (Node& n : nodes_)
    n.grad = n.needs_grad ? Tensor(n.value.shape()) : Tensor();
  nodes_[loss].grad[0] = 1.0;
  for (std::size_t i = loss + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.needs_grad && n.backprop) n.backprop(*this);
  }
  ran_backward_ = true;
}

const Tensor& Tape::grad(NodeId id) const {
  check_id(id, "grad");
  if (!ran_backward_)
    throw std::logic_error("Tape::grad: backward has not been run");
  if (!nodes_[id].needs_grad)
    throw std::logic_error("Tape::grad: node " + std::to_string(id) +
                           " does not require gradients");
  return nodes_[id].grad;
}

}  // namespace pyformer
