#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pyformer/model.hpp"
#include "pyformer/tape.hpp"

namespace pyformer {

// Scalar function of a single tensor input, built on a fresh tape each call.
// The function may register additional leaves of its own (e.g. parameters).
using ScalarFn = std::function<Tape::NodeId(Tape&, Tape::NodeId)>;

// Compares the analytic gradient of f at x against central finite
// differences. Returns the maximum over checked coordinates of
//   |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
double grad_check(const ScalarFn& f, const Tensor& x, double eps);

// Same, but only at the given flat coordinates (for large tensors).
double grad_check_at(const ScalarFn& f, const Tensor& x, double eps,
                     std::span<const std::size_t> coords);

struct GroupGradCheck {
  std::string name;          // parameter group, e.g. "level0/layer0/wq"
  std::size_t coords = 0;    // coordinates checked
  double max_rel_err = 0.0;  // worst relative error over those coordinates
};

// Checks d(loss)/d(theta) for every parameter group of a freshly seeded
// model against central differences, on a random batch of `batch` patches.
// Loss = mean cross-entropy + L2 penalty. `samples` coordinates are drawn
// per tensor (0 = every coordinate). One entry per parameter group, in
// canonical order.
std::vector<GroupGradCheck> model_grad_check(const PyFormerConfig& config,
                                             std::size_t batch, double eps,
                                             std::size_t samples,
                                             std::uint64_t seed);

}  // namespace pyformer
