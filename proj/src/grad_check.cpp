#include "pyformer/grad_check.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "pyformer/rng.hpp"

namespace pyformer {

namespace {

double eval_at(const ScalarFn& f, const Tensor& x) {
  Tape tape;
  Tape::NodeId in = tape.leaf(x, /*requires_grad=*/false);
  Tape::NodeId out = f(tape, in);
  const Tensor& v = tape.value(out);
  if (v.size() != 1)
    throw std::invalid_argument("grad_check: f must produce a scalar, got " +
                                v.shape().str());
  return v[0];
}

}  // namespace

double grad_check_at(const ScalarFn& f, const Tensor& x, double eps,
                     std::span<const std::size_t> coords) {
  if (eps <= 0.0) throw std::invalid_argument("grad_check: eps must be positive");

  Tape tape;
  Tape::NodeId in = tape.leaf(x, /*requires_grad=*/true);
  Tape::NodeId out = f(tape, in);
  tape.backward(out);
  const Tensor analytic = tape.grad(in);

  double worst = 0.0;
  for (std::size_t c : coords) {
    if (c >= x.size())
      throw std::invalid_argument("grad_check: coordinate out of range");
    Tensor xp = x;
    xp[c] += eps;
    Tensor xm = x;
    xm[c] -= eps;
    const double numeric = (eval_at(f, xp) - eval_at(f, xm)) / (2.0 * eps);
    const double a = analytic[c];
    const double err =
        std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
    worst = std::max(worst, err);
  }
  return worst;
}

double grad_check(const ScalarFn& f, const Tensor& x, double eps) {
  std::vector<std::size_t> coords(x.size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  return grad_check_at(f, x, eps, coords);
}

namespace {

double model_loss_value(const PyFormerParams& params,
                        const PyFormerConfig& config,
                        std::span<const Tensor> patches,
                        std::span<const int> target_cols) {
  Tape tape;
  ForwardResult fwd =
      forward(tape, params, config, patches, /*requires_grad=*/false);
  Tape::NodeId ce =
      tape.cross_entropy(fwd.probs, target_cols, patches.size());
  return tape.value(tape.add(ce, fwd.l2_penalty))[0];
}

}  // namespace

std::vector<GroupGradCheck> model_grad_check(const PyFormerConfig& config,
                                             std::size_t batch, double eps,
                                             std::size_t samples,
                                             std::uint64_t seed) {
  config.validate();
  if (batch == 0) throw std::invalid_argument("model_grad_check: empty batch");
  if (eps <= 0.0)
    throw std::invalid_argument("model_grad_check: eps must be positive");

  PyFormerParams params = init_params(config, seed);
  Rng rng(seed + 1);
  std::vector<Tensor> patches;
  std::vector<int> target_cols;
  for (std::size_t i = 0; i < batch; ++i) {
    Tensor p(Shape{{config.patch_size, config.patch_size,
                    config.reduced_bands}});
    for (std::size_t j = 0; j < p.size(); ++j) p[j] = rng.normal();
    patches.push_back(std::move(p));
    target_cols.push_back(static_cast<int>(rng.index(config.num_classes)));
  }

  // Analytic gradients for every group from one backward pass.
  Tape tape;
  ForwardResult fwd =
      forward(tape, params, config, patches, /*requires_grad=*/true);
  Tape::NodeId ce = tape.cross_entropy(fwd.probs, target_cols, batch);
  tape.backward(tape.add(ce, fwd.l2_penalty));
  const std::vector<Tape::NodeId> leaves = leaf_ids(fwd.leaves);

  PyFormerParams work = params;
  auto named_work = named_params(work);
  std::vector<GroupGradCheck> report;
  for (std::size_t gi = 0; gi < named_work.size(); ++gi) {
    Tensor& w = *named_work[gi].second;
    const Tensor analytic = tape.grad(leaves[gi]);
    std::vector<std::size_t> coords;
    if (samples == 0 || samples >= w.size()) {
      coords.resize(w.size());
      std::iota(coords.begin(), coords.end(), std::size_t{0});
    } else {
      for (std::size_t s = 0; s < samples; ++s) coords.push_back(rng.index(w.size()));
    }
    GroupGradCheck group;
    group.name = named_work[gi].first;
    group.coords = coords.size();
    for (std::size_t c : coords) {
      const double orig = w[c];
      w[c] = orig + eps;
      const double fp = model_loss_value(work, config, patches, target_cols);
      w[c] = orig - eps;
      const double fm = model_loss_value(work, config, patches, target_cols);
      w[c] = orig;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double a = analytic[c];
      const double err = std::abs(a - numeric) /
                         std::max(1e-8, std::abs(a) + std::abs(numeric));
      group.max_rel_err = std::max(group.max_rel_err, err);
    }
    report.push_back(std::move(group));
  }
  return report;
}

}  // namespace pyformer
