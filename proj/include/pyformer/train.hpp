#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pyformer/metrics.hpp"
#include "pyformer/model.hpp"
#include "pyformer/patches.hpp"
#include "pyformer/split.hpp"

namespace pyformer {

struct TrainConfig {
  std::size_t batch_size = 128;
  double learning_rate = 1e-4;
  double decay = 1e-6;  // per-step learning-rate decay
  std::size_t epochs = 50;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 1;

  void validate() const;
};

// First/second moment accumulators in canonical named_params order.
struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::int64_t step = 0;
};

AdamState make_adam_state(const PyFormerParams& params);

// Mean cross-entropy over the batch plus the penalty: targets are 1..K.
double loss(const Tensor& probs, std::span<const int> targets,
            double l2_penalty);

// One Adam update over aligned param/grad lists:
//   t <- t+1; eta_t = lr / (1 + decay*t);
//   m <- b1*m + (1-b1)*g; v <- b2*v + (1-b2)*g^2;
//   param <- param - eta_t * m_hat / (sqrt(v_hat) + eps).
void adam_step(std::vector<Tensor*>& params,
               const std::vector<const Tensor*>& grads, AdamState& state,
               const TrainConfig& config);

// Batch loss value and parameter gradients (canonical order). The batch is
// processed in fixed-size chunks on independent tapes (parallel) with a
// serial ordered reduction, so results are bitwise independent of thread
// count.
struct BatchGradients {
  double loss = 0.0;
  std::vector<Tensor> grads;
};

BatchGradients batch_gradients(const PyFormerParams& params,
                               const PyFormerConfig& config,
                               std::span<const Tensor> patches,
                               std::span<const int> targets);

struct TrainHistory {
  std::vector<double> train_loss;  // mean loss per epoch
  std::vector<double> train_oa;
  std::vector<double> val_oa;  // NaN if the validation set is empty
};

// Full training run: per epoch, seeded shuffle of the train centers,
// mini-batches (last may be short), Adam updates; deterministic given seeds.
TrainHistory train(PyFormerParams& params, const PyFormerConfig& config,
                   const TrainConfig& train_config, const PatchSet& patches,
                   const SplitAssignment& split);

}  // namespace pyformer
