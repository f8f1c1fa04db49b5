#include "pyformer/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

#include "pyformer/rng.hpp"

namespace pyformer {

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("train config: batch size must be positive");
  if (learning_rate <= 0.0) throw std::invalid_argument("train config: learning rate must be positive");
  if (decay < 0.0) throw std::invalid_argument("train config: decay must be nonnegative");
  if (epochs < 1) throw std::invalid_argument("train config: epochs must be at least 1");
  if (beta1 <= 0.0 || beta1 >= 1.0 || beta2 <= 0.0 || beta2 >= 1.0)
    throw std::invalid_argument("train config: betas must lie in (0, 1)");
  if (epsilon <= 0.0) throw std::invalid_argument("train config: epsilon must be positive");
}

AdamState make_adam_state(const PyFormerParams& params) {
  AdamState state;
  for (const auto& [name, tensor] : named_params(params)) {
    state.m.emplace_back(tensor->shape());
    state.v.emplace_back(tensor->shape());
  }
  return state;
}

double loss(const Tensor& probs, std::span<const int> targets,
            double l2_penalty) {
  if (probs.shape().rank() != 2)
    throw std::invalid_argument("loss: probs must be rank 2, got " +
                                probs.shape().str());
  const std::size_t rows = probs.shape()[0], k = probs.shape()[1];
  if (targets.size() != rows)
    throw std::invalid_argument("loss: " + std::to_string(targets.size()) +
                                " targets for " + std::to_string(rows) +
                                " rows");
  double acc = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] < 1 || static_cast<std::size_t>(targets[r]) > k)
      throw std::invalid_argument("loss: target " + std::to_string(targets[r]) +
                                  " outside 1.." + std::to_string(k));
    const double p = probs[r * k + static_cast<std::size_t>(targets[r] - 1)];
    acc += -std::log(p > Tape::kProbFloor ? p : Tape::kProbFloor);
  }
  return acc / static_cast<double>(rows) + l2_penalty;
}

void adam_step(std::vector<Tensor*>& params,
               const std::vector<const Tensor*>& grads, AdamState& state,
               const TrainConfig& config) {
  config.validate();
  if (params.size() != grads.size() || params.size() != state.m.size() ||
      params.size() != state.v.size())
    throw std::invalid_argument("adam_step: tensor list lengths disagree");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (!(params[i]->shape() == grads[i]->shape()) ||
        !(params[i]->shape() == state.m[i].shape()))
      throw std::invalid_argument("adam_step: shape mismatch at tensor " +
                                  std::to_string(i) + " (" +
                                  params[i]->shape().str() + " vs " +
                                  grads[i]->shape().str() + ")");

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double eta = config.learning_rate / (1.0 + config.decay * t);
  const double bc1 = 1.0 - std::pow(config.beta1, t);
  const double bc2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = *grads[i];
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * g[j];
      v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * g[j] * g[j];
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      p[j] -= eta * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

BatchGradients batch_gradients(const PyFormerParams& params,
                               const PyFormerConfig& config,
                               std::span<const Tensor> patches,
                               std::span<const int> targets) {
  if (patches.empty()) throw std::invalid_argument("batch_gradients: empty batch");
  if (patches.size() != targets.size())
    throw std::invalid_argument("batch_gradients: " +
                                std::to_string(targets.size()) +
                                " targets for " +
                                std::to_string(patches.size()) + " patches");
  std::vector<int> target_cols(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] < 1 || static_cast<std::size_t>(targets[i]) > config.num_classes)
      throw std::invalid_argument("batch_gradients: target " +
                                  std::to_string(targets[i]) + " outside 1.." +
                                  std::to_string(config.num_classes));
    target_cols[i] = targets[i] - 1;
  }

  // Fixed chunk size (not thread-count dependent) so the chunk structure,
  // and therefore every floating-point sum below, is identical however many
  // threads run.
  constexpr std::size_t kChunk = 8;
  const std::size_t batch = patches.size();
  const std::size_t n_chunks = (batch + kChunk - 1) / kChunk;
  std::vector<double> chunk_loss(n_chunks, 0.0);
  std::vector<std::vector<Tensor>> chunk_grads(n_chunks);

#pragma omp parallel for schedule(static)
  for (std::int64_t ci = 0; ci < static_cast<std::int64_t>(n_chunks); ++ci) {
    const std::size_t begin = static_cast<std::size_t>(ci) * kChunk;
    const std::size_t end = std::min(begin + kChunk, batch);
    Tape tape;
    ForwardResult fwd = forward(
        tape, params, config, patches.subspan(begin, end - begin),
        /*requires_grad=*/true);
    // Each chunk contributes sum(-ln p)/batch; chunk 0 also carries the L2
    // penalty so it enters the total exactly once.
    Tape::NodeId ce = tape.cross_entropy(
        fwd.probs,
        std::span<const int>(target_cols.data() + begin, end - begin), batch);
    Tape::NodeId total = ci == 0 ? tape.add(ce, fwd.l2_penalty) : ce;
    tape.backward(total);
    chunk_loss[static_cast<std::size_t>(ci)] = tape.value(total)[0];
    std::vector<Tensor>& grads = chunk_grads[static_cast<std::size_t>(ci)];
    for (Tape::NodeId leaf : leaf_ids(fwd.leaves))
      grads.push_back(tape.grad(leaf));
  }

  BatchGradients result;
  result.grads = std::move(chunk_grads[0]);
  result.loss = chunk_loss[0];
  for (std::size_t ci = 1; ci < n_chunks; ++ci) {
    result.loss += chunk_loss[ci];
    for (std::size_t i = 0; i < result.grads.size(); ++i)
      axpy(result.grads[i], chunk_grads[ci][i]);
  }
  return result;
}

TrainHistory train(PyFormerParams& params, const PyFormerConfig& config,
                   const TrainConfig& train_config, const PatchSet& patches,
                   const SplitAssignment& split) {
  config.validate();
  train_config.validate();
  if (split.train.empty()) throw std::invalid_argument("train: empty train set");

  std::vector<std::size_t> train_indices;
  std::vector<int> train_labels;
  for (const Center& c : split.train) {
    const auto idx = patches.index_of(c);
    if (!idx)
      throw std::invalid_argument("train: center (" + std::to_string(c.row) +
                                  ", " + std::to_string(c.col) +
                                  ") not in the patch set");
    train_indices.push_back(*idx);
    train_labels.push_back(patches.center_labels[*idx]);
  }

  auto named = named_params(params);
  std::vector<Tensor*> param_ptrs;
  for (auto& [name, tensor] : named) param_ptrs.push_back(tensor);
  AdamState state = make_adam_state(params);

  TrainHistory history;
  Rng rng(train_config.seed);
  std::vector<std::size_t> order(train_indices.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < train_config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += train_config.batch_size) {
      const std::size_t end =
          std::min(start + train_config.batch_size, order.size());
      std::vector<Tensor> batch;
      std::vector<int> batch_targets;
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(patches.patches[train_indices[order[i]]]);
        batch_targets.push_back(train_labels[order[i]]);
      }
      BatchGradients bg = batch_gradients(params, config, batch, batch_targets);
      if (!std::isfinite(bg.loss))
        throw std::runtime_error("train: loss became non-finite at epoch " +
                                 std::to_string(epoch + 1));
      std::vector<const Tensor*> grad_ptrs;
      for (const Tensor& g : bg.grads) grad_ptrs.push_back(&g);
      adam_step(param_ptrs, grad_ptrs, state, train_config);
      epoch_loss += bg.loss * static_cast<double>(end - start);
    }
    history.train_loss.push_back(epoch_loss /
                                 static_cast<double>(order.size()));

    const Metrics train_metrics = metrics_from_confusion(
        evaluate(params, config, patches, split.train));
    history.train_oa.push_back(train_metrics.oa);
    if (split.val.empty()) {
      history.val_oa.push_back(std::numeric_limits<double>::quiet_NaN());
    } else {
      const Metrics val_metrics =
          metrics_from_confusion(evaluate(params, config, patches, split.val));
      history.val_oa.push_back(val_metrics.oa);
    }
  }
  return history;
}

}  // namespace pyformer
