#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pyformer/tape.hpp"

namespace pyformer {

struct PyFormerConfig {
  std::size_t patch_size = 8;      // S
  std::size_t reduced_bands = 16;  // B*
  std::size_t num_levels = 2;
  std::size_t num_layers = 2;
  std::size_t num_heads = 4;
  std::size_t d_model = 64;
  std::size_t ff_hidden = 0;  // 0 = default 4*d_model
  double lambda = 0.01;
  std::size_t num_classes = 0;  // K, must be set
  bool use_layernorm = false;

  std::size_t ff_dim() const { return ff_hidden ? ff_hidden : 4 * d_model; }
  // Conv channel widths track d_model so the block emits d_model-wide tokens
  // at any configured width (defaults 32 and 64).
  std::size_t conv1_channels() const { return d_model / 2; }
  std::size_t conv2_channels() const { return d_model; }
  std::size_t level_patch(std::size_t level) const { return patch_size >> level; }
  std::size_t level_bands(std::size_t level) const { return reduced_bands >> level; }
  std::size_t concat_dim() const {
    std::size_t total = 0;
    for (std::size_t l = 0; l < num_levels; ++l) total += level_bands(l) * d_model;
    return total;
  }

  // Throws std::invalid_argument on any violated invariant.
  void validate() const;
};

void to_json(nlohmann::json& j, const PyFormerConfig& c);
void from_json(const nlohmann::json& j, PyFormerConfig& c);

struct LayerParams {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
  Tensor ff1_w, ff1_b, ff2_w, ff2_b;
};

struct LevelParams {
  Tensor conv1_w, conv1_b;  // (c1, 1, 1, Sl, Sl), (c1)
  Tensor conv2_w, conv2_b;  // (c2, c1, 1, 1, 1), (c2)
  Tensor res_w, res_b;      // (c2, c1, 1, 1, 1), (c2)
  Tensor pos;               // (B*l, d_model)
  std::vector<LayerParams> layers;
};

struct PyFormerParams {
  std::vector<LevelParams> levels;
  Tensor head_w, head_b;  // (concat_dim, K), (K)
};

// Zero-filled parameters with the shapes the config dictates.
PyFormerParams allocate_params(const PyFormerConfig& config);
// Seeded init: fan-in-scaled uniform for conv/projection/FF/head weights,
// 0.02-std normal for positional embeddings, zero biases.
PyFormerParams init_params(const PyFormerConfig& config, std::uint64_t seed);

// Closed-form parameter count (the oracle the allocated tensors are checked
// against).
std::size_t param_count(const PyFormerConfig& config);

// Canonical enumeration (level-major, then layers, head last). Checkpoint
// order, Adam state order, and gradient collection all follow it.
std::vector<std::pair<std::string, Tensor*>> named_params(PyFormerParams& p);
std::vector<std::pair<std::string, const Tensor*>> named_params(const PyFormerParams& p);

// Tape leaf handles mirroring PyFormerParams.
struct LayerLeaves {
  Tape::NodeId wq, bq, wk, bk, wv, bv, wo, bo;
  Tape::NodeId ff1_w, ff1_b, ff2_w, ff2_b;
};

struct LevelLeaves {
  Tape::NodeId conv1_w, conv1_b, conv2_w, conv2_b, res_w, res_b, pos;
  std::vector<LayerLeaves> layers;
};

struct ParamLeaves {
  std::vector<LevelLeaves> levels;
  Tape::NodeId head_w, head_b;
};

ParamLeaves register_params(Tape& tape, const PyFormerParams& params,
                            bool requires_grad);
// Leaf ids in canonical named_params order.
std::vector<Tape::NodeId> leaf_ids(const ParamLeaves& leaves);

// --- Graph builders -------------------------------------------------------

// (S, S, B*) -> (S/2^l, S/2^l, B*/2^l); level 0 returns the input node.
Tape::NodeId pyramid_level_input(Tape& tape, Tape::NodeId patch,
                                 std::size_t level);
// (Sl, Sl, B*l) -> token matrix (B*l, d_model).
Tape::NodeId conv_block(Tape& tape, Tape::NodeId level_input,
                        const LevelLeaves& level, const PyFormerConfig& config);
Tape::NodeId add_positional(Tape& tape, Tape::NodeId tokens, Tape::NodeId pos);
// Multi-head scaled dot-product attention; attn_rows (optional) receives the
// per-head softmax weight nodes.
Tape::NodeId attention(Tape& tape, Tape::NodeId h, const LayerLeaves& layer,
                       const PyFormerConfig& config,
                       std::vector<Tape::NodeId>* attn_rows = nullptr);
// H_prev + FF(Attention(H_prev)); the residual wraps the whole composition.
Tape::NodeId encoder_layer(Tape& tape, Tape::NodeId h_prev,
                           const LayerLeaves& layer,
                           const PyFormerConfig& config);
// One final token matrix per level -> flat feature vector, level 0 first.
Tape::NodeId integrate_levels(Tape& tape,
                              std::span<const Tape::NodeId> level_tokens,
                              std::size_t expected_levels);
// -> (probabilities over K as a (1, K) row, l2 penalty scalar).
std::pair<Tape::NodeId, Tape::NodeId> classify_head(Tape& tape,
                                                    Tape::NodeId features,
                                                    Tape::NodeId head_w,
                                                    Tape::NodeId head_b,
                                                    double lambda);

struct ForwardResult {
  ParamLeaves leaves;
  std::vector<Tape::NodeId> item_probs;  // one (1, K) row per patch
  Tape::NodeId probs;                    // (batch, K)
  Tape::NodeId l2_penalty;               // scalar
};

// Full network over a batch of (S, S, B*) patches.
ForwardResult forward(Tape& tape, const PyFormerParams& params,
                      const PyFormerConfig& config,
                      std::span<const Tensor> patches, bool requires_grad);

}  // namespace pyformer
