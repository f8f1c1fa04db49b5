#include "pyformer/model.hpp"

#include <cmath>
#include <stdexcept>

#include "pyformer/rng.hpp"

namespace pyformer {

void PyFormerConfig::validate() const {
  if (patch_size < 1) throw std::invalid_argument("config: patch size must be positive");
  if (reduced_bands < 1) throw std::invalid_argument("config: reduced bands must be positive");
  if (num_levels < 1) throw std::invalid_argument("config: need at least one level");
  if (num_layers < 1) throw std::invalid_argument("config: need at least one layer");
  if (num_heads < 1) throw std::invalid_argument("config: need at least one head");
  if (num_classes < 2) throw std::invalid_argument("config: need at least two classes");
  if (lambda < 0.0) throw std::invalid_argument("config: lambda must be nonnegative");
  if (d_model % 2 != 0)
    throw std::invalid_argument("config: d_model " + std::to_string(d_model) +
                                " must be even (conv widths are d_model/2 and d_model)");
  if (d_model % num_heads != 0)
    throw std::invalid_argument("config: d_model " + std::to_string(d_model) +
                                " not divisible by " + std::to_string(num_heads) +
                                " heads");
  const std::size_t down = std::size_t{1} << (num_levels - 1);
  if (patch_size % down != 0)
    throw std::invalid_argument("config: patch size " + std::to_string(patch_size) +
                                " not divisible by 2^(levels-1) = " +
                                std::to_string(down));
  if (reduced_bands % down != 0)
    throw std::invalid_argument("config: reduced bands " +
                                std::to_string(reduced_bands) +
                                " not divisible by 2^(levels-1) = " +
                                std::to_string(down));
}

void to_json(nlohmann::json& j, const PyFormerConfig& c) {
  j = nlohmann::json{{"patch_size", c.patch_size},
                     {"reduced_bands", c.reduced_bands},
                     {"num_levels", c.num_levels},
                     {"num_layers", c.num_layers},
                     {"num_heads", c.num_heads},
                     {"d_model", c.d_model},
                     {"ff_hidden", c.ff_dim()},
                     {"lambda", c.lambda},
                     {"num_classes", c.num_classes},
                     {"use_layernorm", c.use_layernorm}};
}

void from_json(const nlohmann::json& j, PyFormerConfig& c) {
  c.patch_size = j.at("patch_size").get<std::size_t>();
  c.reduced_bands = j.at("reduced_bands").get<std::size_t>();
  c.num_levels = j.at("num_levels").get<std::size_t>();
  c.num_layers = j.at("num_layers").get<std::size_t>();
  c.num_heads = j.at("num_heads").get<std::size_t>();
  c.d_model = j.at("d_model").get<std::size_t>();
  c.ff_hidden = j.at("ff_hidden").get<std::size_t>();
  c.lambda = j.at("lambda").get<double>();
  c.num_classes = j.at("num_classes").get<std::size_t>();
  c.use_layernorm = j.at("use_layernorm").get<bool>();
}

PyFormerParams allocate_params(const PyFormerConfig& config) {
  config.validate();
  const std::size_t c1 = config.conv1_channels(), c2 = config.conv2_channels();
  const std::size_t d = config.d_model, ff = config.ff_dim();
  PyFormerParams p;
  for (std::size_t l = 0; l < config.num_levels; ++l) {
    const std::size_t sl = config.level_patch(l), bl = config.level_bands(l);
    LevelParams level;
    level.conv1_w = Tensor(Shape{c1, 1, 1, sl, sl});
    level.conv1_b = Tensor(Shape{c1});
    level.conv2_w = Tensor(Shape{c2, c1, 1, 1, 1});
    level.conv2_b = Tensor(Shape{c2});
    level.res_w = Tensor(Shape{c2, c1, 1, 1, 1});
    level.res_b = Tensor(Shape{c2});
    level.pos = Tensor(Shape{bl, d});
    for (std::size_t ly = 0; ly < config.num_layers; ++ly) {
      LayerParams layer;
      layer.wq = Tensor(Shape{d, d});
      layer.bq = Tensor(Shape{d});
      layer.wk = Tensor(Shape{d, d});
      layer.bk = Tensor(Shape{d});
      layer.wv = Tensor(Shape{d, d});
      layer.bv = Tensor(Shape{d});
      layer.wo = Tensor(Shape{d, d});
      layer.bo = Tensor(Shape{d});
      layer.ff1_w = Tensor(Shape{d, ff});
      layer.ff1_b = Tensor(Shape{ff});
      layer.ff2_w = Tensor(Shape{ff, d});
      layer.ff2_b = Tensor(Shape{d});
      level.layers.push_back(std::move(layer));
    }
    p.levels.push_back(std::move(level));
  }
  p.head_w = Tensor(Shape{config.concat_dim(), config.num_classes});
  p.head_b = Tensor(Shape{config.num_classes});
  return p;
}

namespace {

void fill_fan_in_uniform(Tensor& t, std::size_t fan_in, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-limit, limit);
}

void fill_normal(Tensor& t, double stddev, Rng& rng) {
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = stddev * rng.normal();
}

}  // namespace

PyFormerParams init_params(const PyFormerConfig& config, std::uint64_t seed) {
  PyFormerParams p = allocate_params(config);
  Rng rng(seed);
  const std::size_t c1 = config.conv1_channels();
  const std::size_t d = config.d_model, ff = config.ff_dim();
  for (std::size_t l = 0; l < config.num_levels; ++l) {
    const std::size_t sl = config.level_patch(l);
    LevelParams& level = p.levels[l];
    fill_fan_in_uniform(level.conv1_w, sl * sl, rng);
    fill_fan_in_uniform(level.conv2_w, c1, rng);
    fill_fan_in_uniform(level.res_w, c1, rng);
    fill_normal(level.pos, 0.02, rng);
    for (LayerParams& layer : level.layers) {
      fill_fan_in_uniform(layer.wq, d, rng);
      fill_fan_in_uniform(layer.wk, d, rng);
      fill_fan_in_uniform(layer.wv, d, rng);
      fill_fan_in_uniform(layer.wo, d, rng);
      fill_fan_in_uniform(layer.ff1_w, d, rng);
      fill_fan_in_uniform(layer.ff2_w, ff, rng);
    }
  }
  fill_fan_in_uniform(p.head_w, config.concat_dim(), rng);
  return p;
}

std::size_t param_count(const PyFormerConfig& config) {
  config.validate();
  const std::size_t c1 = config.conv1_channels(), c2 = config.conv2_channels();
  const std::size_t d = config.d_model, ff = config.ff_dim();
  std::size_t total = 0;
  for (std::size_t l = 0; l < config.num_levels; ++l) {
    const std::size_t sl = config.level_patch(l), bl = config.level_bands(l);
    total += c1 * sl * sl + c1;       // conv1
    total += c2 * c1 + c2;            // conv2
    total += c2 * c1 + c2;            // residual projection
    total += bl * d;                  // positional
    total += config.num_layers * (4 * (d * d + d) + (d * ff + ff) + (ff * d + d));
  }
  total += config.concat_dim() * config.num_classes + config.num_classes;
  return total;
}

namespace {

template <class Params, class TensorPtr>
std::vector<std::pair<std::string, TensorPtr>> named_params_impl(Params& p) {
  std::vector<std::pair<std::string, TensorPtr>> out;
  for (std::size_t l = 0; l < p.levels.size(); ++l) {
    const std::string lp = "level" + std::to_string(l) + "/";
    auto& level = p.levels[l];
    out.emplace_back(lp + "conv1_w", &level.conv1_w);
    out.emplace_back(lp + "conv1_b", &level.conv1_b);
    out.emplace_back(lp + "conv2_w", &level.conv2_w);
    out.emplace_back(lp + "conv2_b", &level.conv2_b);
    out.emplace_back(lp + "res_w", &level.res_w);
    out.emplace_back(lp + "res_b", &level.res_b);
    out.emplace_back(lp + "pos", &level.pos);
    for (std::size_t y = 0; y < level.layers.size(); ++y) {
      const std::string yp = lp + "layer" + std::to_string(y) + "/";
      auto& layer = level.layers[y];
      out.emplace_back(yp + "wq", &layer.wq);
      out.emplace_back(yp + "bq", &layer.bq);
      out.emplace_back(yp + "wk", &layer.wk);
      out.emplace_back(yp + "bk", &layer.bk);
      out.emplace_back(yp + "wv", &layer.wv);
      out.emplace_back(yp + "bv", &layer.bv);
      out.emplace_back(yp + "wo", &layer.wo);
      out.emplace_back(yp + "bo", &layer.bo);
      out.emplace_back(yp + "ff1_w", &layer.ff1_w);
      out.emplace_back(yp + "ff1_b", &layer.ff1_b);
      out.emplace_back(yp + "ff2_w", &layer.ff2_w);
      out.emplace_back(yp + "ff2_b", &layer.ff2_b);
    }
  }
  out.emplace_back("head/w", &p.head_w);
  out.emplace_back("head/b", &p.head_b);
  return out;
}

}  // namespace

std::vector<std::pair<std::string, Tensor*>> named_params(PyFormerParams& p) {
  return named_params_impl<PyFormerParams, Tensor*>(p);
}

std::vector<std::pair<std::string, const Tensor*>> named_params(
    const PyFormerParams& p) {
  return named_params_impl<const PyFormerParams, const Tensor*>(p);
}

ParamLeaves register_params(Tape& tape, const PyFormerParams& params,
                            bool requires_grad) {
  ParamLeaves leaves;
  for (const LevelParams& level : params.levels) {
    LevelLeaves ll;
    ll.conv1_w = tape.leaf(level.conv1_w, requires_grad);
    ll.conv1_b = tape.leaf(level.conv1_b, requires_grad);
    ll.conv2_w = tape.leaf(level.conv2_w, requires_grad);
    ll.conv2_b = tape.leaf(level.conv2_b, requires_grad);
    ll.res_w = tape.leaf(level.res_w, requires_grad);
    ll.res_b = tape.leaf(level.res_b, requires_grad);
    ll.pos = tape.leaf(level.pos, requires_grad);
    for (const LayerParams& layer : level.layers) {
      LayerLeaves ly;
      ly.wq = tape.leaf(layer.wq, requires_grad);
      ly.bq = tape.leaf(layer.bq, requires_grad);
      ly.wk = tape.leaf(layer.wk, requires_grad);
      ly.bk = tape.leaf(layer.bk, requires_grad);
      ly.wv = tape.leaf(layer.wv, requires_grad);
      ly.bv = tape.leaf(layer.bv, requires_grad);
      ly.wo = tape.leaf(layer.wo, requires_grad);
      ly.bo = tape.leaf(layer.bo, requires_grad);
      ly.ff1_w = tape.leaf(layer.ff1_w, requires_grad);
      ly.ff1_b = tape.leaf(layer.ff1_b, requires_grad);
      ly.ff2_w = tape.leaf(layer.ff2_w, requires_grad);
      ly.ff2_b = tape.leaf(layer.ff2_b, requires_grad);
      ll.layers.push_back(ly);
    }
    leaves.levels.push_back(std::move(ll));
  }
  leaves.head_w = tape.leaf(params.head_w, requires_grad);
  leaves.head_b = tape.leaf(params.head_b, requires_grad);
  return leaves;
}

std::vector<Tape::NodeId> leaf_ids(const ParamLeaves& leaves) {
  std::vector<Tape::NodeId> ids;
  for (const LevelLeaves& level : leaves.levels) {
    ids.insert(ids.end(), {level.conv1_w, level.conv1_b, level.conv2_w,
                           level.conv2_b, level.res_w, level.res_b, level.pos});
    for (const LayerLeaves& layer : level.layers)
      ids.insert(ids.end(),
                 {layer.wq, layer.bq, layer.wk, layer.bk, layer.wv, layer.bv,
                  layer.wo, layer.bo, layer.ff1_w, layer.ff1_b, layer.ff2_w,
                  layer.ff2_b});
  }
  ids.push_back(leaves.head_w);
  ids.push_back(leaves.head_b);
  return ids;
}

Tape::NodeId pyramid_level_input(Tape& tape, Tape::NodeId patch,
                                 std::size_t level) {
  // By value: recording ops below may reallocate the tape's node storage,
  // which would invalidate a reference into it.
  const Shape s = tape.value(patch).shape();
  if (s.rank() != 3)
    throw std::invalid_argument("pyramid_level_input: patch must be rank 3, got " +
                                s.str());
  if (level == 0) return patch;  // Scale = 2^0 = 1
  const std::size_t f = std::size_t{1} << level;
  if (s[0] % f != 0 || s[1] % f != 0 || s[2] % f != 0)
    throw std::invalid_argument("pyramid_level_input: shape " + s.str() +
                                " not divisible by 2^" + std::to_string(level));
  Tape::NodeId x = tape.reshape(patch, Shape{1, s[0], s[1], s[2]});
  Tape::NodeId pooled = tape.avg_pool3d(x, f);
  return tape.reshape(pooled, Shape{s[0] / f, s[1] / f, s[2] / f});
}

Tape::NodeId conv_block(Tape& tape, Tape::NodeId level_input,
                        const LevelLeaves& level, const PyFormerConfig& config) {
  // By value, same reason as in pyramid_level_input.
  const Shape s = tape.value(level_input).shape();
  if (s.rank() != 3)
    throw std::invalid_argument("conv_block: input must be rank 3, got " + s.str());
  const std::size_t sl = s[0], bl = s[2];
  const std::size_t c2 = config.conv2_channels();
  // (Sl, Sl, Bl) -> channels-first (1, Bl, Sl, Sl): bands become the depth
  // axis, so the spatial-collapsing conv leaves Bl token positions.
  Tape::NodeId x = tape.permute3(level_input, {2, 0, 1});
  x = tape.reshape(x, Shape{1, bl, sl, sl});
  Tape::NodeId a1 = tape.relu(tape.conv3d(x, level.conv1_w, level.conv1_b, Pad3{}));
  Tape::NodeId main = tape.conv3d(a1, level.conv2_w, level.conv2_b, Pad3{});
  Tape::NodeId res = tape.conv3d(a1, level.res_w, level.res_b, Pad3{});
  Tape::NodeId a2 = tape.relu(tape.add(main, res));
  return tape.transpose2d(tape.reshape(a2, Shape{c2, bl}));
}

Tape::NodeId add_positional(Tape& tape, Tape::NodeId tokens, Tape::NodeId pos) {
  return tape.add(tokens, pos);
}

Tape::NodeId attention(Tape& tape, Tape::NodeId h, const LayerLeaves& layer,
                       const PyFormerConfig& config,
                       std::vector<Tape::NodeId>* attn_rows) {
  const std::size_t d = config.d_model, heads = config.num_heads;
  const std::size_t dh = d / heads;
  Tape::NodeId q = tape.add_row_bias(tape.matmul(h, layer.wq), layer.bq);
  Tape::NodeId k = tape.add_row_bias(tape.matmul(h, layer.wk), layer.bk);
  Tape::NodeId v = tape.add_row_bias(tape.matmul(h, layer.wv), layer.bv);
  std::vector<Tape::NodeId> head_outputs;
  for (std::size_t i = 0; i < heads; ++i) {
    Tape::NodeId qh = tape.slice_cols(q, i * dh, (i + 1) * dh);
    Tape::NodeId kh = tape.slice_cols(k, i * dh, (i + 1) * dh);
    Tape::NodeId vh = tape.slice_cols(v, i * dh, (i + 1) * dh);
    Tape::NodeId scores = tape.scale(tape.matmul(qh, tape.transpose2d(kh)),
                                     1.0 / std::sqrt(static_cast<double>(dh)));
    Tape::NodeId weights = tape.softmax(scores, 1);
    if (attn_rows) attn_rows->push_back(weights);
    head_outputs.push_back(tape.matmul(weights, vh));
  }
  Tape::NodeId merged = tape.concat_cols(head_outputs);
  return tape.add_row_bias(tape.matmul(merged, layer.wo), layer.bo);
}

Tape::NodeId encoder_layer(Tape& tape, Tape::NodeId h_prev,
                           const LayerLeaves& layer,
                           const PyFormerConfig& config) {
  Tape::NodeId att_in =
      config.use_layernorm ? tape.layer_norm_rows(h_prev) : h_prev;
  Tape::NodeId att = attention(tape, att_in, layer, config);
  Tape::NodeId ff_in = config.use_layernorm ? tape.layer_norm_rows(att) : att;
  Tape::NodeId hidden =
      tape.relu(tape.add_row_bias(tape.matmul(ff_in, layer.ff1_w), layer.ff1_b));
  Tape::NodeId ff =
      tape.add_row_bias(tape.matmul(hidden, layer.ff2_w), layer.ff2_b);
  // The residual wraps the whole attention+FF composition.
  return tape.add(h_prev, ff);
}

Tape::NodeId integrate_levels(Tape& tape,
                              std::span<const Tape::NodeId> level_tokens,
                              std::size_t expected_levels) {
  if (level_tokens.size() != expected_levels)
    throw std::invalid_argument(
        "integrate_levels: got " + std::to_string(level_tokens.size()) +
        " level sequences, expected " + std::to_string(expected_levels));
  return tape.flatten_concat(level_tokens);
}

std::pair<Tape::NodeId, Tape::NodeId> classify_head(Tape& tape,
                                                    Tape::NodeId features,
                                                    Tape::NodeId head_w,
                                                    Tape::NodeId head_b,
                                                    double lambda) {
  const std::size_t len = tape.value(features).size();
  const std::size_t expected = tape.value(head_w).shape()[0];
  if (len != expected)
    throw std::invalid_argument("classify_head: feature length " +
                                std::to_string(len) + " does not match head (" +
                                tape.value(head_w).shape().str() + ")");
  Tape::NodeId row = tape.relu(tape.reshape(features, Shape{1, len}));
  Tape::NodeId logits = tape.add_row_bias(tape.matmul(row, head_w), head_b);
  Tape::NodeId probs = tape.softmax(logits, 1);
  Tape::NodeId l2 = tape.scale(tape.sum_squares(head_w), lambda);
  return {probs, l2};
}

ForwardResult forward(Tape& tape, const PyFormerParams& params,
                      const PyFormerConfig& config,
                      std::span<const Tensor> patches, bool requires_grad) {
  config.validate();
  if (patches.empty()) throw std::invalid_argument("forward: empty batch");
  const Shape expected{config.patch_size, config.patch_size,
                       config.reduced_bands};
  for (const Tensor& patch : patches)
    if (!(patch.shape() == expected))
      throw std::invalid_argument("forward: patch shape " + patch.shape().str() +
                                  " does not match " + expected.str());

  ForwardResult result;
  result.leaves = register_params(tape, params, requires_grad);

  bool first = true;
  for (const Tensor& patch : patches) {
    Tape::NodeId input = tape.leaf(patch, /*requires_grad=*/false);
    std::vector<Tape::NodeId> level_tokens;
    for (std::size_t l = 0; l < config.num_levels; ++l) {
      const LevelLeaves& level = result.leaves.levels[l];
      Tape::NodeId x = pyramid_level_input(tape, input, l);
      Tape::NodeId tokens = conv_block(tape, x, level, config);
      Tape::NodeId h = add_positional(tape, tokens, level.pos);
      for (std::size_t y = 0; y < config.num_layers; ++y)
        h = encoder_layer(tape, h, level.layers[y], config);
      level_tokens.push_back(h);
    }
    Tape::NodeId features =
        integrate_levels(tape, level_tokens, config.num_levels);
    auto [probs, l2] = classify_head(tape, features, result.leaves.head_w,
                                     result.leaves.head_b, config.lambda);
    result.item_probs.push_back(probs);
    // The penalty depends only on shared leaves; one node serves the batch.
    if (first) {
      result.l2_penalty = l2;
      first = false;
    }
  }
  result.probs = result.item_probs.size() == 1
                     ? result.item_probs.front()
                     : tape.concat_rows(result.item_probs);
  return result;
}

}  // namespace pyformer
