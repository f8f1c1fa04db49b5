#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <vector>

#include <json.hpp>

#include "pyformer/checkpoint.hpp"
#include "pyformer/model.hpp"
#include "pyformer/rng.hpp"
#include "pyformer/tape.hpp"

using namespace pyformer;
namespace fs = std::filesystem;

namespace {

PyFormerConfig tiny_config() {
  PyFormerConfig c;
  c.patch_size = 4;
  c.reduced_bands = 4;
  c.num_levels = 2;
  c.num_layers = 1;
  c.num_heads = 2;
  c.d_model = 8;
  c.num_classes = 3;
  return c;
}

bool same_tensor(const Tensor& a, const Tensor& b) {
  if (!(a.shape() == b.shape())) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

Tensor random_tensor(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal();
  return t;
}

fs::path scratch_dir() {
  const fs::path p = fs::temp_directory_path() / "pyformer_model_tests";
  fs::create_directories(p);
  return p;
}

std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("config validation catches each invariant") {
  PyFormerConfig c = tiny_config();
  CHECK_NOTHROW(c.validate());

  c.num_classes = 0;  // unset
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = tiny_config();
  c.d_model = 9;  // odd
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = tiny_config();
  c.d_model = 8;
  c.num_heads = 3;  // 8 % 3 != 0
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = tiny_config();
  c.patch_size = 5;  // not divisible by 2^(levels-1)
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = tiny_config();
  c.reduced_bands = 6;
  c.num_levels = 3;  // 6 % 4 != 0
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = tiny_config();
  c.lambda = -0.1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = tiny_config();
  c.num_layers = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("config derived dimensions") {
  PyFormerConfig c = tiny_config();
  CHECK(c.ff_dim() == 32);  // default 4 * d_model
  c.ff_hidden = 10;
  CHECK(c.ff_dim() == 10);
  CHECK(c.conv1_channels() == 4);
  CHECK(c.conv2_channels() == 8);
  CHECK(c.level_patch(0) == 4);
  CHECK(c.level_patch(1) == 2);
  CHECK(c.level_bands(1) == 2);
  CHECK(c.concat_dim() == 4 * 8 + 2 * 8);
}

TEST_CASE("config json round trip") {
  PyFormerConfig c = tiny_config();
  c.ff_hidden = 24;
  c.lambda = 0.125;
  c.use_layernorm = true;
  nlohmann::json j = c;
  PyFormerConfig back = j.get<PyFormerConfig>();
  CHECK(back.patch_size == c.patch_size);
  CHECK(back.reduced_bands == c.reduced_bands);
  CHECK(back.num_levels == c.num_levels);
  CHECK(back.num_layers == c.num_layers);
  CHECK(back.num_heads == c.num_heads);
  CHECK(back.d_model == c.d_model);
  CHECK(back.ff_hidden == c.ff_hidden);
  CHECK(back.lambda == c.lambda);
  CHECK(back.num_classes == c.num_classes);
  CHECK(back.use_layernorm == c.use_layernorm);
}

TEST_CASE("parameter count matches the allocated tensors") {
  for (PyFormerConfig c : {tiny_config(), [] {
         PyFormerConfig d;
         d.num_classes = 3;  // library defaults otherwise
         return d;
       }()}) {
    PyFormerParams p = allocate_params(c);
    std::size_t total = 0;
    for (const auto& [name, t] : named_params(p)) total += t->size();
    CHECK(param_count(c) == total);
  }
  PyFormerConfig d;
  d.num_classes = 3;
  CHECK(param_count(d) == 216131);  // frozen regression for the defaults
}

TEST_CASE("canonical parameter order is level-major with the head last") {
  PyFormerConfig c = tiny_config();  // 2 levels, 1 layer each
  PyFormerParams p = allocate_params(c);
  auto named = named_params(p);
  std::vector<std::string> names;
  for (const auto& [name, t] : named) names.push_back(name);
  const std::vector<std::string> expected = {
      "level0/conv1_w", "level0/conv1_b", "level0/conv2_w", "level0/conv2_b",
      "level0/res_w",   "level0/res_b",   "level0/pos",
      "level0/layer0/wq", "level0/layer0/bq", "level0/layer0/wk",
      "level0/layer0/bk", "level0/layer0/wv", "level0/layer0/bv",
      "level0/layer0/wo", "level0/layer0/bo", "level0/layer0/ff1_w",
      "level0/layer0/ff1_b", "level0/layer0/ff2_w", "level0/layer0/ff2_b",
      "level1/conv1_w", "level1/conv1_b", "level1/conv2_w", "level1/conv2_b",
      "level1/res_w",   "level1/res_b",   "level1/pos",
      "level1/layer0/wq", "level1/layer0/bq", "level1/layer0/wk",
      "level1/layer0/bk", "level1/layer0/wv", "level1/layer0/bv",
      "level1/layer0/wo", "level1/layer0/bo", "level1/layer0/ff1_w",
      "level1/layer0/ff1_b", "level1/layer0/ff2_w", "level1/layer0/ff2_b",
      "head/w", "head/b"};
  CHECK(names == expected);
}

TEST_CASE("init is seed-deterministic with zero biases") {
  PyFormerConfig c = tiny_config();
  PyFormerParams a = init_params(c, 11);
  PyFormerParams b = init_params(c, 11);
  PyFormerParams other = init_params(c, 12);
  auto na = named_params(a);
  auto nb = named_params(b);
  auto no = named_params(other);
  bool any_differs = false;
  for (std::size_t i = 0; i < na.size(); ++i) {
    CHECK(same_tensor(*na[i].second, *nb[i].second));
    if (!same_tensor(*na[i].second, *no[i].second)) any_differs = true;
    if (na[i].first.ends_with("_b") || na[i].first.ends_with("/b") ||
        na[i].first.ends_with("bq") || na[i].first.ends_with("bk") ||
        na[i].first.ends_with("bv") || na[i].first.ends_with("bo")) {
      for (std::size_t k = 0; k < na[i].second->size(); ++k)
        CHECK((*na[i].second)[k] == 0.0);
    }
  }
  CHECK(any_differs);
  // weights actually initialized (not left zero)
  double head_norm = 0.0;
  for (std::size_t k = 0; k < a.head_w.size(); ++k)
    head_norm += a.head_w[k] * a.head_w[k];
  CHECK(head_norm > 0.0);
}

TEST_CASE("pyramid level inputs downsample by mean pooling") {
  Tape tape;
  Tensor patch(Shape{{4, 4, 4}});
  std::iota(patch.data(), patch.data() + patch.size(), 0.0);
  auto in = tape.leaf(patch);
  CHECK(pyramid_level_input(tape, in, 0) == in);  // level 0 is the input node

  auto l1 = pyramid_level_input(tape, in, 1);
  CHECK(tape.value(l1).shape() == Shape{{2, 2, 2}});
  // first output = mean over the (0..1)^3 corner block of the iota fill
  const double expect = (0 + 1 + 4 + 5 + 16 + 17 + 20 + 21) / 8.0;
  CHECK(tape.value(l1)[0] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("conv block emits one token per reduced band") {
  PyFormerConfig c = tiny_config();
  PyFormerParams p = init_params(c, 3);
  Rng rng(4);
  for (std::size_t level = 0; level < c.num_levels; ++level) {
    Tape tape;
    auto leaves = register_params(tape, p, false);
    auto patch = tape.leaf(random_tensor(Shape{{4, 4, 4}}, rng));
    auto lin = pyramid_level_input(tape, patch, level);
    auto tokens = conv_block(tape, lin, leaves.levels[level], c);
    CHECK(tape.value(tokens).shape() ==
          Shape{{c.level_bands(level), c.d_model}});
    CHECK(tape.value(tokens).all_finite());
  }
}

TEST_CASE("zeroed final feed-forward projection makes the encoder an identity") {
  for (bool layernorm : {false, true}) {
    PyFormerConfig c = tiny_config();
    c.use_layernorm = layernorm;
    PyFormerParams p = init_params(c, 5);
    for (auto& level : p.levels)
      for (auto& layer : level.layers) {
        layer.ff2_w = Tensor(layer.ff2_w.shape());
        layer.ff2_b = Tensor(layer.ff2_b.shape());
      }
    Tape tape;
    auto leaves = register_params(tape, p, false);
    Rng rng(6);
    auto h = tape.leaf(random_tensor(Shape{{4, 8}}, rng));
    auto out = encoder_layer(tape, h, leaves.levels[0].layers[0], c);
    CHECK(same_tensor(tape.value(out), tape.value(h)));  // exact, not approx
  }
}

TEST_CASE("attention and encoder layers are permutation-equivariant") {
  PyFormerConfig c = tiny_config();
  PyFormerParams p = init_params(c, 7);
  Rng rng(8);
  const std::size_t rows = 6;
  Tensor h = random_tensor(Shape{{rows, c.d_model}}, rng);
  const std::vector<std::size_t> perm = {3, 0, 5, 1, 4, 2};
  Tensor hp(h.shape());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < c.d_model; ++j)
      hp[r * c.d_model + j] = h[perm[r] * c.d_model + j];

  Tape tape;
  auto leaves = register_params(tape, p, false);
  const auto& layer = leaves.levels[0].layers[0];
  auto base = tape.leaf(h);
  auto permuted = tape.leaf(hp);

  auto attn_base = attention(tape, base, layer, c);
  auto attn_perm = attention(tape, permuted, layer, c);
  auto enc_base = encoder_layer(tape, base, layer, c);
  auto enc_perm = encoder_layer(tape, permuted, layer, c);

  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < c.d_model; ++j) {
      const std::size_t src = perm[r] * c.d_model + j;
      const std::size_t dst = r * c.d_model + j;
      CHECK(tape.value(attn_perm)[dst] ==
            doctest::Approx(tape.value(attn_base)[src]).scale(1.0).epsilon(1e-9));
      CHECK(tape.value(enc_perm)[dst] ==
            doctest::Approx(tape.value(enc_base)[src]).scale(1.0).epsilon(1e-9));
    }
}

TEST_CASE("attention can expose per-head weight rows") {
  PyFormerConfig c = tiny_config();
  PyFormerParams p = init_params(c, 9);
  Tape tape;
  auto leaves = register_params(tape, p, false);
  Rng rng(10);
  auto h = tape.leaf(random_tensor(Shape{{5, c.d_model}}, rng));
  std::vector<Tape::NodeId> heads;
  attention(tape, h, leaves.levels[0].layers[0], c, &heads);
  CHECK(heads.size() == c.num_heads);
  for (auto id : heads) {
    const Tensor& w = tape.value(id);
    CHECK(w.shape() == Shape{{5, 5}});
    for (std::size_t r = 0; r < 5; ++r) {
      double row = 0.0;
      for (std::size_t k = 0; k < 5; ++k) row += w[r * 5 + k];
      CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("classification head yields a probability row and an exact penalty") {
  PyFormerConfig c = tiny_config();
  c.lambda = 0.01;
  PyFormerParams p = init_params(c, 13);
  Tape tape;
  auto leaves = register_params(tape, p, false);
  Rng rng(14);
  auto features = tape.leaf(random_tensor(Shape{{c.concat_dim()}}, rng));
  auto [probs, l2] = classify_head(tape, features, leaves.head_w, leaves.head_b,
                                   c.lambda);
  CHECK(tape.value(probs).shape() == Shape{{1, c.num_classes}});
  double row = 0.0;
  for (std::size_t k = 0; k < c.num_classes; ++k) {
    row += tape.value(probs)[k];
    CHECK(tape.value(probs)[k] > 0.0);
  }
  CHECK(row == doctest::Approx(1.0).epsilon(1e-12));

  double ssq = 0.0;
  for (std::size_t i = 0; i < p.head_w.size(); ++i)
    ssq += p.head_w[i] * p.head_w[i];
  CHECK(tape.value(l2)[0] == 0.01 * ssq);  // same expression, bitwise
}

TEST_CASE("forward produces a probability row per patch") {
  PyFormerConfig c = tiny_config();
  PyFormerParams p = init_params(c, 15);
  Rng rng(16);
  std::vector<Tensor> patches;
  for (int i = 0; i < 3; ++i)
    patches.push_back(random_tensor(Shape{{4, 4, 4}}, rng));

  Tape tape;
  ForwardResult fwd = forward(tape, p, c, patches, false);
  CHECK(fwd.item_probs.size() == 3);
  CHECK(tape.value(fwd.probs).shape() == Shape{{3, c.num_classes}});
  CHECK_FALSE(tape.requires_grad(fwd.probs));
  for (std::size_t r = 0; r < 3; ++r) {
    double row = 0.0;
    for (std::size_t k = 0; k < c.num_classes; ++k)
      row += tape.value(fwd.probs)[r * c.num_classes + k];
    CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(tape.value(fwd.l2_penalty)[0] > 0.0);

  Tape gtape;
  ForwardResult gfwd = forward(gtape, p, c, patches, true);
  CHECK(gtape.requires_grad(gfwd.probs));

  Tape bad;
  CHECK_THROWS_AS(forward(bad, p, c, {}, false), std::invalid_argument);
  std::vector<Tensor> wrong;
  wrong.push_back(random_tensor(Shape{{3, 4, 4}}, rng));
  CHECK_THROWS_AS(forward(bad, p, c, wrong, false), std::invalid_argument);
}

TEST_CASE("checkpoint save/load round trip is bitwise") {
  PyFormerConfig c = tiny_config();
  c.use_layernorm = true;
  PyFormerParams p = init_params(c, 17);
  const fs::path dir = scratch_dir();
  save_checkpoint(p, c, dir / "ckpt.json");

  auto [loaded, lc] = load_checkpoint(dir / "ckpt.json");
  CHECK(lc.patch_size == c.patch_size);
  CHECK(lc.num_classes == c.num_classes);
  CHECK(lc.use_layernorm == c.use_layernorm);
  auto na = named_params(p);
  auto nb = named_params(loaded);
  REQUIRE(na.size() == nb.size());
  for (std::size_t i = 0; i < na.size(); ++i)
    CHECK(same_tensor(*na[i].second, *nb[i].second));

  const fs::path dir2 = dir / "copy";
  fs::create_directories(dir2);
  save_checkpoint(loaded, lc, dir2 / "ckpt.json");
  CHECK(slurp(dir / "ckpt.json") == slurp(dir2 / "ckpt.json"));
  CHECK(slurp(dir / "ckpt_params.bin") == slurp(dir2 / "ckpt_params.bin"));
}

TEST_CASE("corrupted checkpoints are rejected") {
  PyFormerConfig c = tiny_config();
  PyFormerParams p = init_params(c, 18);
  const fs::path dir = scratch_dir();
  save_checkpoint(p, c, dir / "bad.json");

  nlohmann::json manifest;
  {
    std::ifstream in(dir / "bad.json");
    in >> manifest;
  }
  auto write_manifest = [&](const nlohmann::json& m) {
    std::ofstream out(dir / "bad.json", std::ios::trunc);
    out << m.dump(2) << "\n";
  };

  nlohmann::json tampered = manifest;
  tampered["magic"] = "NOTPYF";
  write_manifest(tampered);
  CHECK_THROWS(load_checkpoint(dir / "bad.json"));

  tampered = manifest;
  tampered["tensors"][0]["shape"] = {1, 2, 3};
  write_manifest(tampered);
  CHECK_THROWS(load_checkpoint(dir / "bad.json"));

  tampered = manifest;
  tampered["tensors"][0]["name"] = "level9/zzz";
  write_manifest(tampered);
  CHECK_THROWS(load_checkpoint(dir / "bad.json"));

  write_manifest(manifest);
  {
    // truncate the blob so the last tensor runs off the end
    auto bytes = slurp(dir / "bad_params.bin");
    std::ofstream out(dir / "bad_params.bin", std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 16));
  }
  CHECK_THROWS(load_checkpoint(dir / "bad.json"));
  CHECK_THROWS(load_checkpoint(dir / "missing.json"));
}
