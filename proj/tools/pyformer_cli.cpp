// Command-line front end: synthetic data, splits, training, evaluation,
// class maps, ablations, and a gradient self-check. Every command writes
// its resolved configuration next to its outputs, and re-running from that
// file reproduces the outputs byte for byte.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pyformer/checkpoint.hpp"
#include "pyformer/class_map.hpp"
#include "pyformer/grad_check.hpp"
#include "pyformer/hsi_cube.hpp"
#include "pyformer/metrics.hpp"
#include "pyformer/model.hpp"
#include "pyformer/patches.hpp"
#include "pyformer/pca.hpp"
#include "pyformer/split.hpp"
#include "pyformer/synthetic.hpp"
#include "pyformer/train.hpp"

namespace {

using nlohmann::json;
using namespace pyformer;
namespace fs = std::filesystem;

// PYFORMER_LOG=quiet|info|debug (default info).
int log_level() {
  const char* v = std::getenv("PYFORMER_LOG");
  if (!v) return 1;
  const std::string s(v);
  if (s == "quiet") return 0;
  if (s == "debug") return 2;
  return 1;
}
bool log_info() { return log_level() >= 1; }
bool log_debug() { return log_level() >= 2; }

struct RunConfig {
  std::string command;
  std::uint64_t seed = 1;
  std::string out = ".";
  std::string cube, split_path, checkpoint;
  PyFormerConfig model;
  TrainConfig training;
  SyntheticSpec synth;
  SplitRatios ratios;
  bool strict_spatial = false;
  // ablate only
  std::string axis;
  std::vector<double> values;
};

json run_config_json(const RunConfig& c) {
  json j;
  j["command"] = c.command;
  j["seed"] = c.seed;
  j["out"] = c.out;
  if (!c.cube.empty()) j["cube"] = c.cube;
  if (!c.split_path.empty()) j["split"] = c.split_path;
  if (!c.checkpoint.empty()) j["checkpoint"] = c.checkpoint;
  j["model"] = c.model;
  j["train"] = {{"batch_size", c.training.batch_size},
                {"learning_rate", c.training.learning_rate},
                {"decay", c.training.decay},
                {"epochs", c.training.epochs},
                {"beta1", c.training.beta1},
                {"beta2", c.training.beta2},
                {"epsilon", c.training.epsilon}};
  j["synth"] = {{"classes", c.synth.classes},
                {"height", c.synth.height},
                {"width", c.synth.width},
                {"bands", c.synth.bands},
                {"noise_sigma", c.synth.noise_sigma},
                {"bump_amplitude", c.synth.bump_amplitude},
                {"pedestal", c.synth.pedestal},
                {"pedestal_step", c.synth.pedestal_step}};
  j["split_spec"] = {{"ratios", {c.ratios.train, c.ratios.val, c.ratios.test}},
                     {"strict_spatial", c.strict_spatial}};
  if (!c.axis.empty()) j["ablate"] = {{"axis", c.axis}, {"values", c.values}};
  return j;
}

// Every key is optional so hand-written partial files work; flags still
// override whatever the file sets.
void run_config_from_json(const json& j, RunConfig& c) {
  c.seed = j.value("seed", c.seed);
  c.out = j.value("out", c.out);
  c.cube = j.value("cube", c.cube);
  c.split_path = j.value("split", c.split_path);
  c.checkpoint = j.value("checkpoint", c.checkpoint);
  if (j.contains("model")) {
    const json& m = j.at("model");
    c.model.patch_size = m.value("patch_size", c.model.patch_size);
    c.model.reduced_bands = m.value("reduced_bands", c.model.reduced_bands);
    c.model.num_levels = m.value("num_levels", c.model.num_levels);
    c.model.num_layers = m.value("num_layers", c.model.num_layers);
    c.model.num_heads = m.value("num_heads", c.model.num_heads);
    c.model.d_model = m.value("d_model", c.model.d_model);
    c.model.ff_hidden = m.value("ff_hidden", c.model.ff_hidden);
    c.model.lambda = m.value("lambda", c.model.lambda);
    c.model.num_classes = m.value("num_classes", c.model.num_classes);
    c.model.use_layernorm = m.value("use_layernorm", c.model.use_layernorm);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    c.training.batch_size = t.value("batch_size", c.training.batch_size);
    c.training.learning_rate = t.value("learning_rate", c.training.learning_rate);
    c.training.decay = t.value("decay", c.training.decay);
    c.training.epochs = t.value("epochs", c.training.epochs);
    c.training.beta1 = t.value("beta1", c.training.beta1);
    c.training.beta2 = t.value("beta2", c.training.beta2);
    c.training.epsilon = t.value("epsilon", c.training.epsilon);
  }
  if (j.contains("synth")) {
    const json& s = j.at("synth");
    c.synth.classes = s.value("classes", c.synth.classes);
    c.synth.height = s.value("height", c.synth.height);
    c.synth.width = s.value("width", c.synth.width);
    c.synth.bands = s.value("bands", c.synth.bands);
    c.synth.noise_sigma = s.value("noise_sigma", c.synth.noise_sigma);
    c.synth.bump_amplitude = s.value("bump_amplitude", c.synth.bump_amplitude);
    c.synth.pedestal = s.value("pedestal", c.synth.pedestal);
    c.synth.pedestal_step = s.value("pedestal_step", c.synth.pedestal_step);
  }
  if (j.contains("split_spec")) {
    const json& s = j.at("split_spec");
    if (s.contains("ratios")) {
      const auto r = s.at("ratios").get<std::vector<double>>();
      if (r.size() != 3)
        throw std::invalid_argument("config: split_spec.ratios needs 3 entries");
      c.ratios = {r[0], r[1], r[2]};
    }
    c.strict_spatial = s.value("strict_spatial", c.strict_spatial);
  }
  if (j.contains("ablate")) {
    const json& a = j.at("ablate");
    c.axis = a.value("axis", c.axis);
    if (a.contains("values")) c.values = a.at("values").get<std::vector<double>>();
  }
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
  return j;
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_resolved(const RunConfig& cfg) {
  fs::create_directories(cfg.out);
  write_json_file(fs::path(cfg.out) / (cfg.command + "_config.json"),
                  run_config_json(cfg));
}

// All flags any command may carry; each subcommand binds only its own subset.
struct Opt {
  std::optional<std::string> config, out, cube, split_path, checkpoint;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> patch_size, reduced_bands, levels, layers, heads,
      d_model, ff_hidden;
  std::optional<double> lambda;
  bool layernorm = false;
  std::optional<std::size_t> batch_size, epochs;
  std::optional<double> lr, decay;
  std::optional<std::size_t> classes, height, width, bands;
  std::optional<double> noise, bump, pedestal, pedestal_step;
  std::optional<double> train_ratio, val_ratio, test_ratio;
  bool strict_spatial = false;
  std::optional<std::string> axis;
  std::vector<double> values;
  double tolerance = 1e-3;
  double eps = 1e-4;
  std::size_t samples = 3;
  std::size_t gc_batch = 2;
  bool error_json = false;
};

void add_common_flags(CLI::App* sub, Opt& o) {
  sub->add_option("--config", o.config, "JSON config file; flags override it");
  sub->add_option("--out", o.out, "output directory");
  sub->add_option("--seed", o.seed, "seed for every random choice in the run");
  sub->add_flag("--error-json", o.error_json, "emit errors as JSON on stderr");
}

void add_model_flags(CLI::App* sub, Opt& o) {
  sub->add_option("--patch-size", o.patch_size, "patch side length S");
  sub->add_option("--reduced-bands", o.reduced_bands, "spectral dimension after reduction");
  sub->add_option("--levels", o.levels, "pyramid levels");
  sub->add_option("--layers", o.layers, "encoder layers per level");
  sub->add_option("--heads", o.heads, "attention heads");
  sub->add_option("--d-model", o.d_model, "token width");
  sub->add_option("--ff-hidden", o.ff_hidden, "feed-forward hidden width (0 = 4*d_model)");
  sub->add_option("--lambda", o.lambda, "L2 penalty on the classifier head");
  sub->add_flag("--layernorm", o.layernorm, "enable layer normalization");
}

void add_train_flags(CLI::App* sub, Opt& o) {
  sub->add_option("--batch-size", o.batch_size, "mini-batch size");
  sub->add_option("--lr", o.lr, "learning rate");
  sub->add_option("--decay", o.decay, "per-step learning-rate decay");
  sub->add_option("--epochs", o.epochs, "training epochs");
}

void add_split_flags(CLI::App* sub, Opt& o) {
  sub->add_option("--train-ratio", o.train_ratio, "train fraction");
  sub->add_option("--val-ratio", o.val_ratio, "validation fraction");
  sub->add_option("--test-ratio", o.test_ratio, "test fraction");
  sub->add_flag("--strict-spatial", o.strict_spatial,
                "discard val/test centers whose window overlaps a train window");
}

RunConfig make_config(const Opt& o, const std::string& command) {
  RunConfig cfg;
  cfg.command = command;
  if (o.config) run_config_from_json(read_json_file(*o.config), cfg);
  if (o.seed) cfg.seed = *o.seed;
  if (o.out) cfg.out = *o.out;
  if (o.cube) cfg.cube = *o.cube;
  if (o.split_path) cfg.split_path = *o.split_path;
  if (o.checkpoint) cfg.checkpoint = *o.checkpoint;
  if (o.patch_size) cfg.model.patch_size = *o.patch_size;
  if (o.reduced_bands) cfg.model.reduced_bands = *o.reduced_bands;
  if (o.levels) cfg.model.num_levels = *o.levels;
  if (o.layers) cfg.model.num_layers = *o.layers;
  if (o.heads) cfg.model.num_heads = *o.heads;
  if (o.d_model) cfg.model.d_model = *o.d_model;
  if (o.ff_hidden) cfg.model.ff_hidden = *o.ff_hidden;
  if (o.lambda) cfg.model.lambda = *o.lambda;
  if (o.layernorm) cfg.model.use_layernorm = true;
  if (o.batch_size) cfg.training.batch_size = *o.batch_size;
  if (o.lr) cfg.training.learning_rate = *o.lr;
  if (o.decay) cfg.training.decay = *o.decay;
  if (o.epochs) cfg.training.epochs = *o.epochs;
  if (o.classes) cfg.synth.classes = *o.classes;
  if (o.height) cfg.synth.height = *o.height;
  if (o.width) cfg.synth.width = *o.width;
  if (o.bands) cfg.synth.bands = *o.bands;
  if (o.noise) cfg.synth.noise_sigma = *o.noise;
  if (o.bump) cfg.synth.bump_amplitude = *o.bump;
  if (o.pedestal) cfg.synth.pedestal = *o.pedestal;
  if (o.pedestal_step) cfg.synth.pedestal_step = *o.pedestal_step;
  if (o.train_ratio) cfg.ratios.train = *o.train_ratio;
  if (o.val_ratio) cfg.ratios.val = *o.val_ratio;
  if (o.test_ratio) cfg.ratios.test = *o.test_ratio;
  if (o.strict_spatial) cfg.strict_spatial = true;
  if (o.axis) cfg.axis = *o.axis;
  if (!o.values.empty()) cfg.values = o.values;
  return cfg;
}

void require_path(const std::string& value, const char* flag, const char* command) {
  if (value.empty())
    throw std::invalid_argument(std::string(command) + ": " + flag +
                                " is required (flag or config file)");
}

// ---------------------------------------------------------------------------
// Shared pipeline steps

std::size_t resolve_classes(RunConfig& cfg, const HsiCube& cube) {
  const std::size_t k = cube.num_classes();
  if (cfg.model.num_classes == 0) cfg.model.num_classes = k;
  if (cfg.model.num_classes != k)
    throw std::invalid_argument("model expects " +
                                std::to_string(cfg.model.num_classes) +
                                " classes but the cube has " + std::to_string(k));
  return k;
}

PatchSet build_patches(const HsiCube& cube, const PyFormerConfig& model) {
  PcaModel pca = fit_pca(cube, model.reduced_bands);
  if (log_debug())
    std::cout << "pca: " << model.reduced_bands << " components explain "
              << pca.explained_fraction * 100.0 << "% of variance\n";
  return extract_patches(cube, pca, model.patch_size);
}

void check_against_checkpoint(const PyFormerConfig& model, const HsiCube& cube) {
  if (model.num_classes != cube.num_classes())
    throw std::invalid_argument("checkpoint expects " +
                                std::to_string(model.num_classes) +
                                " classes but the cube has " +
                                std::to_string(cube.num_classes()));
  if (model.reduced_bands > cube.bands)
    throw std::invalid_argument("checkpoint reduces to " +
                                std::to_string(model.reduced_bands) +
                                " bands but the cube has only " +
                                std::to_string(cube.bands));
}

std::string percent_line(const Metrics& m) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "OA %.2f%%  AA %.2f%%  kappa %.4f  F1 %.2f%%",
                m.oa * 100.0, m.aa * 100.0, m.kappa, m.f1_macro * 100.0);
  return buf;
}

// ---------------------------------------------------------------------------
// Commands

int run_synth(RunConfig cfg) {
  cfg.synth.seed = cfg.seed;
  HsiCube cube = generate_synthetic(cfg.synth);
  fs::create_directories(cfg.out);
  const fs::path header = fs::path(cfg.out) / "cube.json";
  save_cube(cube, header);
  write_resolved(cfg);
  if (log_info()) {
    std::cout << "cube: " << cube.height << "x" << cube.width << "x"
              << cube.bands << ", " << cube.num_classes() << " classes -> "
              << header.string() << "\n";
    const auto counts = cube.class_counts();
    for (std::size_t k = 0; k < counts.size(); ++k)
      std::cout << "  " << cube.class_names[k] << ": " << counts[k]
                << " pixels\n";
  }
  return 0;
}

int run_split(RunConfig cfg) {
  require_path(cfg.cube, "--cube", "split");
  HsiCube cube = load_cube(cfg.cube);
  resolve_classes(cfg, cube);
  PatchSet patches = build_patches(cube, cfg.model);
  SplitAssignment split =
      disjoint_split(patches, cfg.ratios, cfg.seed, cfg.strict_spatial);
  fs::create_directories(cfg.out);
  const fs::path out = fs::path(cfg.out) / "split.json";
  write_json_file(out, split_to_json(split));
  write_resolved(cfg);
  if (log_info())
    std::cout << "split: " << split.train.size() << " train, "
              << split.val.size() << " val, " << split.test.size()
              << " test (" << split.discarded << " discarded) -> "
              << out.string() << "\n";
  return 0;
}

int run_train(RunConfig cfg) {
  require_path(cfg.cube, "--cube", "train");
  require_path(cfg.split_path, "--split", "train");
  HsiCube cube = load_cube(cfg.cube);
  resolve_classes(cfg, cube);
  cfg.model.validate();
  cfg.training.validate();
  PatchSet patches = build_patches(cube, cfg.model);
  SplitAssignment split = split_from_json(read_json_file(cfg.split_path));

  PyFormerParams params = init_params(cfg.model, cfg.seed);
  cfg.training.seed = cfg.seed;
  if (log_info())
    std::cout << "training " << param_count(cfg.model) << " parameters on "
              << split.train.size() << " patches for " << cfg.training.epochs
              << " epochs\n";
  TrainHistory history = train(params, cfg.model, cfg.training, patches, split);
  if (log_debug())
    for (std::size_t e = 0; e < history.train_loss.size(); ++e)
      std::cout << "  epoch " << (e + 1) << ": loss " << history.train_loss[e]
                << ", train OA " << history.train_oa[e] << ", val OA "
                << history.val_oa[e] << "\n";

  fs::create_directories(cfg.out);
  const fs::path ckpt = fs::path(cfg.out) / "checkpoint.json";
  save_checkpoint(params, cfg.model, ckpt);
  write_json_file(fs::path(cfg.out) / "history.json",
                  json{{"train_loss", history.train_loss},
                       {"train_oa", history.train_oa},
                       {"val_oa", history.val_oa}});
  write_resolved(cfg);
  if (log_info())
    std::cout << "final: loss " << history.train_loss.back() << ", train OA "
              << history.train_oa.back() << ", val OA "
              << history.val_oa.back() << " -> " << ckpt.string() << "\n";
  return 0;
}

int run_eval(RunConfig cfg) {
  require_path(cfg.cube, "--cube", "eval");
  require_path(cfg.split_path, "--split", "eval");
  require_path(cfg.checkpoint, "--checkpoint", "eval");
  auto [params, model] = load_checkpoint(cfg.checkpoint);
  cfg.model = model;
  HsiCube cube = load_cube(cfg.cube);
  check_against_checkpoint(model, cube);
  PatchSet patches = build_patches(cube, model);
  SplitAssignment split = split_from_json(read_json_file(cfg.split_path));

  fs::create_directories(cfg.out);
  for (const char* which : {"val", "test"}) {
    const auto& centers = std::string(which) == "val" ? split.val : split.test;
    const fs::path out =
        fs::path(cfg.out) / ("metrics_" + std::string(which) + ".json");
    if (centers.empty()) {
      write_json_file(out, json{{"empty", true}});
      if (log_info()) std::cout << which << ": (empty set)\n";
      continue;
    }
    ConfusionMatrix confusion = evaluate(params, model, patches, centers);
    Metrics m = metrics_from_confusion(confusion);
    write_json_file(out, metrics_json(m, confusion, cube.class_names));
    if (log_info())
      std::cout << which << " (" << centers.size() << "): " << percent_line(m)
                << "\n";
  }
  write_resolved(cfg);
  return 0;
}

int run_map(RunConfig cfg) {
  require_path(cfg.cube, "--cube", "map");
  require_path(cfg.checkpoint, "--checkpoint", "map");
  auto [params, model] = load_checkpoint(cfg.checkpoint);
  cfg.model = model;
  HsiCube cube = load_cube(cfg.cube);
  check_against_checkpoint(model, cube);
  PatchSet patches = build_patches(cube, model);
  ClassMap map = render_map(params, model, patches, cube.height, cube.width);
  fs::create_directories(cfg.out);
  const fs::path out = fs::path(cfg.out) / "map.ppm";
  write_ppm(out.string(), map);
  write_resolved(cfg);
  if (log_info())
    std::cout << "map: " << map.width << "x" << map.height << " P6, "
              << patches.centers.size() << " predicted pixels -> "
              << out.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// Ablation driver

std::string fmt_value(double v) {
  if (v == std::floor(v) && std::abs(v) < 1e15) {
    std::ostringstream s;
    s << static_cast<long long>(v);
    return s.str();
  }
  std::ostringstream s;
  s << v;
  std::string text = s.str();
  for (char& ch : text)
    if (ch == '.') ch = 'p';  // keep directory names dot-free
  return text;
}

struct AblateRow {
  double value = 0;
  bool skipped = false;
  std::string reason;
  Metrics metrics;
};

// Applies one axis value to a copy of the base config. Throws
// std::invalid_argument when the value is unusable for this base.
RunConfig apply_axis(const RunConfig& base, const std::string& axis, double v) {
  RunConfig cell = base;
  if (axis == "train_ratio") {
    const double r = v / 100.0;  // values are percentages, as in the tables
    if (!(r > 0.0) || !(1.0 - 2.0 * r > 0.0))
      throw std::invalid_argument(
          "train_ratio " + fmt_value(v) +
          "% leaves no room for a positive test fraction");
    cell.ratios = {r, r, 1.0 - 2.0 * r};
  } else if (axis == "patch_size" || axis == "heads" || axis == "layers") {
    if (v < 1.0 || v != std::floor(v))
      throw std::invalid_argument(axis + " value " + fmt_value(v) +
                                  " must be a positive integer");
    const auto n = static_cast<std::size_t>(v);
    if (axis == "patch_size") cell.model.patch_size = n;
    if (axis == "heads") cell.model.num_heads = n;
    if (axis == "layers") cell.model.num_layers = n;
  } else {
    throw std::invalid_argument("unknown ablation axis: " + axis);
  }
  cell.model.validate();
  return cell;
}

int run_ablate(RunConfig cfg) {
  require_path(cfg.cube, "--cube", "ablate");
  if (cfg.axis.empty())
    throw std::invalid_argument("ablate: --axis is required");
  if (cfg.values.empty())
    throw std::invalid_argument("ablate: --values is required");
  HsiCube cube = load_cube(cfg.cube);
  resolve_classes(cfg, cube);

  std::vector<AblateRow> rows;
  for (double v : cfg.values) {
    AblateRow row;
    row.value = v;
    const fs::path cell_dir =
        fs::path(cfg.out) / (cfg.axis + "_" + fmt_value(v));
    try {
      RunConfig cell = apply_axis(cfg, cfg.axis, v);
      cell.out = cell_dir.string();
      PatchSet patches = build_patches(cube, cell.model);
      SplitAssignment split =
          disjoint_split(patches, cell.ratios, cell.seed, cell.strict_spatial);
      fs::create_directories(cell_dir);
      write_json_file(cell_dir / "split.json", split_to_json(split));

      PyFormerParams params = init_params(cell.model, cell.seed);
      cell.training.seed = cell.seed;
      train(params, cell.model, cell.training, patches, split);
      save_checkpoint(params, cell.model, cell_dir / "checkpoint.json");

      ConfusionMatrix test_confusion =
          evaluate(params, cell.model, patches, split.test);
      row.metrics = metrics_from_confusion(test_confusion);
      write_json_file(cell_dir / "metrics_test.json",
                      metrics_json(row.metrics, test_confusion,
                                   cube.class_names));
      if (!split.val.empty()) {
        ConfusionMatrix val_confusion =
            evaluate(params, cell.model, patches, split.val);
        write_json_file(cell_dir / "metrics_val.json",
                        metrics_json(metrics_from_confusion(val_confusion),
                                     val_confusion, cube.class_names));
      }

      // Resolved configs for reproducing this cell by hand.
      RunConfig cell_train = cell;
      cell_train.command = "train";
      cell_train.split_path = (cell_dir / "split.json").string();
      write_json_file(cell_dir / "train_config.json",
                      run_config_json(cell_train));
      RunConfig cell_eval = cell_train;
      cell_eval.command = "eval";
      cell_eval.checkpoint = (cell_dir / "checkpoint.json").string();
      write_json_file(cell_dir / "eval_config.json",
                      run_config_json(cell_eval));
      if (log_info())
        std::cout << cfg.axis << " = " << fmt_value(v) << ": "
                  << percent_line(row.metrics) << "\n";
    } catch (const std::invalid_argument& e) {
      row.skipped = true;
      row.reason = e.what();
      std::cerr << "warning: skipping " << cfg.axis << " = " << fmt_value(v)
                << ": " << row.reason << "\n";
    }
    rows.push_back(std::move(row));
  }

  bool any_ok = false;
  for (const AblateRow& r : rows) any_ok = any_ok || !r.skipped;
  if (!any_ok)
    throw std::invalid_argument("ablate: every axis value was invalid");

  // Best value per metric column; first row wins ties.
  auto best_value = [&](auto metric) {
    double best = -1.0;
    double at = 0.0;
    for (const AblateRow& r : rows)
      if (!r.skipped && metric(r.metrics) > best) {
        best = metric(r.metrics);
        at = r.value;
      }
    return at;
  };
  const double best_oa = best_value([](const Metrics& m) { return m.oa; });
  const double best_aa = best_value([](const Metrics& m) { return m.aa; });
  const double best_kappa = best_value([](const Metrics& m) { return m.kappa; });
  const double best_f1 = best_value([](const Metrics& m) { return m.f1_macro; });

  json report;
  report["axis"] = cfg.axis;
  report["values"] = cfg.values;
  report["rows"] = json::array();
  for (const AblateRow& r : rows) {
    json row{{"value", r.value}};
    if (r.skipped) {
      row["skipped"] = true;
      row["reason"] = r.reason;
    } else {
      row["oa"] = r.metrics.oa;
      row["aa"] = r.metrics.aa;
      row["kappa"] = r.metrics.kappa;
      row["f1"] = r.metrics.f1_macro;
    }
    report["rows"].push_back(std::move(row));
  }
  report["best"] = {{"oa", best_oa},
                    {"aa", best_aa},
                    {"kappa", best_kappa},
                    {"f1", best_f1}};

  // Aligned text table; '*' flags the best entry in each column.
  std::ostringstream text;
  char line[160];
  std::snprintf(line, sizeof line, "%-14s %12s %12s %12s %12s\n",
                cfg.axis.c_str(), "OA%", "AA%", "kappa", "F1%");
  text << line;
  for (const AblateRow& r : rows) {
    if (r.skipped) {
      std::snprintf(line, sizeof line, "%-14s skipped: %s\n",
                    fmt_value(r.value).c_str(), r.reason.c_str());
      text << line;
      continue;
    }
    auto cell = [&](double shown, double value, double best) {
      char c[32];
      std::snprintf(c, sizeof c, "%.2f%s", shown,
                    value == best ? "*" : " ");
      return std::string(c);
    };
    std::snprintf(line, sizeof line, "%-14s %12s %12s %12s %12s\n",
                  fmt_value(r.value).c_str(),
                  cell(r.metrics.oa * 100.0, r.value, best_oa).c_str(),
                  cell(r.metrics.aa * 100.0, r.value, best_aa).c_str(),
                  cell(r.metrics.kappa, r.value, best_kappa).c_str(),
                  cell(r.metrics.f1_macro * 100.0, r.value, best_f1).c_str());
    text << line;
  }

  fs::create_directories(cfg.out);
  write_json_file(fs::path(cfg.out) / "ablate_report.json", report);
  write_text_file(fs::path(cfg.out) / "ablate_report.txt", text.str());
  write_resolved(cfg);
  if (log_info()) std::cout << text.str();
  return 0;
}

// ---------------------------------------------------------------------------
// Gradient self-check

int run_gradcheck(RunConfig cfg, double tolerance, double eps,
                  std::size_t samples, std::size_t batch) {
  // Tiny fixed model: cheap enough to difference every sampled coordinate.
  PyFormerConfig tiny;
  tiny.patch_size = 4;
  tiny.reduced_bands = 4;
  tiny.d_model = 8;
  tiny.num_heads = 2;
  tiny.num_layers = 1;
  tiny.num_levels = 1;
  tiny.num_classes = 3;
  cfg.model = tiny;

  const auto report = model_grad_check(tiny, batch, eps, samples, cfg.seed);
  bool all_pass = true;
  json groups = json::array();
  for (const GroupGradCheck& g : report) {
    const bool pass = g.max_rel_err <= tolerance;
    all_pass = all_pass && pass;
    groups.push_back({{"name", g.name},
                      {"coords", g.coords},
                      {"max_rel_err", g.max_rel_err},
                      {"pass", pass}});
    if (log_info()) {
      char line[160];
      std::snprintf(line, sizeof line, "%-24s %4zu coords  max rel err %.3e  %s\n",
                    g.name.c_str(), g.coords, g.max_rel_err,
                    pass ? "pass" : "FAIL");
      std::cout << line;
    }
  }
  fs::create_directories(cfg.out);
  write_json_file(fs::path(cfg.out) / "gradcheck_report.json",
                  json{{"tolerance", tolerance},
                       {"eps", eps},
                       {"batch", batch},
                       {"groups", groups}});
  write_resolved(cfg);
  if (!all_pass) {
    auto worst = report;
    std::sort(worst.begin(), worst.end(),
              [](const GroupGradCheck& a, const GroupGradCheck& b) {
                return a.max_rel_err > b.max_rel_err;
              });
    std::cerr << "gradient check failed; worst offenders:\n";
    for (std::size_t i = 0; i < worst.size() && i < 5; ++i)
      std::cerr << "  " << worst[i].name << ": " << worst[i].max_rel_err
                << "\n";
    return 1;
  }
  if (log_info())
    std::cout << "all " << report.size() << " parameter groups within "
              << tolerance << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

void report_error(bool as_json, const std::string& message, int code) {
  if (as_json)
    std::cerr << json{{"error", message}, {"exit_code", code}}.dump() << "\n";
  else
    std::cerr << "error: " << message << "\n";
}

template <class Body>
int guarded(bool error_json, Body&& body) {
  try {
    return body();
  } catch (const std::logic_error& e) {  // validation: bad inputs or state
    report_error(error_json, e.what(), 1);
    return 1;
  } catch (const std::exception& e) {  // runtime: I/O and friends
    report_error(error_json, e.what(), 2);
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "pyramid hierarchical transformer for hyperspectral image "
      "classification"};
  app.require_subcommand(1);
  Opt o;

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic labeled cube");
  add_common_flags(synth, o);
  synth->add_option("--classes", o.classes, "number of classes (>= 2)");
  synth->add_option("--height", o.height, "scene rows");
  synth->add_option("--width", o.width, "scene columns");
  synth->add_option("--bands", o.bands, "spectral bands");
  synth->add_option("--noise", o.noise, "noise sigma (0 = noiseless)");
  synth->add_option("--bump-amplitude", o.bump, "signature bump height");
  synth->add_option("--pedestal", o.pedestal, "signature base level");
  synth->add_option("--pedestal-step", o.pedestal_step, "per-class base offset");

  CLI::App* split = app.add_subcommand("split", "stratified disjoint split of patch centers");
  add_common_flags(split, o);
  split->add_option("--cube", o.cube, "cube header JSON");
  split->add_option("--patch-size", o.patch_size, "patch side length S");
  split->add_option("--reduced-bands", o.reduced_bands, "spectral dimension after reduction");
  add_split_flags(split, o);

  CLI::App* trn = app.add_subcommand("train", "train a model on a cube and split");
  add_common_flags(trn, o);
  trn->add_option("--cube", o.cube, "cube header JSON");
  trn->add_option("--split", o.split_path, "split JSON");
  add_model_flags(trn, o);
  add_train_flags(trn, o);

  CLI::App* evl = app.add_subcommand("eval", "evaluate a checkpoint on val and test sets");
  add_common_flags(evl, o);
  evl->add_option("--cube", o.cube, "cube header JSON");
  evl->add_option("--split", o.split_path, "split JSON");
  evl->add_option("--checkpoint", o.checkpoint, "checkpoint manifest JSON");

  CLI::App* map = app.add_subcommand("map", "render the predicted class map as PPM");
  add_common_flags(map, o);
  map->add_option("--cube", o.cube, "cube header JSON");
  map->add_option("--checkpoint", o.checkpoint, "checkpoint manifest JSON");

  CLI::App* abl = app.add_subcommand("ablate", "train and evaluate across one axis");
  add_common_flags(abl, o);
  abl->add_option("--cube", o.cube, "cube header JSON");
  abl->add_option("--axis", o.axis, "one of train_ratio, patch_size, heads, layers");
  abl->add_option("--values", o.values, "axis values (train_ratio in percent)");
  add_model_flags(abl, o);
  add_train_flags(abl, o);
  add_split_flags(abl, o);

  CLI::App* gc = app.add_subcommand("gradcheck", "finite-difference check of every parameter group");
  add_common_flags(gc, o);
  gc->add_option("--tolerance", o.tolerance, "max relative error allowed");
  gc->add_option("--eps", o.eps, "finite-difference step");
  gc->add_option("--samples", o.samples, "coordinates per tensor (0 = all)");
  gc->add_option("--batch", o.gc_batch, "patches in the probe batch");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // bad flags are validation errors
  }

  if (synth->parsed())
    return guarded(o.error_json, [&] { return run_synth(make_config(o, "synth")); });
  if (split->parsed())
    return guarded(o.error_json, [&] { return run_split(make_config(o, "split")); });
  if (trn->parsed())
    return guarded(o.error_json, [&] { return run_train(make_config(o, "train")); });
  if (evl->parsed())
    return guarded(o.error_json, [&] { return run_eval(make_config(o, "eval")); });
  if (map->parsed())
    return guarded(o.error_json, [&] { return run_map(make_config(o, "map")); });
  if (abl->parsed())
    return guarded(o.error_json, [&] { return run_ablate(make_config(o, "ablate")); });
  if (gc->parsed())
    return guarded(o.error_json, [&] {
      // Default probe seed: one verified to keep every relu pre-activation
      // farther than the differencing step from zero. A seed that lands a
      // unit within eps of the kink makes the central difference straddle
      // it and report a legitimate -- but misleading -- disagreement.
      if (!o.seed && !o.config) o.seed = 3;
      return run_gradcheck(make_config(o, "gradcheck"), o.tolerance, o.eps,
                           o.samples, o.gc_batch);
    });
  return 1;
}
