#include "pyformer/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace pyformer {

std::int64_t ConfusionMatrix::total() const {
  std::int64_t n = 0;
  for (std::int64_t v : counts) n += v;
  return n;
}

Metrics metrics_from_confusion(const ConfusionMatrix& c) {
  const std::size_t k = c.classes;
  const double total = static_cast<double>(c.total());
  if (total <= 0.0)
    throw std::invalid_argument("metrics_from_confusion: empty confusion matrix");

  std::vector<double> row_sum(k, 0.0), col_sum(k, 0.0);
  double trace = 0.0;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      const double v = static_cast<double>(c.at(i, j));
      row_sum[i] += v;
      col_sum[j] += v;
      if (i == j) trace += v;
    }

  Metrics m;
  m.oa = trace / total;

  m.per_class_recall.assign(k, 0.0);
  m.per_class_f1.assign(k, 0.0);
  double recall_sum = 0.0, f1_sum = 0.0;
  std::size_t present = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double diag = static_cast<double>(c.at(i, i));
    if (row_sum[i] > 0.0) {
      m.per_class_recall[i] = diag / row_sum[i];
      ++present;
      recall_sum += m.per_class_recall[i];
    }
    const double precision = col_sum[i] > 0.0 ? diag / col_sum[i] : 0.0;
    const double recall = m.per_class_recall[i];
    m.per_class_f1[i] = precision + recall > 0.0
                            ? 2.0 * precision * recall / (precision + recall)
                            : 0.0;
    if (row_sum[i] > 0.0) f1_sum += m.per_class_f1[i];
  }
  // AA and macro-F1 average only over classes present in the evaluated set.
  m.aa = present > 0 ? recall_sum / static_cast<double>(present) : 0.0;
  m.f1_macro = present > 0 ? f1_sum / static_cast<double>(present) : 0.0;

  double p_e = 0.0;
  for (std::size_t i = 0; i < k; ++i) p_e += row_sum[i] * col_sum[i];
  p_e /= total * total;
  m.kappa = p_e < 1.0 ? (m.oa - p_e) / (1.0 - p_e) : 1.0;
  return m;
}

namespace {

std::string percent2(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * fraction);
  return buf;
}

}  // namespace

nlohmann::json metrics_json(const Metrics& m, const ConfusionMatrix& c,
                            std::span<const std::string> class_names) {
  nlohmann::json j;
  j["oa"] = m.oa;
  j["aa"] = m.aa;
  j["kappa"] = m.kappa;
  j["f1_macro"] = m.f1_macro;
  j["percent"] = {{"oa", percent2(m.oa)},
                  {"aa", percent2(m.aa)},
                  {"kappa", percent2(m.kappa)},
                  {"f1_macro", percent2(m.f1_macro)}};
  nlohmann::json per_class = nlohmann::json::array();
  for (std::size_t i = 0; i < c.classes; ++i) {
    const std::string name = i < class_names.size()
                                 ? class_names[i]
                                 : "class-" + std::to_string(i + 1);
    per_class.push_back({{"name", name},
                         {"recall", m.per_class_recall[i]},
                         {"f1", m.per_class_f1[i]}});
  }
  j["per_class"] = per_class;
  nlohmann::json confusion = nlohmann::json::array();
  for (std::size_t i = 0; i < c.classes; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t jj = 0; jj < c.classes; ++jj) row.push_back(c.at(i, jj));
    confusion.push_back(row);
  }
  j["confusion"] = confusion;
  return j;
}

std::vector<int> predict_classes(const PyFormerParams& params,
                                 const PyFormerConfig& config,
                                 const PatchSet& patches,
                                 std::span<const Center> centers) {
  if (centers.empty())
    throw std::invalid_argument("predict_classes: no centers");
  std::vector<std::size_t> indices;
  indices.reserve(centers.size());
  for (const Center& c : centers) {
    const auto idx = patches.index_of(c);
    if (!idx)
      throw std::invalid_argument("predict_classes: center (" +
                                  std::to_string(c.row) + ", " +
                                  std::to_string(c.col) +
                                  ") not in the patch set");
    indices.push_back(*idx);
  }

  std::vector<int> predictions(centers.size(), 0);
  // Fixed-size chunks, each on its own tape; items are independent, so any
  // execution order gives the same predictions.
  constexpr std::size_t kChunk = 32;
  const std::int64_t n_chunks =
      static_cast<std::int64_t>((centers.size() + kChunk - 1) / kChunk);
#pragma omp parallel for schedule(static)
  for (std::int64_t ci = 0; ci < n_chunks; ++ci) {
    const std::size_t begin = static_cast<std::size_t>(ci) * kChunk;
    const std::size_t end = std::min(begin + kChunk, centers.size());
    std::vector<Tensor> chunk;
    chunk.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i)
      chunk.push_back(patches.patches[indices[i]]);
    Tape tape;
    ForwardResult fwd =
        forward(tape, params, config, chunk, /*requires_grad=*/false);
    for (std::size_t i = begin; i < end; ++i) {
      const Tensor& row = tape.value(fwd.item_probs[i - begin]);
      std::size_t best = 0;
      for (std::size_t k = 1; k < config.num_classes; ++k)
        if (row[k] > row[best]) best = k;  // strict >: ties keep lowest id
      predictions[i] = static_cast<int>(best + 1);
    }
  }
  return predictions;
}

ConfusionMatrix evaluate(const PyFormerParams& params,
                         const PyFormerConfig& config, const PatchSet& patches,
                         std::span<const Center> centers) {
  const std::vector<int> predicted =
      predict_classes(params, config, patches, centers);
  ConfusionMatrix c(config.num_classes);
  for (std::size_t i = 0; i < centers.size(); ++i) {
    const auto idx = patches.index_of(centers[i]);
    const int true_c = patches.center_labels[*idx];
    c.at(static_cast<std::size_t>(true_c - 1),
         static_cast<std::size_t>(predicted[i] - 1)) += 1;
  }
  return c;
}

}  // namespace pyformer
