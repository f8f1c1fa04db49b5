#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pyformer/model.hpp"
#include "pyformer/patches.hpp"

namespace pyformer {

// K x K counts, rows = true class, columns = predicted (both 1..K mapped to
// 0-based indices).
struct ConfusionMatrix {
  std::size_t classes = 0;
  std::vector<std::int64_t> counts;

  explicit ConfusionMatrix(std::size_t k) : classes(k), counts(k * k, 0) {}
  std::int64_t& at(std::size_t true_c, std::size_t pred_c) {
    return counts[true_c * classes + pred_c];
  }
  std::int64_t at(std::size_t true_c, std::size_t pred_c) const {
    return counts[true_c * classes + pred_c];
  }
  std::int64_t total() const;
};

struct Metrics {
  double oa = 0.0;
  double aa = 0.0;
  double kappa = 0.0;
  double f1_macro = 0.0;
  std::vector<double> per_class_recall;
  std::vector<double> per_class_f1;
};

// OA = trace/total; recall = diag/rowsum (0 on empty rows); AA averages
// recall over classes with nonzero rows; kappa = (p_o - p_e)/(1 - p_e) with
// p_e from row/column marginals; F1 = 2PR/(P+R); macro-F1 averages classes
// present in the evaluated set.
Metrics metrics_from_confusion(const ConfusionMatrix& c);

// {oa, aa, kappa, f1_macro, per_class: [{name, recall, f1}], confusion,
// percent: {...}} - fractions at full precision, percentages to 2 decimals.
nlohmann::json metrics_json(const Metrics& m, const ConfusionMatrix& c,
                            std::span<const std::string> class_names);

// Predicted class ids (1..K) per center; argmax ties break to the lowest id.
// Centers must exist in the patch set. Runs chunks of centers on
// independent tapes, in parallel.
std::vector<int> predict_classes(const PyFormerParams& params,
                                 const PyFormerConfig& config,
                                 const PatchSet& patches,
                                 std::span<const Center> centers);

ConfusionMatrix evaluate(const PyFormerParams& params,
                         const PyFormerConfig& config, const PatchSet& patches,
                         std::span<const Center> centers);

}  // namespace pyformer
