#include "pyformer/split.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <stdexcept>

#include "pyformer/rng.hpp"

namespace pyformer {

namespace {

// Half-open pixel interval [lo, lo + len) overlap on both axes.
bool windows_overlap(Center a, Center b, std::size_t patch_size) {
  const std::size_t c0 = center_offset(patch_size);
  const std::size_t ar = a.row - c0, ac = a.col - c0;
  const std::size_t br = b.row - c0, bc = b.col - c0;
  const bool rows = ar < br + patch_size && br < ar + patch_size;
  const bool cols = ac < bc + patch_size && bc < ac + patch_size;
  return rows && cols;
}

}  // namespace

SplitAssignment disjoint_split(const PatchSet& patches, SplitRatios ratios,
                               std::uint64_t seed, bool strict_spatial) {
  if (ratios.train <= 0.0 || ratios.val <= 0.0 || ratios.test <= 0.0)
    throw std::invalid_argument("disjoint_split: ratios must be positive");
  if (std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9)
    throw std::invalid_argument("disjoint_split: ratios must sum to 1");
  if (patches.centers.empty())
    throw std::invalid_argument("disjoint_split: no centers to split");

  std::map<int, std::vector<Center>> by_class;
  for (std::size_t i = 0; i < patches.centers.size(); ++i)
    by_class[patches.center_labels[i]].push_back(patches.centers[i]);

  SplitAssignment split;
  split.ratios = ratios;
  split.seed = seed;
  split.strict_spatial = strict_spatial;

  Rng rng(seed);
  for (auto& [label, centers] : by_class) {
    rng.shuffle(centers);
    const std::size_t n = centers.size();
    if (n < 3) {
      // Too few centers for three parts: all to train.
      std::cerr << "warning: class " << label << " has only " << n
                << " center(s); assigning all to train\n";
      split.train.insert(split.train.end(), centers.begin(), centers.end());
      continue;
    }
    const std::size_t n_train =
        static_cast<std::size_t>(std::floor(ratios.train * static_cast<double>(n)));
    const std::size_t n_val =
        static_cast<std::size_t>(std::floor(ratios.val * static_cast<double>(n)));
    for (std::size_t i = 0; i < n; ++i) {
      if (i < n_train)
        split.train.push_back(centers[i]);
      else if (i < n_train + n_val)
        split.val.push_back(centers[i]);
      else
        split.test.push_back(centers[i]);
    }
  }

  if (strict_spatial) {
    auto prune = [&](std::vector<Center>& set) {
      std::vector<Center> kept;
      for (Center c : set) {
        bool overlaps = false;
        for (Center t : split.train)
          if (windows_overlap(c, t, patches.patch_size)) {
            overlaps = true;
            break;
          }
        if (overlaps)
          ++split.discarded;
        else
          kept.push_back(c);
      }
      set = std::move(kept);
    };
    prune(split.val);
    prune(split.test);
  }

  // Stable row-major order for reproducible serialization.
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

nlohmann::json split_to_json(const SplitAssignment& split) {
  auto centers_json = [](const std::vector<Center>& set) {
    nlohmann::json arr = nlohmann::json::array();
    for (Center c : set) arr.push_back({c.row, c.col});
    return arr;
  };
  nlohmann::json j;
  j["seed"] = split.seed;
  j["ratios"] = {split.ratios.train, split.ratios.val, split.ratios.test};
  j["strict_spatial"] = split.strict_spatial;
  j["train"] = centers_json(split.train);
  j["val"] = centers_json(split.val);
  j["test"] = centers_json(split.test);
  j["discarded"] = split.discarded;
  return j;
}

SplitAssignment split_from_json(const nlohmann::json& j) {
  auto centers_from = [](const nlohmann::json& arr) {
    std::vector<Center> set;
    for (const auto& e : arr) {
      if (!e.is_array() || e.size() != 2)
        throw std::invalid_argument("split JSON: centers must be [row, col] pairs");
      set.push_back(Center{e[0].get<std::size_t>(), e[1].get<std::size_t>()});
    }
    return set;
  };
  SplitAssignment split;
  const auto& ratios = j.at("ratios");
  if (!ratios.is_array() || ratios.size() != 3)
    throw std::invalid_argument("split JSON: ratios must be [train, val, test]");
  split.ratios.train = ratios[0].get<double>();
  split.ratios.val = ratios[1].get<double>();
  split.ratios.test = ratios[2].get<double>();
  split.seed = j.at("seed").get<std::uint64_t>();
  split.strict_spatial = j.at("strict_spatial").get<bool>();
  split.train = centers_from(j.at("train"));
  split.val = centers_from(j.at("val"));
  split.test = centers_from(j.at("test"));
  split.discarded = j.at("discarded").get<std::size_t>();
  return split;
}

}  // namespace pyformer
