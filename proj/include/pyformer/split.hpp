#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "pyformer/patches.hpp"

namespace pyformer {

struct SplitRatios {
  double train = 0.05;
  double val = 0.05;
  double test = 0.90;
};

struct SplitAssignment {
  std::vector<Center> train, val, test;
  SplitRatios ratios;
  std::uint64_t seed = 0;
  bool strict_spatial = false;
  std::size_t discarded = 0;  // strict_spatial removals from val/test
};

// Stratified disjoint split. Per class (ascending id), centers are shuffled
// by a seeded RNG and cut at floor(train*n) / floor(val*n) / remainder. A
// class with fewer than three centers goes entirely to train (with a warning
// on stderr). With strict_spatial, any val/test center whose S x S window
// shares a pixel with some train window is discarded and counted. Ratios
// must be positive and sum to 1 within 1e-9.
SplitAssignment disjoint_split(const PatchSet& patches, SplitRatios ratios,
                               std::uint64_t seed, bool strict_spatial);

nlohmann::json split_to_json(const SplitAssignment& split);
SplitAssignment split_from_json(const nlohmann::json& j);

}  // namespace pyformer
