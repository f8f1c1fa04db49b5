#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "pyformer/metrics.hpp"
#include "pyformer/model.hpp"
#include "pyformer/patches.hpp"

namespace pyformer {

// RGB class map at scene resolution: one colored pixel per retained patch
// center (its predicted class), black everywhere else (unlabeled pixels and
// borders where no window fits).
struct ClassMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<unsigned char> rgb;  // 3 * height * width, row-major
};

// Fixed palette: class ids 1..k map to evenly spaced hues, so the same id
// always gets the same color for a given class count.
std::array<unsigned char, 3> class_color(int label, std::size_t num_classes);

// Predicts every center in the patch set and paints the result. Predictions
// use the same path as evaluate(), so the map and the metrics always agree.
ClassMap render_map(const PyFormerParams& params, const PyFormerConfig& config,
                    const PatchSet& patches, std::size_t height,
                    std::size_t width);

// Binary PPM (P6), width columns by height rows, 8 bits per channel.
void write_ppm(const std::string& path, const ClassMap& map);

}  // namespace pyformer
