#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace pyformer {

// Hyperspectral cube: M x N pixels, B bands, band-interleaved-by-pixel
// reflectance plus a row-major label raster (0 = unlabeled, 1..K = classes).
struct HsiCube {
  std::size_t height = 0;  // M
  std::size_t width = 0;   // N
  std::size_t bands = 0;   // B
  std::vector<float> reflectance;
  std::vector<std::uint16_t> labels;
  std::vector<std::string> class_names;

  float at(std::size_t r, std::size_t c, std::size_t b) const {
    return reflectance[(r * width + c) * bands + b];
  }
  std::uint16_t label(std::size_t r, std::size_t c) const {
    return labels[r * width + c];
  }
  std::size_t num_classes() const { return class_names.size(); }
  // Labeled-pixel count per class (index 0 = class 1).
  std::vector<std::size_t> class_counts() const;
};

// On-disk format: a JSON header next to two raw little-endian rasters
// (float32 reflectance, uint16 labels). save_cube derives the raster file
// names from the header stem; load_cube resolves them relative to the
// header's directory. A load/save round trip is byte-identical.
HsiCube load_cube(const std::filesystem::path& header_path);
void save_cube(const HsiCube& cube, const std::filesystem::path& header_path);

}  // namespace pyformer
