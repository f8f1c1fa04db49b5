#include "pyformer/patches.hpp"

#include <algorithm>
#include <stdexcept>

namespace pyformer {

std::optional<std::size_t> PatchSet::index_of(const Center& c) const {
  const auto it = std::lower_bound(centers.begin(), centers.end(), c);
  if (it == centers.end() || !(*it == c)) return std::nullopt;
  return static_cast<std::size_t>(it - centers.begin());
}

std::size_t center_offset(std::size_t patch_size) { return patch_size / 2; }

Tensor patch_at(const Tensor& projected, std::size_t patch_size, Center center) {
  const std::size_t height = projected.shape()[0], width = projected.shape()[1],
                    bands = projected.shape()[2];
  const std::size_t c0 = center_offset(patch_size);
  if (center.row < c0 || center.col < c0 ||
      center.row - c0 + patch_size > height ||
      center.col - c0 + patch_size > width)
    throw std::invalid_argument("patch_at: center (" +
                                std::to_string(center.row) + ", " +
                                std::to_string(center.col) +
                                ") has no valid window");
  const std::size_t r0 = center.row - c0, col0 = center.col - c0;
  Tensor patch(Shape{patch_size, patch_size, bands});
  for (std::size_t r = 0; r < patch_size; ++r)
    for (std::size_t c = 0; c < patch_size; ++c)
      for (std::size_t b = 0; b < bands; ++b)
        patch[(r * patch_size + c) * bands + b] =
            projected[((r0 + r) * width + (col0 + c)) * bands + b];
  return patch;
}

PatchSet extract_patches(const HsiCube& cube, const PcaModel& pca,
                         std::size_t patch_size) {
  if (patch_size < 1)
    throw std::invalid_argument("extract_patches: patch size must be positive");
  if (patch_size > cube.height || patch_size > cube.width)
    throw std::invalid_argument(
        "extract_patches: patch size " + std::to_string(patch_size) +
        " exceeds scene extents " + std::to_string(cube.height) + "x" +
        std::to_string(cube.width));

  const Tensor projected = project_cube(cube, pca);
  const std::size_t c0 = center_offset(patch_size);

  PatchSet set;
  set.patch_size = patch_size;
  set.reduced_bands = pca.components.shape()[0];
  set.total_positions =
      (cube.height - patch_size + 1) * (cube.width - patch_size + 1);

  // Valid centers are exactly those whose window fits: c0 <= r <= M - S + c0.
  for (std::size_t r = c0; r + (patch_size - c0) <= cube.height; ++r)
    for (std::size_t c = c0; c + (patch_size - c0) <= cube.width; ++c) {
      const std::uint16_t label = cube.label(r, c);
      if (label == 0) continue;
      set.centers.push_back(Center{r, c});
      set.center_labels.push_back(static_cast<int>(label));
      set.patches.push_back(patch_at(projected, patch_size, Center{r, c}));
    }
  return set;
}

}  // namespace pyformer
