#pragma once

#include <compare>
#include <optional>
#include <vector>

#include "pyformer/hsi_cube.hpp"
#include "pyformer/pca.hpp"
#include "pyformer/tensor.hpp"

namespace pyformer {

struct Center {
  std::size_t row = 0;
  std::size_t col = 0;
  auto operator<=>(const Center&) const = default;
};

struct PatchSet {
  std::size_t patch_size = 0;      // S
  std::size_t reduced_bands = 0;   // B*
  std::size_t total_positions = 0; // (M-S+1)(N-S+1)
  std::vector<Center> centers;     // row-major scan order
  std::vector<Tensor> patches;     // aligned with centers, each (S, S, B*)
  std::vector<int> center_labels;  // aligned with centers, 1..K

  std::optional<std::size_t> index_of(const Center& c) const;
};

// Center convention: the window of center (r, c) spans rows
// [r - S/2, r - S/2 + S - 1] (integer division), so even side lengths are
// accepted with the center at index floor(S/2). For odd S this is the usual
// symmetric window with half-width (S-1)/2.
std::size_t center_offset(std::size_t patch_size);

// One S x S x B* window of the PCA-projected cube per labeled valid-window
// position.
PatchSet extract_patches(const HsiCube& cube, const PcaModel& pca,
                         std::size_t patch_size);

// Window copy used by both extract_patches and map rendering; projected is
// the (M, N, B*) tensor from project_cube.
Tensor patch_at(const Tensor& projected, std::size_t patch_size, Center center);

}  // namespace pyformer
