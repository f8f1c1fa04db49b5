#pragma once

#include <filesystem>
#include <utility>

#include "pyformer/model.hpp"

namespace pyformer {

// Checkpoint = JSON manifest (magic "PYFORMER1", config, tensor index) plus
// one raw little-endian float64 blob file holding all parameter tensors in
// manifest order. Save/load round trips are byte-identical.
void save_checkpoint(const PyFormerParams& params, const PyFormerConfig& config,
                     const std::filesystem::path& manifest_path);
std::pair<PyFormerParams, PyFormerConfig> load_checkpoint(
    const std::filesystem::path& manifest_path);

}  // namespace pyformer
