#pragma once

#include <vector>

#include "pyformer/hsi_cube.hpp"
#include "pyformer/tensor.hpp"

namespace pyformer {

struct PcaModel {
  std::vector<double> mean;   // per band
  std::vector<double> scale;  // per band stddev; numerically constant bands get 1
  Tensor components;          // B* x B, rows orthonormal, descending eigenvalue
  double explained_fraction = 0.0;
};

// Standardized PCA over all pixels (labeled and unlabeled). Components are
// ordered by descending eigenvalue; each row's sign is fixed so its
// largest-magnitude entry is positive. Requires 1 <= reduced_bands <= B and
// at least B pixels.
PcaModel fit_pca(const HsiCube& cube, std::size_t reduced_bands);

// Project every pixel: output shape (M, N, B*).
Tensor project_cube(const HsiCube& cube, const PcaModel& pca);

// Symmetric eigendecomposition by cyclic Jacobi rotations; a is n x n
// row-major and is destroyed. Outputs are ordered by descending eigenvalue;
// eigenvectors holds one eigenvector per row.
void jacobi_eigh(std::vector<double>& a, std::size_t n,
                 std::vector<double>& eigenvalues,
                 std::vector<double>& eigenvectors);

}  // namespace pyformer
