#pragma once

#include <cstdint>
#include <vector>

#include "pyformer/hsi_cube.hpp"

namespace pyformer {

struct SyntheticSpec {
  std::size_t classes = 3;  // K
  std::size_t height = 24;
  std::size_t width = 24;
  std::size_t bands = 32;
  double noise_sigma = 0.0;
  // Per-class signature family: class k sits on pedestal
  // pedestal + k*pedestal_step with a Gaussian bump of height bump_amplitude
  // centered at band (k - 0.5)*B/K.
  double bump_amplitude = 2.0;
  double pedestal = 0.2;
  double pedestal_step = 0.1;
  std::uint64_t seed = 1;
};

// Ideal spectrum of class_id (1..K). Signatures of different classes are
// distinct, so a noise-free scene is exactly separable by nearest signature.
std::vector<double> class_signature(const SyntheticSpec& spec,
                                    std::size_t class_id);

// Voronoi-region scene: K random sites partition the image into contiguous
// class regions (every pixel labeled); each pixel's spectrum is its class
// signature plus i.i.d. Gaussian noise. Deterministic in the seed.
HsiCube generate_synthetic(const SyntheticSpec& spec);

}  // namespace pyformer
