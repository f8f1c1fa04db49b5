#include "pyformer/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pyformer/rng.hpp"

namespace pyformer {

namespace {

void validate(const SyntheticSpec& spec) {
  if (spec.classes < 2)
    throw std::invalid_argument("generate_synthetic: need at least 2 classes");
  if (spec.classes > 65535)
    throw std::invalid_argument("generate_synthetic: too many classes for u16 labels");
  if (spec.height == 0 || spec.width == 0 || spec.bands == 0)
    throw std::invalid_argument("generate_synthetic: zero extent");
  if (spec.height * spec.width < spec.classes)
    throw std::invalid_argument("generate_synthetic: fewer pixels than classes");
  if (spec.noise_sigma < 0.0)
    throw std::invalid_argument("generate_synthetic: negative noise sigma");
}

}  // namespace

std::vector<double> class_signature(const SyntheticSpec& spec,
                                    std::size_t class_id) {
  validate(spec);
  if (class_id < 1 || class_id > spec.classes)
    throw std::invalid_argument("class_signature: class id out of range");
  const double b_count = static_cast<double>(spec.bands);
  const double k_count = static_cast<double>(spec.classes);
  const double center = (static_cast<double>(class_id) - 0.5) * b_count / k_count;
  const double width = std::max(1.0, b_count / (3.0 * k_count));
  std::vector<double> sig(spec.bands);
  for (std::size_t b = 0; b < spec.bands; ++b) {
    const double d = (static_cast<double>(b) + 0.5) - center;
    sig[b] = spec.pedestal + spec.pedestal_step * static_cast<double>(class_id) +
             spec.bump_amplitude * std::exp(-d * d / (2.0 * width * width));
  }
  return sig;
}

HsiCube generate_synthetic(const SyntheticSpec& spec) {
  validate(spec);
  Rng rng(spec.seed);

  HsiCube cube;
  cube.height = spec.height;
  cube.width = spec.width;
  cube.bands = spec.bands;
  for (std::size_t k = 1; k <= spec.classes; ++k)
    cube.class_names.push_back("class-" + std::to_string(k));

  // Distinct Voronoi sites, one per class; regions are contiguous by
  // construction.
  std::vector<std::pair<std::size_t, std::size_t>> sites;
  while (sites.size() < spec.classes) {
    std::size_t r = rng.index(spec.height);
    std::size_t c = rng.index(spec.width);
    if (std::find(sites.begin(), sites.end(), std::make_pair(r, c)) == sites.end())
      sites.emplace_back(r, c);
  }

  const std::size_t n_pixels = spec.height * spec.width;
  cube.labels.resize(n_pixels);
  for (std::size_t r = 0; r < spec.height; ++r)
    for (std::size_t c = 0; c < spec.width; ++c) {
      std::size_t best = 0;
      std::size_t best_d = static_cast<std::size_t>(-1);
      for (std::size_t k = 0; k < sites.size(); ++k) {
        const std::size_t dr = r > sites[k].first ? r - sites[k].first : sites[k].first - r;
        const std::size_t dc = c > sites[k].second ? c - sites[k].second : sites[k].second - c;
        const std::size_t d = dr * dr + dc * dc;
        if (d < best_d) {  // strict <: ties go to the lowest class id
          best_d = d;
          best = k;
        }
      }
      cube.labels[r * spec.width + c] = static_cast<std::uint16_t>(best + 1);
    }

  std::vector<std::vector<double>> signatures;
  for (std::size_t k = 1; k <= spec.classes; ++k)
    signatures.push_back(class_signature(spec, k));

  cube.reflectance.resize(n_pixels * spec.bands);
  for (std::size_t i = 0; i < n_pixels; ++i) {
    const std::vector<double>& base = signatures[cube.labels[i] - 1];
    for (std::size_t b = 0; b < spec.bands; ++b)
      cube.reflectance[i * spec.bands + b] =
          static_cast<float>(base[b] + spec.noise_sigma * rng.normal());
  }
  return cube;
}

}  // namespace pyformer
