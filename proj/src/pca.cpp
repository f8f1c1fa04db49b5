#include "pyformer/pca.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>

namespace pyformer {

void jacobi_eigh(std::vector<double>& a, std::size_t n,
                 std::vector<double>& eigenvalues,
                 std::vector<double>& eigenvectors) {
  if (a.size() != n * n) throw std::invalid_argument("jacobi_eigh: size mismatch");
  std::vector<double> v(n * n, 0.0);  // accumulated rotations, columns = eigenvectors
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;

  double frob2 = 0.0;
  for (double x : a) frob2 += x * x;
  const double off_tol = 1e-28 * std::max(frob2, 1e-300);

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off2 = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off2 += 2.0 * a[p * n + q] * a[p * n + q];
    if (off2 <= off_tol) break;

    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (apq == 0.0) continue;
        const double app = a[p * n + p], aqq = a[q * n + q];
        const double theta = (aqq - app) / (2.0 * apq);
        // Smaller-angle root for stability.
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k * n + p], akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p * n + k], aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k * n + p], vkq = v[k * n + q];
          v[k * n + p] = c * vkp - s * vkq;
          v[k * n + q] = s * vkp + c * vkq;
        }
      }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return a[i * n + i] > a[j * n + j];
  });

  eigenvalues.resize(n);
  eigenvectors.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t src = order[i];
    eigenvalues[i] = a[src * n + src];
    for (std::size_t k = 0; k < n; ++k) eigenvectors[i * n + k] = v[k * n + src];
  }
}

PcaModel fit_pca(const HsiCube& cube, std::size_t reduced_bands) {
  const std::size_t b = cube.bands;
  const std::size_t n_pixels = cube.height * cube.width;
  if (reduced_bands < 1 || reduced_bands > b)
    throw std::invalid_argument("fit_pca: reduced band count " +
                                std::to_string(reduced_bands) +
                                " outside [1, " + std::to_string(b) + "]");
  if (n_pixels < b)
    throw std::invalid_argument("fit_pca: " + std::to_string(n_pixels) +
                                " pixels < " + std::to_string(b) + " bands");

  PcaModel model;
  model.mean.assign(b, 0.0);
  model.scale.assign(b, 1.0);
  for (std::size_t i = 0; i < n_pixels; ++i)
    for (std::size_t j = 0; j < b; ++j)
      model.mean[j] += static_cast<double>(cube.reflectance[i * b + j]);
  for (double& m : model.mean) m /= static_cast<double>(n_pixels);

  std::vector<double> var(b, 0.0);
  for (std::size_t i = 0; i < n_pixels; ++i)
    for (std::size_t j = 0; j < b; ++j) {
      const double d = static_cast<double>(cube.reflectance[i * b + j]) - model.mean[j];
      var[j] += d * d;
    }
  for (std::size_t j = 0; j < b; ++j) {
    var[j] /= static_cast<double>(n_pixels);
    // Numerically constant bands keep scale 1 instead of exploding.
    model.scale[j] = var[j] > 1e-20 * (1.0 + model.mean[j] * model.mean[j])
                         ? std::sqrt(var[j])
                         : 1.0;
  }

  // Band covariance of the standardized data.
  std::vector<double> cov(b * b, 0.0);
  const std::int64_t bi = static_cast<std::int64_t>(b);
#pragma omp parallel for schedule(static)
  for (std::int64_t j1 = 0; j1 < bi; ++j1)
    for (std::int64_t j2 = j1; j2 < bi; ++j2) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n_pixels; ++i) {
        const double z1 =
            (static_cast<double>(cube.reflectance[i * b + j1]) - model.mean[j1]) /
            model.scale[j1];
        const double z2 =
            (static_cast<double>(cube.reflectance[i * b + j2]) - model.mean[j2]) /
            model.scale[j2];
        acc += z1 * z2;
      }
      acc /= static_cast<double>(n_pixels);
      cov[j1 * bi + j2] = acc;
      cov[j2 * bi + j1] = acc;
    }

  std::vector<double> eigenvalues, eigenvectors;
  jacobi_eigh(cov, b, eigenvalues, eigenvectors);

  model.components = Tensor(Shape{reduced_bands, b});
  for (std::size_t i = 0; i < reduced_bands; ++i) {
    // Sign convention: largest-magnitude entry positive (first on ties).
    std::size_t arg = 0;
    for (std::size_t k = 1; k < b; ++k)
      if (std::abs(eigenvectors[i * b + k]) > std::abs(eigenvectors[i * b + arg]))
        arg = k;
    const double flip = eigenvectors[i * b + arg] < 0.0 ? -1.0 : 1.0;
    for (std::size_t k = 0; k < b; ++k)
      model.components[i * b + k] = flip * eigenvectors[i * b + k];
  }

  double total = 0.0, kept = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    const double ev = std::max(eigenvalues[i], 0.0);  // clamp rounding noise
    total += ev;
    if (i < reduced_bands) kept += ev;
  }
  model.explained_fraction = total > 0.0 ? kept / total : 1.0;
  return model;
}

Tensor project_cube(const HsiCube& cube, const PcaModel& pca) {
  const std::size_t b = cube.bands;
  if (pca.mean.size() != b)
    throw std::invalid_argument("project_cube: model has " +
                                std::to_string(pca.mean.size()) +
                                " bands, cube has " + std::to_string(b));
  const std::size_t b_star = pca.components.shape()[0];
  Tensor out(Shape{cube.height, cube.width, b_star});
  const std::int64_t n_pixels = static_cast<std::int64_t>(cube.height * cube.width);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n_pixels; ++i)
    for (std::size_t j = 0; j < b_star; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < b; ++k)
        acc += pca.components[j * b + k] *
               ((static_cast<double>(cube.reflectance[i * b + k]) - pca.mean[k]) /
                pca.scale[k]);
      out[static_cast<std::size_t>(i) * b_star + j] = acc;
    }
  return out;
}

}  // namespace pyformer
