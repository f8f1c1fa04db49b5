// Kernel benchmark: the OpenMP-parallel kernels against the straight-line
// serial reference, at a few representative sizes. Prints a table with the
// best-of-N wall time per variant, the speedup, and the max elementwise
// difference (which must sit at rounding level, since both compute the same
// serial-order accumulations).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "pyformer/kernels.hpp"
#include "pyformer/reference.hpp"
#include "pyformer/rng.hpp"
#include "pyformer/tensor.hpp"

using namespace pyformer;

namespace {

Tensor randn(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal();
  return t;
}

double best_of(int reps, const std::function<void()>& fn) {
  fn();  // warm-up
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const double ms =
        std::chrono::duration<double, std::milli>(
            std::chrono::steady_clock::now() - t0)
            .count();
    best = std::min(best, ms);
  }
  return best;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

void report(const std::string& name, double ref_ms, double par_ms,
            double diff) {
  std::printf("%-28s %10.3f %10.3f %8.2fx %10.2e\n", name.c_str(), ref_ms,
              par_ms, ref_ms / par_ms, diff);
}

void bench_conv(const std::string& name, std::size_t cin, std::size_t cout,
                std::size_t d, std::size_t h, std::size_t w, std::size_t k,
                std::size_t pad, int reps) {
  Rng rng(42);
  const Tensor input = randn(Shape{{cin, d, h, w}}, rng);
  const Tensor weights = randn(Shape{{cout, cin, k, k, k}}, rng);
  const Tensor bias = randn(Shape{{cout}}, rng);
  Tensor out_ref, out_par;
  const double ref_ms = best_of(
      reps, [&] { out_ref = ref::conv3d(input, weights, bias, pad, pad, pad); });
  const double par_ms = best_of(reps, [&] {
    out_par = kernels::conv3d(input, weights, bias, Pad3{pad, pad, pad});
  });
  report(name, ref_ms, par_ms, max_abs_diff(out_ref, out_par));
}

void bench_matmul(const std::string& name, std::size_t m, std::size_t k,
                  std::size_t n, int reps) {
  Rng rng(43);
  const Tensor a = randn(Shape{{m, k}}, rng);
  const Tensor b = randn(Shape{{k, n}}, rng);
  Tensor out_ref, out_par;
  const double ref_ms = best_of(reps, [&] { out_ref = ref::matmul(a, b); });
  const double par_ms = best_of(reps, [&] { out_par = kernels::matmul(a, b); });
  report(name, ref_ms, par_ms, max_abs_diff(out_ref, out_par));
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("OpenMP enabled, max threads = %d\n", omp_get_max_threads());
#else
  std::printf("OpenMP disabled (serial fallback)\n");
#endif
  std::printf("%-28s %10s %10s %9s %10s\n", "case", "ref ms", "par ms",
              "speedup", "max|diff|");

  bench_conv("conv3d 4x8x8x8 k3", 4, 8, 8, 8, 8, 3, 1, 5);
  bench_conv("conv3d 8x8x16x16 k3", 8, 16, 8, 16, 16, 3, 1, 3);
  bench_conv("conv3d 16x4x24x24 k3", 16, 32, 4, 24, 24, 3, 1, 3);

  bench_matmul("matmul 64x64x64", 64, 64, 64, 10);
  bench_matmul("matmul 128x128x128", 128, 128, 128, 5);
  bench_matmul("matmul 256x256x256", 256, 256, 256, 3);
  return 0;
}
