#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <vector>

#include <json.hpp>

#include "pyformer/hsi_cube.hpp"
#include "pyformer/patches.hpp"
#include "pyformer/pca.hpp"
#include "pyformer/rng.hpp"
#include "pyformer/split.hpp"
#include "pyformer/synthetic.hpp"

using namespace pyformer;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const fs::path p = fs::temp_directory_path() / "pyformer_hsi_tests";
  fs::create_directories(p);
  return p;
}

std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("synthetic scenes are deterministic and noiseless when asked") {
  SyntheticSpec spec;
  spec.classes = 3;
  spec.height = 12;
  spec.width = 10;
  spec.bands = 8;
  spec.noise_sigma = 0.0;
  spec.seed = 3;
  HsiCube a = generate_synthetic(spec);
  HsiCube b = generate_synthetic(spec);
  CHECK(a.reflectance == b.reflectance);
  CHECK(a.labels == b.labels);

  // every pixel labeled, labels partition into 1..K
  for (std::uint16_t l : a.labels) {
    CHECK(l >= 1);
    CHECK(l <= 3);
  }
  // noiseless: spectrum equals the class signature exactly (as float)
  for (std::size_t r = 0; r < spec.height; ++r)
    for (std::size_t c = 0; c < spec.width; ++c) {
      const auto sig = class_signature(spec, a.label(r, c));
      for (std::size_t band = 0; band < spec.bands; ++band)
        CHECK(a.at(r, c, band) == static_cast<float>(sig[band]));
    }

  spec.seed = 4;
  HsiCube c = generate_synthetic(spec);
  CHECK(a.labels != c.labels);  // layout follows the seed
}

TEST_CASE("noiseless cubes are separable by nearest signature") {
  SyntheticSpec spec;
  spec.classes = 4;
  spec.height = 16;
  spec.width = 16;
  spec.bands = 24;
  spec.noise_sigma = 0.0;
  spec.seed = 9;
  HsiCube cube = generate_synthetic(spec);
  std::size_t hits = 0;
  for (std::size_t r = 0; r < spec.height; ++r)
    for (std::size_t c = 0; c < spec.width; ++c) {
      int best = 0;
      double best_d = 1e300;
      for (int k = 1; k <= 4; ++k) {
        const auto sig = class_signature(spec, k);
        double d = 0.0;
        for (std::size_t band = 0; band < spec.bands; ++band) {
          const double diff = cube.at(r, c, band) - sig[band];
          d += diff * diff;
        }
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      hits += best == cube.label(r, c);
    }
  CHECK(hits == spec.height * spec.width);  // oracle OA = 1.0
}

TEST_CASE("synthetic spec validation") {
  SyntheticSpec spec;
  spec.classes = 1;
  CHECK_THROWS_AS(generate_synthetic(spec), std::invalid_argument);
  spec.classes = 3;
  spec.noise_sigma = -0.5;
  CHECK_THROWS_AS(generate_synthetic(spec), std::invalid_argument);
  spec.noise_sigma = 0.0;
  spec.height = 1;
  spec.width = 2;  // 2 pixels < 3 classes
  CHECK_THROWS_AS(generate_synthetic(spec), std::invalid_argument);
}

TEST_CASE("cube save/load round trip is bitwise") {
  SyntheticSpec spec;
  spec.height = 9;
  spec.width = 7;
  spec.bands = 5;
  spec.seed = 12;
  HsiCube cube = generate_synthetic(spec);
  const fs::path dir = scratch_dir();
  save_cube(cube, dir / "rt.json");
  HsiCube back = load_cube(dir / "rt.json");
  CHECK(back.height == cube.height);
  CHECK(back.width == cube.width);
  CHECK(back.bands == cube.bands);
  CHECK(back.reflectance == cube.reflectance);
  CHECK(back.labels == cube.labels);
  CHECK(back.class_names == cube.class_names);

  save_cube(back, dir / "rt2.json");
  CHECK(slurp(dir / "rt_data.raw") == slurp(dir / "rt2_data.raw"));
  CHECK(slurp(dir / "rt_labels.raw") == slurp(dir / "rt2_labels.raw"));
}

TEST_CASE("malformed cube files are rejected") {
  SyntheticSpec spec;
  spec.height = 6;
  spec.width = 6;
  spec.bands = 4;
  HsiCube cube = generate_synthetic(spec);
  const fs::path dir = scratch_dir();
  save_cube(cube, dir / "bad.json");

  auto rewrite = [&](auto mutate) {
    nlohmann::json h;
    std::ifstream in(dir / "bad.json");
    in >> h;
    mutate(h);
    std::ofstream out(dir / "bad.json");
    out << h.dump(2) << "\n";
  };

  rewrite([](nlohmann::json& h) { h["magic"] = "NOTACUBE"; });
  CHECK_THROWS(load_cube(dir / "bad.json"));
  rewrite([](nlohmann::json& h) { h["magic"] = "HSICUBE1"; h["dtype"] = "f64le"; });
  CHECK_THROWS(load_cube(dir / "bad.json"));
  rewrite([](nlohmann::json& h) { h["dtype"] = "f32le"; h["B"] = 5; });
  CHECK_THROWS(load_cube(dir / "bad.json"));  // byte count mismatch
  CHECK_THROWS(load_cube(dir / "missing.json"));
}

TEST_CASE("pca explains everything with a full basis") {
  SyntheticSpec spec;
  spec.height = 10;
  spec.width = 10;
  spec.bands = 6;
  spec.noise_sigma = 0.05;
  HsiCube cube = generate_synthetic(spec);
  PcaModel pca = fit_pca(cube, 6);
  CHECK(pca.explained_fraction == doctest::Approx(1.0).epsilon(1e-9));
  CHECK_THROWS_AS(fit_pca(cube, 7), std::invalid_argument);
}

TEST_CASE("pca on rank-1 data concentrates in one component") {
  HsiCube cube;
  cube.height = 8;
  cube.width = 8;
  cube.bands = 3;
  cube.class_names = {"class-1"};
  cube.labels.assign(64, 1);
  cube.reflectance.resize(64 * 3);
  Rng rng(2);
  for (std::size_t p = 0; p < 64; ++p) {
    const float t = static_cast<float>(rng.normal());
    // all variation along direction (1, 2, -1)
    cube.reflectance[p * 3 + 0] = t;
    cube.reflectance[p * 3 + 1] = 2.0f * t;
    cube.reflectance[p * 3 + 2] = -t;
  }
  PcaModel pca = fit_pca(cube, 1);
  CHECK(pca.explained_fraction == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("pca components are orthonormal eigenpairs of the covariance") {
  SyntheticSpec spec;
  spec.height = 12;
  spec.width = 12;
  spec.bands = 5;
  spec.noise_sigma = 0.3;
  spec.seed = 8;
  HsiCube cube = generate_synthetic(spec);
  const std::size_t B = 5, P = 144;
  PcaModel pca = fit_pca(cube, B);

  // independent covariance of standardized data
  std::vector<double> mean(B, 0.0), sd(B, 0.0);
  for (std::size_t p = 0; p < P; ++p)
    for (std::size_t b = 0; b < B; ++b) mean[b] += cube.reflectance[p * B + b];
  for (std::size_t b = 0; b < B; ++b) mean[b] /= P;
  for (std::size_t p = 0; p < P; ++p)
    for (std::size_t b = 0; b < B; ++b) {
      const double d = cube.reflectance[p * B + b] - mean[b];
      sd[b] += d * d;
    }
  for (std::size_t b = 0; b < B; ++b) sd[b] = std::sqrt(sd[b] / P);
  std::vector<double> cov(B * B, 0.0);
  for (std::size_t p = 0; p < P; ++p)
    for (std::size_t i = 0; i < B; ++i)
      for (std::size_t j = 0; j < B; ++j)
        cov[i * B + j] += ((cube.reflectance[p * B + i] - mean[i]) / sd[i]) *
                          ((cube.reflectance[p * B + j] - mean[j]) / sd[j]);
  for (double& c : cov) c /= P;

  // orthonormal rows
  for (std::size_t a = 0; a < B; ++a)
    for (std::size_t b = 0; b < B; ++b) {
      double dot = 0.0;
      for (std::size_t j = 0; j < B; ++j)
        dot += pca.components[a * B + j] * pca.components[b * B + j];
      CHECK(dot == doctest::Approx(a == b ? 1.0 : 0.0).scale(1.0).epsilon(1e-9));
    }

  // each component v satisfies C v = lambda v with non-increasing lambda
  double prev = 1e300;
  for (std::size_t a = 0; a < B; ++a) {
    double lambda = 0.0;  // Rayleigh quotient v' C v
    std::vector<double> cv(B, 0.0);
    for (std::size_t i = 0; i < B; ++i)
      for (std::size_t j = 0; j < B; ++j)
        cv[i] += cov[i * B + j] * pca.components[a * B + j];
    for (std::size_t i = 0; i < B; ++i) lambda += pca.components[a * B + i] * cv[i];
    for (std::size_t i = 0; i < B; ++i)
      CHECK(cv[i] == doctest::Approx(lambda * pca.components[a * B + i])
                         .scale(1.0)
                         .epsilon(1e-8));
    CHECK(lambda <= prev + 1e-9);
    prev = lambda;
  }
}

TEST_CASE("patch extraction geometry") {
  CHECK(center_offset(8) == 4);
  CHECK(center_offset(5) == 2);

  SyntheticSpec spec;
  spec.height = 11;
  spec.width = 9;
  spec.bands = 6;
  spec.seed = 5;
  HsiCube cube = generate_synthetic(spec);
  PcaModel pca = fit_pca(cube, 3);
  PatchSet ps = extract_patches(cube, pca, 4);
  CHECK(ps.total_positions == (11 - 4 + 1) * (9 - 4 + 1));
  // fully labeled scene: every valid window has a labeled center
  CHECK(ps.centers.size() == ps.total_positions);
  CHECK(ps.patches.size() == ps.centers.size());
  CHECK(ps.center_labels.size() == ps.centers.size());
  for (const Tensor& p : ps.patches) CHECK(p.shape() == Shape{{4, 4, 3}});
  CHECK(std::is_sorted(ps.centers.begin(), ps.centers.end()));

  // window content matches a direct projection of the window
  const Tensor projected = project_cube(cube, pca);
  const Center c = ps.centers[7];
  const Tensor direct = patch_at(projected, 4, c);
  const std::size_t idx = *ps.index_of(c);
  for (std::size_t i = 0; i < direct.size(); ++i)
    CHECK(ps.patches[idx][i] == direct[i]);

  CHECK_THROWS_AS(extract_patches(cube, pca, 12), std::invalid_argument);
}

TEST_CASE("unlabeled pixels yield no patches") {
  SyntheticSpec spec;
  spec.height = 8;
  spec.width = 8;
  spec.bands = 4;
  HsiCube cube = generate_synthetic(spec);
  // strip the labels off one full row inside the valid-center band
  for (std::size_t c = 0; c < 8; ++c) cube.labels[3 * 8 + c] = 0;
  PcaModel pca = fit_pca(cube, 2);
  PatchSet ps = extract_patches(cube, pca, 3);
  CHECK(ps.total_positions == 36);
  CHECK(ps.centers.size() == 30);  // 6 centers in row 3 dropped
  for (const Center& c : ps.centers) CHECK(c.row != 3);
}

TEST_CASE("split is stratified, disjoint, and reproducible") {
  SyntheticSpec spec;
  spec.height = 20;
  spec.width = 20;
  spec.bands = 8;
  spec.seed = 5;
  HsiCube cube = generate_synthetic(spec);
  PcaModel pca = fit_pca(cube, 4);
  PatchSet ps = extract_patches(cube, pca, 4);

  SplitRatios ratios{0.2, 0.2, 0.6};
  SplitAssignment s1 = disjoint_split(ps, ratios, 77, false);
  SplitAssignment s2 = disjoint_split(ps, ratios, 77, false);
  CHECK(s1.train == s2.train);
  CHECK(s1.val == s2.val);
  CHECK(s1.test == s2.test);

  std::set<Center> seen;
  for (const auto* part : {&s1.train, &s1.val, &s1.test})
    for (const Center& c : *part) CHECK(seen.insert(c).second);
  CHECK(seen.size() == ps.centers.size());

  // per-class counts land within one of the requested fractions
  std::map<int, std::size_t> per_class;
  for (int l : ps.center_labels) ++per_class[l];
  std::map<int, std::size_t> train_count;
  for (const Center& c : s1.train) ++train_count[ps.center_labels[*ps.index_of(c)]];
  for (const auto& [label, n] : per_class) {
    const double expect = ratios.train * static_cast<double>(n);
    CHECK(std::abs(static_cast<double>(train_count[label]) - expect) <= 1.0);
  }

  CHECK_THROWS_AS(disjoint_split(ps, SplitRatios{0.5, 0.5, 0.5}, 1, false),
                  std::invalid_argument);
}

TEST_CASE("strict spatial mode removes window overlaps") {
  SyntheticSpec spec;
  spec.height = 14;
  spec.width = 14;
  spec.bands = 6;
  spec.seed = 2;
  HsiCube cube = generate_synthetic(spec);
  PcaModel pca = fit_pca(cube, 3);
  const std::size_t S = 5;
  PatchSet ps = extract_patches(cube, pca, S);
  SplitAssignment split = disjoint_split(ps, SplitRatios{0.2, 0.2, 0.6}, 3, true);

  const std::size_t off = center_offset(S);
  auto overlaps = [&](Center a, Center b) {
    const auto lo_r_a = a.row - off, lo_c_a = a.col - off;
    const auto lo_r_b = b.row - off, lo_c_b = b.col - off;
    const bool rows = lo_r_a < lo_r_b + S && lo_r_b < lo_r_a + S;
    const bool cols = lo_c_a < lo_c_b + S && lo_c_b < lo_c_a + S;
    return rows && cols;
  };
  for (const Center& t : split.train) {
    for (const Center& v : split.val) CHECK_FALSE(overlaps(t, v));
    for (const Center& e : split.test) CHECK_FALSE(overlaps(t, e));
  }
  const std::size_t kept = split.train.size() + split.val.size() + split.test.size();
  CHECK(kept + split.discarded == ps.centers.size());
  CHECK(split.discarded > 0);  // dense grid: strictness must bite
}

TEST_CASE("split json round trip") {
  SyntheticSpec spec;
  spec.height = 10;
  spec.width = 10;
  spec.bands = 4;
  HsiCube cube = generate_synthetic(spec);
  PcaModel pca = fit_pca(cube, 2);
  PatchSet ps = extract_patches(cube, pca, 3);
  SplitAssignment split = disjoint_split(ps, SplitRatios{0.3, 0.3, 0.4}, 5, true);
  SplitAssignment back = split_from_json(split_to_json(split));
  CHECK(back.train == split.train);
  CHECK(back.val == split.val);
  CHECK(back.test == split.test);
  CHECK(back.seed == split.seed);
  CHECK(back.strict_spatial == split.strict_spatial);
  CHECK(back.discarded == split.discarded);
  CHECK(back.ratios.train == split.ratios.train);
}
