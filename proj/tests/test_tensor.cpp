#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "pyformer/rng.hpp"
#include "pyformer/tensor.hpp"

using namespace pyformer;

TEST_CASE("shape count and text") {
  Shape s{{2, 3, 4}};
  CHECK(s.count() == 24);
  CHECK(s.rank() == 3);
  CHECK(s.str() == "2x3x4");
  CHECK(Shape{{1}}.str() == "1");
  CHECK(Shape{}.str() == "scalar");
  CHECK(Shape{{2, 3}} == Shape{{2, 3}});
  CHECK_FALSE(Shape{{2, 3}} == Shape{{3, 2}});
}

TEST_CASE("shape rejects zero extents") {
  CHECK_THROWS_AS((Shape{{2, 0, 4}}), std::invalid_argument);
  CHECK_THROWS_AS((Shape{std::vector<std::size_t>{7, 0}}), std::invalid_argument);
  // Rank 0 is the valid scalar shape, holding one element.
  CHECK(Shape{std::vector<std::size_t>{}}.count() == 1);
}

TEST_CASE("tensor construction and fill") {
  Tensor t(Shape{{2, 2}});
  CHECK(t.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(t[i] == 0.0);

  Tensor u = Tensor::full(Shape{{3}}, 1.5);
  CHECK(u[0] == 1.5);
  CHECK(u[2] == 1.5);

  Tensor s = Tensor::scalar(-2.0);
  CHECK(s.size() == 1);
  CHECK(s.shape() == Shape{{1}});
  CHECK(s[0] == -2.0);

  CHECK_THROWS_AS(Tensor(Shape{{2, 2}}, {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("axpy accumulates and checks shapes") {
  Tensor a(Shape{{2}}, {1.0, 2.0});
  Tensor b(Shape{{2}}, {10.0, 20.0});
  axpy(a, b);
  CHECK(a[0] == 11.0);
  CHECK(a[1] == 22.0);
  Tensor c(Shape{{3}});
  CHECK_THROWS_AS(axpy(a, c), std::invalid_argument);
}

TEST_CASE("all_finite flags bad values") {
  Tensor t(Shape{{2}}, {1.0, 2.0});
  CHECK(t.all_finite());
  t[1] = std::nan("");
  CHECK_FALSE(t.all_finite());
  t[1] = HUGE_VAL;
  CHECK_FALSE(t.all_finite());
}

TEST_CASE("rng streams are reproducible") {
  Rng a(42), b(42), c(43);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 100; ++i) {
    const double x = a.uniform(), y = b.uniform(), z = c.uniform();
    all_equal = all_equal && x == y;
    any_diff = any_diff || x != z;
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("rng normal has sane first moments") {
  Rng r(7);
  double sum = 0.0, sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("rng index and shuffle") {
  Rng r(1);
  for (int i = 0; i < 200; ++i) CHECK(r.index(7) < 7);

  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  Rng s1(9), s2(9);
  auto a = v, b = v;
  s1.shuffle(a);
  s2.shuffle(b);
  CHECK(a == b);                               // deterministic
  CHECK(std::is_permutation(a.begin(), a.end(), v.begin()));
  CHECK(a != v);  // with 10 elements an identity shuffle is (10!)^-1 unlikely
}
