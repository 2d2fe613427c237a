#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "secci/rng.hpp"

using secci::Rng;

TEST_CASE("same seed reproduces the same stream") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds diverge") {
  Rng a(1), b(2);
  int equal = 0;
  for (int i = 0; i < 100; ++i)
    if (a.next_u64() == b.next_u64()) ++equal;
  CHECK(equal == 0);
}

TEST_CASE("mix is deterministic and spreads nearby indices") {
  CHECK(Rng::mix(7, 0) == Rng::mix(7, 0));
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(Rng::mix(123, i));
  CHECK(seen.size() == 1000);
}

TEST_CASE("child generators are reproducible and independent of draw order") {
  Rng parent(99);
  Rng c0 = parent.child(0);
  parent.next_u64();  // consuming the parent must not affect children
  Rng c0_again = parent.child(0);
  for (int i = 0; i < 100; ++i) REQUIRE(c0.next_u64() == c0_again.next_u64());
}

TEST_CASE("uniform stays in [0, 1) and fills the range") {
  Rng rng(5);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo < 0.001);
  CHECK(hi > 0.999);
}

TEST_CASE("uniform(lo, hi) respects its bounds") {
  Rng rng(6);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform(-3.0, 2.5);
    REQUIRE(u >= -3.0);
    REQUIRE(u < 2.5);
  }
}

TEST_CASE("uniform_int covers every value of a small range") {
  Rng rng(7);
  std::set<std::int64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const auto v = rng.uniform_int(-2, 3);
    REQUIRE(v >= -2);
    REQUIRE(v <= 3);
    seen.insert(v);
  }
  CHECK(seen.size() == 6);
}

TEST_CASE("uniform_int handles a single-value range") {
  Rng rng(8);
  for (int i = 0; i < 10; ++i) CHECK(rng.uniform_int(4, 4) == 4);
}

TEST_CASE("normal has approximately the requested moments") {
  Rng rng(9);
  const int n = 200000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal(2.0, 3.0);
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  CHECK(mean == doctest::Approx(2.0).epsilon(0.02));
  CHECK(var == doctest::Approx(9.0).epsilon(0.03));
}

TEST_CASE("bernoulli respects probability") {
  Rng rng(10);
  int hits = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i)
    if (rng.bernoulli(0.3)) ++hits;
  CHECK(static_cast<double>(hits) / n == doctest::Approx(0.3).epsilon(0.03));
  Rng rng2(11);
  for (int i = 0; i < 100; ++i) {
    CHECK_FALSE(rng2.bernoulli(0.0));
    CHECK(rng2.bernoulli(1.0));
  }
}
