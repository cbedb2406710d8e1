#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "cids/rng.hpp"

using cids::Rng;

TEST_CASE("same seed gives the same sequence") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(42), d(42);
  for (int i = 0; i < 1000; ++i) CHECK(c.uniform() == d.uniform());
  Rng e(42), f(42);
  for (int i = 0; i < 1000; ++i) CHECK(e.normal() == f.normal());
}

TEST_CASE("different seeds diverge") {
  Rng a(1), b(2);
  int same = 0;
  for (int i = 0; i < 100; ++i)
    if (a.next_u64() == b.next_u64()) ++same;
  CHECK(same == 0);
}

TEST_CASE("uniform lies in [0,1)") {
  Rng rng(7);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo < 0.01);
  CHECK(hi > 0.99);
}

TEST_CASE("uniform(lo,hi) respects its bounds and mean") {
  Rng rng(11);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform(-2.0, 3.0);
    CHECK(u >= -2.0);
    CHECK(u < 3.0);
    sum += u;
  }
  CHECK(sum / 100000.0 == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("normal has the right first two moments") {
  Rng rng(13);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("below stays in range and covers all values") {
  Rng rng(17);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const int v = rng.below(7);
    REQUIRE(v >= 0);
    REQUIRE(v < 7);
    ++counts[static_cast<std::size_t>(v)];
  }
  for (int c : counts) CHECK(c > 8500);  // ~10000 expected each
}

TEST_CASE("sample_without_replacement yields ascending distinct indices") {
  Rng rng(19);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + rng.below(20);
    const int k = rng.below(n + 1);
    const std::vector<int> got = rng.sample_without_replacement(n, k);
    REQUIRE(static_cast<int>(got.size()) == k);
    std::set<int> seen;
    int prev = -1;
    for (int v : got) {
      CHECK(v > prev);
      CHECK(v >= 0);
      CHECK(v < n);
      prev = v;
      seen.insert(v);
    }
    CHECK(static_cast<int>(seen.size()) == k);
  }
  // k = n must return every index.
  const std::vector<int> all = rng.sample_without_replacement(5, 5);
  CHECK(all == std::vector<int>{0, 1, 2, 3, 4});
}

TEST_CASE("sample_without_replacement is unbiased enough to hit every index") {
  Rng rng(23);
  std::vector<int> counts(10, 0);
  for (int i = 0; i < 20000; ++i)
    for (int v : rng.sample_without_replacement(10, 3)) ++counts[static_cast<std::size_t>(v)];
  for (int c : counts) CHECK(c > 5000);  // 6000 expected each
}

TEST_CASE("fork gives deterministic independent streams") {
  const Rng base(99);
  Rng f1 = base.fork(1);
  Rng f1b = Rng(99).fork(1);
  Rng f2 = base.fork(2);
  int same12 = 0;
  for (int i = 0; i < 100; ++i) {
    const std::uint64_t a = f1.next_u64();
    CHECK(a == f1b.next_u64());
    if (a == f2.next_u64()) ++same12;
  }
  CHECK(same12 == 0);
  // Forking is a pure function of the construction seed, not of draw position.
  Rng used(99);
  used.next_u64();
  used.next_u64();
  CHECK(used.fork(1).next_u64() == Rng(99).fork(1).next_u64());
}

TEST_CASE("fork streams differ from the base stream") {
  Rng base(5);
  Rng forked = base.fork(0);
  int same = 0;
  for (int i = 0; i < 100; ++i)
    if (base.next_u64() == forked.next_u64()) ++same;
  CHECK(same == 0);
}
