#include <cmath>
#include <cstdint>
#include <set>

#include "doctest.h"
#include "ftsim/rng.hpp"

using ftsim::Rng;

TEST_CASE("trial streams are reproducible and independent of creation order") {
  Rng a = Rng::for_trial(42, 3, 1000);
  Rng b = Rng::for_trial(42, 3, 1000);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng c = Rng::for_trial(42, 3, 1001);
  Rng d = Rng::for_trial(42, 4, 1000);
  Rng e = Rng::for_trial(43, 3, 1000);
  std::set<std::uint64_t> firsts{Rng::for_trial(42, 3, 1000).next_u64(),
                                 c.next_u64(), d.next_u64(), e.next_u64()};
  CHECK(firsts.size() == 4);
}

TEST_CASE("first outputs of a fixed stream are frozen") {
  // Regression pin: a change here silently breaks reproducibility of every
  // recorded run.
  Rng r = Rng::for_trial(1, 2, 3);
  CHECK(r.next_u64() == 0x2a8ae96bed7ec7d6ULL);
  CHECK(r.next_u64() == 0x608445245f8ac055ULL);
}

TEST_CASE("next_double lands in [0,1)") {
  Rng r(7);
  for (int i = 0; i < 10000; ++i) {
    double v = r.next_double();
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("bernoulli handles edge probabilities") {
  Rng r(9);
  CHECK_FALSE(r.bernoulli(0.0));
  CHECK(r.bernoulli(1.0));
  int hits = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) hits += r.bernoulli(0.25);
  CHECK(std::abs(hits / double(n) - 0.25) < 0.01);
}

TEST_CASE("next_below is unbiased over small ranges") {
  Rng r(11);
  int counts[5] = {0, 0, 0, 0, 0};
  const int n = 250000;
  for (int i = 0; i < n; ++i) ++counts[r.next_below(5)];
  for (int k = 0; k < 5; ++k)
    CHECK(std::abs(counts[k] / double(n) - 0.2) < 0.01);
  CHECK(r.next_below(1) == 0);
}

TEST_CASE("normal matches target moments") {
  Rng r(13);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double v = r.normal(1.0, 2.0);
    sum += v;
    sq += v * v;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean - 1.0) < 0.05);
  CHECK(std::abs(var - 4.0) < 0.15);
}

TEST_CASE("shuffle is a deterministic permutation") {
  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7};
  Rng r1(99), r2(99);
  auto w = v;
  r1.shuffle(v);
  r2.shuffle(w);
  CHECK(v == w);
  std::set<int> s(v.begin(), v.end());
  CHECK(s.size() == 8);
}
