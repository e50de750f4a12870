#include <array>
#include <cmath>

#include "doctest.h"
#include "ftsim/pauli.hpp"

using ftsim::PauliBits;
using ftsim::Rng;

TEST_CASE("pauli composition is abelian xor, Y = XZ") {
  PauliBits x{true, false}, z{false, true}, y{true, true};
  CHECK((x ^ z) == y);
  CHECK((z ^ x) == y);
  CHECK((x ^ x).identity());
  CHECK((y ^ y).identity());
  CHECK(ftsim::pauli_from_index(0).identity());
  CHECK(ftsim::pauli_from_index(1) == x);
  CHECK(ftsim::pauli_from_index(2) == y);
  CHECK(ftsim::pauli_from_index(3) == z);
}

TEST_CASE("depolarize_1q applies X, Y, Z each with probability eps/3") {
  Rng rng(21);
  const double eps = 0.3;
  const int n = 300000;
  std::array<int, 4> counts{};
  for (int i = 0; i < n; ++i) {
    PauliBits p;
    ftsim::depolarize_1q(p, eps, rng);
    ++counts[(p.x ? 1 : 0) + (p.z ? 2 : 0)];
  }
  CHECK(std::abs(counts[0] / double(n) - (1 - eps)) < 0.01);
  for (int k = 1; k < 4; ++k)
    CHECK(std::abs(counts[k] / double(n) - eps / 3) < 0.01);
}

TEST_CASE("depolarize_2q spreads eps over the 15 non-identity pairs") {
  Rng rng(22);
  const double eps = 0.45;
  const int n = 600000;
  std::array<int, 16> counts{};
  for (int i = 0; i < n; ++i) {
    PauliBits a, b;
    ftsim::depolarize_2q(a, b, eps, rng);
    const int ia = (a.x ? 1 : 0) + (a.z ? 2 : 0);
    const int ib = (b.x ? 1 : 0) + (b.z ? 2 : 0);
    ++counts[4 * ia + ib];
  }
  CHECK(std::abs(counts[0] / double(n) - (1 - eps)) < 0.01);
  for (int k = 1; k < 16; ++k)
    CHECK(std::abs(counts[k] / double(n) - eps / 15) < 0.005);
}

TEST_CASE("depolarize with eps=0 never fires") {
  Rng rng(23);
  for (int i = 0; i < 1000; ++i) {
    PauliBits a, b;
    ftsim::depolarize_1q(a, 0.0, rng);
    ftsim::depolarize_2q(a, b, 0.0, rng);
    CHECK(a.identity());
    CHECK(b.identity());
  }
}
