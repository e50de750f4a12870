#include <algorithm>
#include <bit>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "ftsim/css_code.hpp"
#include "ftsim/decoder.hpp"
#include "ftsim/rng.hpp"

using ftsim::CssCode;
using ftsim::DecodeInput;
using ftsim::DecodeResult;
using ftsim::Rng;

namespace {

int weight(std::uint32_t v) { return std::popcount(v); }

// The residual left by applying the correction on top of the truth must
// be a stabilizer, i.e. decoding succeeded up to gauge.
bool corrects(const CssCode& code, std::uint32_t truth,
              const std::vector<int>& located) {
  const DecodeResult r =
      ftsim::ml_decode(code, {ftsim::syndrome(code, truth), located});
  return !r.located_crash && code.in_row_space(truth ^ r.correction);
}

std::vector<int> mask_to_indices(std::uint32_t mask) {
  std::vector<int> out;
  for (int q = 0; mask; ++q, mask >>= 1)
    if (mask & 1) out.push_back(q);
  return out;
}

}  // namespace

TEST_CASE("trivial and single-error decoding") {
  for (const char* name : {"steane7", "golay23"}) {
    const CssCode& code = ftsim::code_by_name(name);
    const DecodeResult zero = ftsim::ml_decode(code, {0, {}});
    CHECK(zero.correction == 0);
    CHECK(!zero.located_crash);
    for (int q = 0; q < code.n; ++q) {
      const DecodeResult r =
          ftsim::ml_decode(code, {ftsim::syndrome(code, 1u << q), {}});
      CHECK(r.correction == (1u << q));
      CHECK(!r.located_crash);
    }
  }
}

TEST_CASE("steane corrects two located errors exhaustively") {
  const CssCode code = ftsim::steane_code();
  for (int i = 0; i < 7; ++i)
    for (int j = i + 1; j < 7; ++j) {
      const std::vector<int> located{i, j};
      for (std::uint32_t flips :
           {0u, 1u << i, 1u << j, (1u << i) | (1u << j)})
        CHECK(corrects(code, flips, located));
    }
}

TEST_CASE("located logical support with zero syndrome crashes") {
  const CssCode code = ftsim::steane_code();
  const std::vector<int> located = mask_to_indices(code.logical_rep);
  REQUIRE(located.size() == 3);
  const DecodeResult r = ftsim::ml_decode(code, {0, located});
  CHECK(r.located_crash);
  CHECK(r.correction == 0);
}

TEST_CASE("steane t/2t bound holds exhaustively") {
  const CssCode code = ftsim::steane_code();
  // 2 * unlocated weight + |located| <= 2t with t = 1.
  for (std::uint32_t lset = 0; lset < (1u << 7); ++lset) {
    const int l = weight(lset);
    if (l > 2) continue;
    const std::vector<int> located = mask_to_indices(lset);
    const int max_u = (2 - l) / 2;
    for (std::uint32_t flips = lset;; flips = (flips - 1) & lset) {
      if (max_u >= 1) {
        for (int q = 0; q < 7; ++q) {
          if (lset & (1u << q)) continue;
          CHECK(corrects(code, flips | (1u << q), located));
        }
      }
      CHECK(corrects(code, flips, located));
      if (flips == 0) break;
    }
  }
}

TEST_CASE("golay t/2t bound holds for unlocated weight <= 3") {
  const CssCode code = ftsim::golay_code();
  for (int a = 0; a < 23; ++a)
    for (int b = a; b < 23; ++b)
      for (int c = b; c < 23; ++c) {
        const std::uint32_t e = (1u << a) | (1u << b) | (1u << c);
        CHECK(corrects(code, e, {}));
      }
}

TEST_CASE("golay t/2t bound holds on sampled mixed cases") {
  const CssCode code = ftsim::golay_code();
  Rng rng(20260815);
  int checked = 0;
  while (checked < 100000) {
    const int l = static_cast<int>(rng.next_below(7));  // |located| <= 6
    std::uint32_t lset = 0;
    while (weight(lset) < l) lset |= 1u << rng.next_below(23);
    const int max_u = (6 - l) / 2;
    const int wu = static_cast<int>(rng.next_below(max_u + 1));
    std::uint32_t u = 0;
    while (weight(u) < wu) {
      const std::uint32_t bit = 1u << rng.next_below(23);
      if (!(lset & bit)) u |= bit;
    }
    const std::uint32_t flips =
        static_cast<std::uint32_t>(rng.next_u64()) & lset;
    CHECK(corrects(code, u | flips, mask_to_indices(lset)));
    ++checked;
  }
}

TEST_CASE("correction always reproduces the input syndrome") {
  Rng rng(99);
  for (const char* name : {"steane7", "golay23"}) {
    const CssCode& code = ftsim::code_by_name(name);
    const std::uint32_t mask = (1u << code.n) - 1;
    for (int t = 0; t < 2000; ++t) {
      const std::uint32_t truth =
          static_cast<std::uint32_t>(rng.next_u64()) & mask;
      std::uint32_t lset = 0;
      const int l = static_cast<int>(rng.next_below(5));
      while (weight(lset) < l) lset |= 1u << rng.next_below(code.n);
      const std::uint32_t s = ftsim::syndrome(code, truth);
      const DecodeResult r = ftsim::ml_decode(code, {s, mask_to_indices(lset)});
      CHECK(ftsim::syndrome(code, r.correction) == s);
    }
  }
}

TEST_CASE("decoding is deterministic") {
  const CssCode code = ftsim::golay_code();
  Rng rng(7);
  for (int t = 0; t < 200; ++t) {
    std::uint32_t lset = 0;
    while (weight(lset) < 4) lset |= 1u << rng.next_below(23);
    const DecodeInput in{static_cast<std::uint32_t>(rng.next_below(2048)),
                         mask_to_indices(lset)};
    const DecodeResult a = ftsim::ml_decode(code, in);
    const DecodeResult b = ftsim::ml_decode(code, in);
    CHECK(a.correction == b.correction);
    CHECK(a.located_crash == b.located_crash);
  }
}

TEST_CASE("malformed located sets are rejected") {
  const CssCode code = ftsim::steane_code();
  CHECK_THROWS_AS(ftsim::ml_decode(code, {0, {3, 3}}),
                  const std::invalid_argument&);
  CHECK_THROWS_AS(ftsim::ml_decode(code, {0, {7}}),
                  const std::invalid_argument&);
  CHECK_THROWS_AS(ftsim::ml_decode(code, {0, {-1}}),
                  const std::invalid_argument&);
}
