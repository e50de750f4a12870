#include "ftsim/decoder.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <stdexcept>

namespace ftsim {

DecodeResult ml_decode(const CssCode& code, const DecodeInput& input) {
  std::vector<int> located = input.located;
  std::sort(located.begin(), located.end());
  const int m = static_cast<int>(located.size());
  if (m > code.n)
    throw std::invalid_argument("located set exceeds the decoder cap");
  for (int i = 0; i < m; ++i) {
    if (located[i] < 0 || located[i] >= code.n)
      throw std::invalid_argument("located index out of range");
    if (i > 0 && located[i] == located[i - 1])
      throw std::invalid_argument("located indices must be distinct");
  }

  // Ascending subset masks over the sorted indices enumerate located
  // patterns in lexicographic qubit-bitmask order, fixing tie-breaks.
  DecodeResult best;
  int best_weight = std::numeric_limits<int>::max();
  for (std::uint32_t sub = 0; sub < (1u << m); ++sub) {
    std::uint32_t lmask = 0;
    for (int i = 0; i < m; ++i)
      if (sub & (1u << i)) lmask |= 1u << located[i];
    const std::uint32_t u =
        code.decode_array[input.syndrome ^ syndrome(code, lmask)];
    const int w = std::popcount(u);
    if (w < best_weight) {
      best_weight = w;
      best.correction = u ^ lmask;
      best.located_crash = false;
    } else if (w == best_weight &&
               !code.in_row_space(best.correction ^ u ^ lmask)) {
      best.located_crash = true;
    }
  }
  return best;
}

}  // namespace ftsim
