#pragma once

#include <cstdint>
#include <vector>

#include "ftsim/css_code.hpp"

namespace ftsim {

// One sector's decoding problem: the measured syndrome plus the qubits
// flagged as located (erased). Indices distinct, in [0, n).
struct DecodeInput {
  std::uint32_t syndrome = 0;
  std::vector<int> located;
};

struct DecodeResult {
  std::uint32_t correction = 0;
  bool located_crash = false;
};

// Maximum-likelihood decoding of one sector. Loops over every pattern
// of flips inside the located set, decodes the remaining syndrome, and
// keeps the candidate with the lightest unlocated part (lexicographic
// first on ties). located_crash is set when minimizing candidates
// disagree by a logical operator.
DecodeResult ml_decode(const CssCode& code, const DecodeInput& input);

}  // namespace ftsim
