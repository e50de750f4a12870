#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ftsim/rng.hpp"

namespace ftsim {

enum class LogicalClass { I, X, Z, Y };

// Self-dual CSS code: the same parity rows serve as X- and Z-sector
// checks. Bit q of a mask refers to qubit q. Immutable after build.
struct CssCode {
  std::string name;
  int n = 0;
  std::vector<std::uint32_t> checks;        // r parity rows
  std::uint32_t logical_rep = 0;            // weight-minimal logical support
  std::vector<std::uint32_t> decode_array;  // syndrome -> min-weight pattern

  int num_checks() const { return static_cast<int>(checks.size()); }

  // Membership in the span of the check rows (trivial residuals).
  bool in_row_space(std::uint32_t v) const;

  // Reduced basis of the check rows with descending leading bits.
  std::vector<std::uint32_t> row_basis;
};

CssCode steane_code();
CssCode golay_code();

// "steane7" or "golay23"; throws std::invalid_argument otherwise.
const CssCode& code_by_name(std::string_view name);

// Parity of each check row against the error pattern, bit i = row i.
std::uint32_t syndrome(const CssCode& code, std::uint32_t error_bits);

// Classifies zero-syndrome residuals per sector as trivial or logical.
LogicalClass logical_class(const CssCode& code, std::uint32_t residual_x,
                           std::uint32_t residual_z);

struct ReorderResult {
  std::vector<int> permutation;  // permuted column j = original column perm[j]
  int depth = 0;
};

// Searches random column orders of the check matrix for the one whose
// re-standardized encoding + verification circuit schedules shortest.
// tries = 0 returns the identity order and its baseline depth.
ReorderResult reorder_for_depth(const CssCode& code, Rng& rng, int tries);

// Depth of one column order under the scheduling metric (greedy list
// schedule, one CNOT per qubit per step); exposed for circuit builders.
int circuit_depth(const CssCode& code, const std::vector<int>& permutation);

}  // namespace ftsim
