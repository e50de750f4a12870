#include "ftsim/css_code.hpp"

#include <algorithm>
#include <bit>
#include <cassert>
#include <stdexcept>

namespace ftsim {
namespace {

// Reduced GF(2) basis of the given rows, leading (highest) bits distinct
// and each cleared from every other row. Rows sorted descending.
std::vector<std::uint32_t> reduced_basis(std::vector<std::uint32_t> rows) {
  std::vector<std::uint32_t> basis;
  for (std::uint32_t row : rows) {
    for (std::uint32_t b : basis) row = std::min(row, row ^ b);
    if (!row) continue;
    for (std::uint32_t& b : basis) b = std::min(b, b ^ row);
    basis.push_back(row);
  }
  std::sort(basis.rbegin(), basis.rend());
  return basis;
}

bool reduces_to_zero(const std::vector<std::uint32_t>& basis, std::uint32_t v) {
  for (std::uint32_t b : basis) v = std::min(v, v ^ b);
  return v == 0;
}

// Row echelon form with pivots at the lowest set bits, pivot columns
// cleared elsewhere, rows ordered by ascending pivot. Matches the
// left-standard form [I | P] when the leading columns are independent.
std::vector<std::uint32_t> left_rref(std::vector<std::uint32_t> rows, int n) {
  std::vector<std::uint32_t> out;
  for (int col = 0; col < n; ++col) {
    const std::uint32_t bit = 1u << col;
    auto it = std::find_if(rows.begin(), rows.end(),
                           [&](std::uint32_t r) { return r & bit; });
    if (it == rows.end()) continue;
    const std::uint32_t pivot = *it;
    rows.erase(it);
    for (std::uint32_t& r : rows)
      if (r & bit) r ^= pivot;
    for (std::uint32_t& r : out)
      if (r & bit) r ^= pivot;
    out.push_back(pivot);
  }
  return out;
}

// Visits every n-bit mask of the given weight in ascending order.
template <typename F>
void for_each_of_weight(int n, int weight, F&& visit) {
  if (weight == 0) {
    visit(0u);
    return;
  }
  std::uint32_t mask = (1u << weight) - 1;
  const std::uint32_t limit = 1u << n;
  while (mask < limit) {
    visit(mask);
    const std::uint32_t low = mask & -mask;
    const std::uint32_t ripple = mask + low;
    mask = ripple | (((mask ^ ripple) >> 2) / low);
  }
}

std::vector<std::uint32_t> build_decode_array(int n,
                                              const CssCode& partial) {
  const std::size_t size = 1u << partial.checks.size();
  std::vector<std::uint32_t> table(size, 0);
  std::vector<bool> seen(size, false);
  std::size_t filled = 0;
  for (int w = 0; w <= n && filled < size; ++w) {
    for_each_of_weight(n, w, [&](std::uint32_t e) {
      const std::uint32_t s = syndrome(partial, e);
      if (!seen[s]) {
        seen[s] = true;
        table[s] = e;
        ++filled;
      }
    });
  }
  assert(filled == size);
  return table;
}

// Weight-minimal codeword outside the check row space; ties broken by
// numeric value so the choice is deterministic.
std::uint32_t find_logical_rep(const CssCode& partial, int n) {
  const auto rref = left_rref(partial.checks, n);
  std::uint32_t pivot_cols = 0;
  for (std::uint32_t r : rref) pivot_cols |= r & -r;

  std::vector<std::uint32_t> gen;
  for (int f = 0; f < n; ++f) {
    if (pivot_cols & (1u << f)) continue;
    std::uint32_t word = 1u << f;
    for (std::uint32_t r : rref)
      if (r & (1u << f)) word |= r & -r;
    assert(syndrome(partial, word) == 0);
    gen.push_back(word);
  }

  std::uint32_t best = 0;
  int best_weight = n + 1;
  const std::uint32_t combos = 1u << gen.size();
  for (std::uint32_t c = 1; c < combos; ++c) {
    std::uint32_t word = 0;
    for (std::size_t i = 0; i < gen.size(); ++i)
      if (c & (1u << i)) word ^= gen[i];
    if (partial.in_row_space(word)) continue;
    const int w = std::popcount(word);
    if (w < best_weight || (w == best_weight && word < best)) {
      best_weight = w;
      best = word;
    }
  }
  assert(best != 0);
  return best;
}

CssCode make_code(std::string name, int n,
                  std::vector<std::uint32_t> checks) {
  CssCode code;
  code.name = std::move(name);
  code.n = n;
  code.checks = std::move(checks);
  code.row_basis = reduced_basis(code.checks);
  assert(code.row_basis.size() == code.checks.size());
  for (std::size_t i = 0; i < code.checks.size(); ++i)
    for (std::size_t j = i; j < code.checks.size(); ++j)
      assert(std::popcount(code.checks[i] & code.checks[j]) % 2 == 0);
  code.logical_rep = find_logical_rep(code, n);
  code.decode_array = build_decode_array(n, code);
  return code;
}

// Generator polynomial of the length-23 cyclic code, bit i = x^i.
constexpr std::uint32_t kGolayGen = 0b1100'0111'0101;

std::vector<std::uint32_t> golay_checks() {
  std::vector<std::uint32_t> gen;
  for (int i = 0; i < 12; ++i) gen.push_back(kGolayGen << i);
  const auto sys = left_rref(gen, 23);
  assert(sys.size() == 12);
  std::vector<std::uint32_t> checks;
  for (int c = 0; c < 11; ++c) {
    std::uint32_t row = 1u << (12 + c);
    for (int j = 0; j < 12; ++j)
      if (sys[j] & (1u << (12 + c))) row |= 1u << j;
    checks.push_back(row);
  }
  return checks;
}

}  // namespace

bool CssCode::in_row_space(std::uint32_t v) const {
  return reduces_to_zero(row_basis, v);
}

CssCode steane_code() {
  return make_code("steane7", 7, {0x78, 0x66, 0x55});
}

CssCode golay_code() { return make_code("golay23", 23, golay_checks()); }

const CssCode& code_by_name(std::string_view name) {
  static const CssCode steane = steane_code();
  static const CssCode golay = golay_code();
  if (name == "steane7") return steane;
  if (name == "golay23") return golay;
  throw std::invalid_argument("unknown code: " + std::string(name));
}

std::uint32_t syndrome(const CssCode& code, std::uint32_t error_bits) {
  std::uint32_t s = 0;
  for (std::size_t i = 0; i < code.checks.size(); ++i)
    s |= static_cast<std::uint32_t>(std::popcount(code.checks[i] & error_bits) & 1)
         << i;
  return s;
}

LogicalClass logical_class(const CssCode& code, std::uint32_t residual_x,
                           std::uint32_t residual_z) {
  assert(syndrome(code, residual_x) == 0);
  assert(syndrome(code, residual_z) == 0);
  const bool lx = !code.in_row_space(residual_x);
  const bool lz = !code.in_row_space(residual_z);
  if (lx && lz) return LogicalClass::Y;
  if (lx) return LogicalClass::X;
  if (lz) return LogicalClass::Z;
  return LogicalClass::I;
}

// Depth metric. The ancilla network prepares pivot qubits in |+> and
// applies, per standardized check row, CNOTs from the pivot onto the
// row's other qubits; every qubit of each row is then coupled once more
// onto that row's fresh verification ancilla. With one CNOT per qubit
// per time step the schedule length is set by the busiest wire, so the
// depth is the maximum gate count over all wires: a pivot carries
// (row weight - 1) controls plus one verification coupling, any other
// data qubit carries one target plus one coupling per row containing
// it, and a verification ancilla carries its row's weight.
int circuit_depth(const CssCode& code, const std::vector<int>& permutation) {
  assert(static_cast<int>(permutation.size()) == code.n);
  std::vector<std::uint32_t> rows;
  for (std::uint32_t r : code.checks) {
    std::uint32_t p = 0;
    for (int j = 0; j < code.n; ++j)
      if (r & (1u << permutation[j])) p |= 1u << j;
    rows.push_back(p);
  }
  const auto std_rows = left_rref(rows, code.n);
  std::vector<int> load(code.n + std_rows.size(), 0);
  for (std::size_t i = 0; i < std_rows.size(); ++i) {
    const std::uint32_t r = std_rows[i];
    const int w = std::popcount(r);
    const int pivot = std::countr_zero(r);
    load[pivot] += w;  // w - 1 controls + 1 coupling
    for (int j = 0; j < code.n; ++j)
      if (j != pivot && (r & (1u << j))) load[j] += 2;  // target + coupling
    load[code.n + i] = w;
  }
  return *std::max_element(load.begin(), load.end());
}

ReorderResult reorder_for_depth(const CssCode& code, Rng& rng, int tries) {
  ReorderResult best;
  best.permutation.resize(code.n);
  for (int i = 0; i < code.n; ++i) best.permutation[i] = i;
  best.depth = circuit_depth(code, best.permutation);
  std::vector<int> perm = best.permutation;
  for (int t = 0; t < tries; ++t) {
    rng.shuffle(perm);
    const int d = circuit_depth(code, perm);
    if (d < best.depth) {
      best.depth = d;
      best.permutation = perm;
    }
  }
  return best;
}

}  // namespace ftsim
