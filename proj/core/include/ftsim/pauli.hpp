#pragma once

#include "ftsim/rng.hpp"

namespace ftsim {

// Pauli modulo phase: (x,z) with X=(1,0), Z=(0,1), Y=(1,1).
struct PauliBits {
  bool x = false;
  bool z = false;

  PauliBits& operator^=(PauliBits o) {
    x ^= o.x;
    z ^= o.z;
    return *this;
  }
  friend PauliBits operator^(PauliBits a, PauliBits b) { return a ^= b; }
  friend bool operator==(PauliBits a, PauliBits b) = default;
  bool identity() const { return !x && !z; }
};

// Error state carried by one cluster node: the actual (unknown) physical
// error and the recorded frame of known byproduct operators.
struct NodeError {
  PauliBits phys;
  PauliBits frame;
};

// k in {0,1,2,3} = I,X,Y,Z.
inline PauliBits pauli_from_index(unsigned k) {
  return PauliBits{(k == 1) || (k == 2), (k == 2) || (k == 3)};
}

// Single-qubit depolarizing channel: with probability eps apply one of
// X, Y, Z chosen with probability eps/3 each.
inline void depolarize_1q(PauliBits& p, double eps, Rng& rng) {
  if (!rng.bernoulli(eps)) return;
  p ^= pauli_from_index(1 + static_cast<unsigned>(rng.next_below(3)));
}

// Two-qubit depolarizing channel: with probability eps apply one of the 15
// non-identity Pauli pairs with probability eps/15 each.
inline void depolarize_2q(PauliBits& a, PauliBits& b, double eps, Rng& rng) {
  if (!rng.bernoulli(eps)) return;
  const unsigned k = 1 + static_cast<unsigned>(rng.next_below(15));
  a ^= pauli_from_index(k / 4);
  b ^= pauli_from_index(k % 4);
}

}  // namespace ftsim
