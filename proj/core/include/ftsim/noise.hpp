#pragma once

namespace ftsim {

// Physical noise knobs shared by the cluster and deterministic models.
//
// epsilon is the depolarization strength per elementary operation: after
// Bell-pair preparation a joint two-qubit channel of strength epsilon acts
// on the pair, fusion inputs each receive the two-qubit channel before the
// gate, and single-qubit operations (memory steps, measurements) receive a
// single-qubit channel of strength epsilon before they act.
//
// gamma is the probability of photon loss per qubit per time step. Inside
// postselected constructions detected loss forces a rebuild and is folded
// into the expected cost instead of being sampled.
//
// memory_noise disables both loss and depolarization for memory steps when
// false; operation noise is unaffected.
struct NoiseParams {
  double epsilon = 0.0;
  double gamma = 0.0;
  bool memory_noise = true;
};

}  // namespace ftsim
