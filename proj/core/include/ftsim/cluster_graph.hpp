#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "ftsim/pauli.hpp"

namespace ftsim {

enum class NodeRole : std::uint8_t { Root, Leaf, Aux };
enum class BondKind : std::uint8_t { Horizontal, Vertical };

// Mirror of every state-changing graph operation, in execution order. Lets
// tests replay a run against an independent state representation and lets
// tools dump the structure as it is built. Callbacks fire after the
// operation; fuse_success additionally reports b's neighbor list from just
// before the merge, which is what a replay needs.
class ClusterObserver {
 public:
  virtual ~ClusterObserver() = default;
  virtual void node_added(int /*id*/) {}
  virtual void bond_added(int /*a*/, int /*b*/, BondKind /*kind*/) {}
  virtual void injected(int /*id*/, PauliBits /*p*/) {}
  virtual void fused(int /*a*/, int /*b*/, const std::vector<int>& /*nbrs_b*/) {}
  virtual void measured_x(int /*id*/, const std::optional<int>& /*flip*/) {}
  virtual void measured_z(int /*id*/, int /*flip*/) {}
  virtual void lost(int /*id*/) {}
};

// Graph-state error tracker. Stores only the per-node error description plus
// bond topology; no quantum state is ever represented. Measurements update
// errors by the standard propagation rules and delete the measured node.
class ClusterGraph {
 public:
  struct Bond {
    int to;
    BondKind kind;
  };

  int add_node(NodeRole role = NodeRole::Aux);
  void add_bond(int a, int b, BondKind kind);

  void set_observer(ClusterObserver* obs) { observer_ = obs; }

  // Multiplies a fresh physical error onto a node (noise deposit).
  void inject(int id, PauliBits p);

  int num_ids() const { return static_cast<int>(nodes_.size()); }
  int num_alive() const { return alive_count_; }
  bool alive(int id) const { return nodes_[id].alive; }
  NodeRole role(int id) const { return nodes_[id].role; }
  void set_role(int id, NodeRole role) { nodes_[id].role = role; }
  NodeError& err(int id) { return nodes_[id].err; }
  const NodeError& err(int id) const { return nodes_[id].err; }
  const std::vector<Bond>& bonds(int id) const { return adj_[id]; }
  bool has_bond(int a, int b) const;

  // X-basis measurement. Vertical bonds are resolved first (ascending
  // neighbor id), then the node hands off through its horizontal bond if one
  // remains (at most one may remain: the rightward wire bond). With no
  // horizontal bond the node is terminating and the outcome-flip bit
  // z_phys + z_frame is returned; interior measurements return nothing.
  std::optional<int> measure_x(int id);

  // Z-basis measurement: outcome flip x_phys + x_frame, every surviving
  // neighbor's frame gains Z to that power, node deleted.
  int measure_z(int id);

  // Successful fusion: neighbors of each input gain a physical Z powered by
  // the other input's physical x bit; the merged node (reusing a's id) keeps
  // the XOR of physical errors and the union of both bond sets. Inputs must
  // be frame-clean and non-adjacent.
  int fuse_success(int a, int b);

  // Failed fusion: both inputs are Z-measured independently (a first).
  void fuse_failure(int a, int b);

  // Removes a node whose photon was lost before it could be measured. No
  // propagation happens; the caller is responsible for the protocol-level
  // response (marking the row located and randomizing the frame of whichever
  // node was to inherit the content).
  void lose_node(int id);

 private:
  struct Node {
    NodeError err;
    NodeRole role = NodeRole::Aux;
    bool alive = false;
  };

  void remove_node(int id);
  void remove_bond_entry(int from, int to);

  std::vector<Node> nodes_;
  std::vector<std::vector<Bond>> adj_;
  int alive_count_ = 0;
  ClusterObserver* observer_ = nullptr;
};

// The propagation rules as pure functions, exactly as stated; the graph
// methods above are thin wrappers around these.

// Measured node q1 hands off through its rightward horizontal bond to q2.
NodeError propagate_x_measure_horizontal(const NodeError& q1, const NodeError& q2);

// Vertical-bond stage applied when q1 is about to be X-measured; symmetric.
std::pair<NodeError, NodeError> propagate_vertical_stage(const NodeError& q1,
                                                         const NodeError& q3);

// Terminating X measurement: outcome flip bit.
int measure_terminating_x(const NodeError& q);

}  // namespace ftsim
