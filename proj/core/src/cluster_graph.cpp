#include "ftsim/cluster_graph.hpp"

#include <algorithm>
#include <cassert>

namespace ftsim {

NodeError propagate_x_measure_horizontal(const NodeError& q1,
                                         const NodeError& q2) {
  NodeError out = q2;
  out.frame.x = q2.frame.x ^ q1.phys.z ^ q1.frame.z;
  out.frame.z = q2.frame.z ^ q1.frame.x;
  return out;
}

std::pair<NodeError, NodeError> propagate_vertical_stage(const NodeError& q1,
                                                         const NodeError& q3) {
  NodeError n1 = q1, n3 = q3;
  n1.frame.z = q1.frame.z ^ q3.frame.x;
  n3.frame.z = q3.frame.z ^ q1.frame.x;
  return {n1, n3};
}

int measure_terminating_x(const NodeError& q) {
  return (q.phys.z ^ q.frame.z) ? 1 : 0;
}

int ClusterGraph::add_node(NodeRole role) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{NodeError{}, role, true});
  adj_.emplace_back();
  ++alive_count_;
  if (observer_) observer_->node_added(id);
  return id;
}

void ClusterGraph::add_bond(int a, int b, BondKind kind) {
  assert(a != b);
  assert(nodes_[a].alive && nodes_[b].alive);
  assert(!has_bond(a, b));
  adj_[a].push_back(Bond{b, kind});
  adj_[b].push_back(Bond{a, kind});
  if (observer_) observer_->bond_added(a, b, kind);
}

void ClusterGraph::inject(int id, PauliBits p) {
  assert(nodes_[id].alive);
  nodes_[id].err.phys ^= p;
  if (observer_) observer_->injected(id, p);
}

bool ClusterGraph::has_bond(int a, int b) const {
  for (const Bond& e : adj_[a]) {
    if (e.to == b) return true;
  }
  return false;
}

void ClusterGraph::remove_bond_entry(int from, int to) {
  auto& v = adj_[from];
  for (auto it = v.begin(); it != v.end(); ++it) {
    if (it->to == to) {
      v.erase(it);
      return;
    }
  }
  assert(false && "bond entry missing");
}

void ClusterGraph::remove_node(int id) {
  for (const Bond& e : adj_[id]) remove_bond_entry(e.to, id);
  adj_[id].clear();
  nodes_[id].alive = false;
  --alive_count_;
}

std::optional<int> ClusterGraph::measure_x(int id) {
  assert(nodes_[id].alive);

  std::vector<int> vertical;
  int succ = -1;
  for (const Bond& e : adj_[id]) {
    if (e.kind == BondKind::Vertical) {
      vertical.push_back(e.to);
    } else {
      assert(succ < 0 && "more than one live horizontal bond at X measurement");
      succ = e.to;
    }
  }
  std::sort(vertical.begin(), vertical.end());
  for (int v : vertical) {
    auto [nq, nv] = propagate_vertical_stage(nodes_[id].err, nodes_[v].err);
    nodes_[id].err = nq;
    nodes_[v].err = nv;
  }

  std::optional<int> flip;
  if (succ >= 0) {
    nodes_[succ].err =
        propagate_x_measure_horizontal(nodes_[id].err, nodes_[succ].err);
  } else {
    flip = measure_terminating_x(nodes_[id].err);
  }
  remove_node(id);
  if (observer_) observer_->measured_x(id, flip);
  return flip;
}

int ClusterGraph::measure_z(int id) {
  assert(nodes_[id].alive);
  const int x_t = (nodes_[id].err.phys.x ^ nodes_[id].err.frame.x) ? 1 : 0;
  if (x_t) {
    for (const Bond& e : adj_[id]) nodes_[e.to].err.frame.z ^= true;
  }
  remove_node(id);
  if (observer_) observer_->measured_z(id, x_t);
  return x_t;
}

int ClusterGraph::fuse_success(int a, int b) {
  assert(nodes_[a].alive && nodes_[b].alive);
  assert(nodes_[a].err.frame.identity() && nodes_[b].err.frame.identity() &&
         "fusion inputs must be frame-clean");
  assert(!has_bond(a, b));

  std::vector<int> nbrs_b;
  if (observer_) {
    nbrs_b.reserve(adj_[b].size());
    for (const Bond& e : adj_[b]) nbrs_b.push_back(e.to);
  }

  if (nodes_[b].err.phys.x) {
    for (const Bond& e : adj_[a]) nodes_[e.to].err.phys.z ^= true;
  }
  if (nodes_[a].err.phys.x) {
    for (const Bond& e : adj_[b]) nodes_[e.to].err.phys.z ^= true;
  }

  nodes_[a].err.phys ^= nodes_[b].err.phys;
  auto moved = adj_[b];
  for (const Bond& e : moved) {
    remove_bond_entry(e.to, b);
    adj_[e.to].push_back(Bond{a, e.kind});
    adj_[a].push_back(Bond{e.to, e.kind});
  }
  adj_[b].clear();
  nodes_[b].alive = false;
  --alive_count_;
  if (observer_) observer_->fused(a, b, nbrs_b);
  return a;
}

void ClusterGraph::fuse_failure(int a, int b) {
  measure_z(a);
  measure_z(b);
}

void ClusterGraph::lose_node(int id) {
  assert(nodes_[id].alive);
  remove_node(id);
  if (observer_) observer_->lost(id);
}

}  // namespace ftsim
