#include "twin_run.hpp"

#include <algorithm>
#include <cassert>
#include <sstream>

#include "ftsim/cluster_graph.hpp"

namespace ftsim::test {

int fuse_oracle(Tableau& t, int a, int b, const std::vector<int>& nbrs_b,
                int forced, Rng* rng) {
  t.cnot(a, b);
  Tableau::MeasResult m = t.measure_z(b, forced, rng);
  assert(!m.deterministic && "fusion measurement must be a coin flip");
  if (m.outcome) {
    for (int q : nbrs_b) t.pauli_z(q);
    t.pauli_x(b);
  }
  return m.outcome;
}

TwinResult run_twin(const TwinInstance& inst, Rng& rng) {
  ClusterGraph g;
  for (int i = 0; i < inst.n; ++i) g.add_node();
  std::vector<std::pair<int, int>> edges;
  for (const TwinBond& b : inst.bonds) {
    g.add_bond(b.a, b.b,
               b.vertical ? BondKind::Vertical : BondKind::Horizontal);
    edges.emplace_back(b.a, b.b);
  }
  Tableau clean = graph_state(inst.n, edges);
  Tableau err = graph_state(inst.n, edges);

  TwinResult res;
  auto fail = [&](int step, const std::string& what) {
    if (!res.ok) return;
    res.ok = false;
    std::ostringstream os;
    os << "step " << step << ": " << what;
    res.detail = os.str();
  };

  // Nodes that have received a hand-off hold teleported content; the Z
  // measurement rule only models cutting fresh nodes (the protocols mark
  // a row as located instead of tracking through such a cut).
  std::vector<char> woven(inst.n, 0);
  auto check_fresh = [&](int step, int q) {
    if (woven[q])
      fail(step, "Z measurement of a node holding teleported content at "
                 "node " + std::to_string(q));
  };

  // Measures q in both runs. Random branches share the clean run's bit;
  // if a tracker flip is supplied and the reference is deterministic,
  // the outcome difference must equal it.
  auto measure_both = [&](int step, int q, bool xbasis, int tracker_flip) {
    Tableau::MeasResult mc = xbasis ? clean.measure_x(q, -1, &rng)
                                    : clean.measure_z(q, -1, &rng);
    Tableau::MeasResult me;
    if (mc.deterministic) {
      me = xbasis ? err.measure_x(q) : err.measure_z(q);
    } else {
      me = xbasis ? err.measure_x(q, mc.outcome)
                  : err.measure_z(q, mc.outcome);
    }
    if (me.deterministic != mc.deterministic)
      fail(step, "randomness differs between runs at node " +
                     std::to_string(q));
    if (mc.deterministic && tracker_flip >= 0) {
      ++res.flips_compared;
      if ((mc.outcome ^ me.outcome) != tracker_flip)
        fail(step, "flip mismatch at node " + std::to_string(q) +
                       ": tracker " + std::to_string(tracker_flip) +
                       ", oracle " + std::to_string(mc.outcome ^ me.outcome));
    }
    if (mc.outcome) clean.pauli_x(q);
    if (me.outcome) err.pauli_x(q);
  };

  for (int si = 0; si < static_cast<int>(inst.steps.size()); ++si) {
    const TwinStep& s = inst.steps[si];
    switch (s.kind) {
      case TwinStep::Kind::Inject:
        g.err(s.a).phys ^= s.pauli;
        if (s.pauli.x) err.pauli_x(s.a);
        if (s.pauli.z) err.pauli_z(s.a);
        break;
      case TwinStep::Kind::FuseOk: {
        std::vector<int> nbrs_b;
        for (const auto& e : g.bonds(s.b)) nbrs_b.push_back(e.to);
        g.fuse_success(s.a, s.b);
        int shared = fuse_oracle(clean, s.a, s.b, nbrs_b, -1, &rng);
        fuse_oracle(err, s.a, s.b, nbrs_b, shared);
        break;
      }
      case TwinStep::Kind::FuseFail:
        check_fresh(si, s.a);
        check_fresh(si, s.b);
        measure_both(si, s.a, false, g.measure_z(s.a));
        measure_both(si, s.b, false, g.measure_z(s.b));
        break;
      case TwinStep::Kind::MeasX: {
        // A terminating measurement on a still-entangled node is only
        // meaningful when its noise-free outcome is predetermined (as
        // syndrome reads are); the instance is malformed otherwise.
        // Both the hand-off target and the vertical-stage partners end up
        // entangled beyond their remaining bonds; content can only be
        // handed to a node that has not been woven yet.
        int horiz = 0;
        for (const auto& e : g.bonds(s.a)) {
          if (e.kind == BondKind::Horizontal) {
            ++horiz;
            if (woven[e.to])
              fail(si, "hand-off into a node already holding teleported "
                       "content at node " + std::to_string(e.to));
          }
          woven[e.to] = 1;
        }
        if (horiz == 0) {
          Tableau px = clean;
          if (!px.measure_x(s.a, 0).deterministic) {
            Tableau pz = clean;
            if (!pz.measure_z(s.a, 0).deterministic)
              fail(si, "undetermined terminating measurement on an "
                       "entangled node " + std::to_string(s.a));
          }
        }
        auto flip = g.measure_x(s.a);
        measure_both(si, s.a, true, flip ? *flip : -1);
        break;
      }
      case TwinStep::Kind::MeasZ:
        check_fresh(si, s.a);
        measure_both(si, s.a, false, g.measure_z(s.a));
        break;
    }
    if (!res.ok) return res;
  }

  // Survivors must relate the two final states by their predicted total
  // error. A pending frame X on a node additionally promises a Z to each
  // neighbor it is still bonded to: that is what the vertical-stage and
  // hand-off rules would deliver once the node is eventually measured.
  for (int i = 0; i < inst.n; ++i) {
    if (!g.alive(i)) continue;
    const PauliBits total = g.err(i).phys ^ g.err(i).frame;
    if (total.x) err.pauli_x(i);
    if (total.z) err.pauli_z(i);
    if (g.err(i).frame.x)
      for (const auto& e : g.bonds(i)) err.pauli_z(e.to);
  }
  if (!Tableau::same_state(err, clean))
    fail(static_cast<int>(inst.steps.size()),
         "residual error does not map the noisy state onto the clean one");
  return res;
}

namespace {

// Generator-side mirror of the evolving cluster: oriented wires (left to
// right) plus vertical couplings, as the protocols build them.
struct Mirror {
  std::vector<int> left, right;
  std::vector<std::vector<int>> vert;
  std::vector<char> alive, woven;

  explicit Mirror(int n)
      : left(n, -1), right(n, -1), vert(n), alive(n, 1), woven(n, 0) {}

  void unlink_vertical(int q) {
    for (int v : vert[q]) {
      auto& w = vert[v];
      w.erase(std::find(w.begin(), w.end(), q));
    }
    vert[q].clear();
  }

  void kill(int q) {
    if (left[q] >= 0) right[left[q]] = -1;
    if (right[q] >= 0) left[right[q]] = -1;
    left[q] = right[q] = -1;
    unlink_vertical(q);
    alive[q] = 0;
  }

  std::vector<int> neighbors(int q) const {
    std::vector<int> out;
    if (left[q] >= 0) out.push_back(left[q]);
    if (right[q] >= 0) out.push_back(right[q]);
    out.insert(out.end(), vert[q].begin(), vert[q].end());
    return out;
  }
};

}  // namespace

TwinInstance random_twin_instance(Rng& rng, int max_nodes, int max_inject) {
  TwinInstance inst;
  const int n = 2 + static_cast<int>(rng.next_below(max_nodes - 1));
  inst.n = n;

  // Chop 0..n-1 into consecutive wires.
  Mirror m(n);
  std::vector<int> wire_of(n);
  std::vector<std::vector<int>> wires;
  for (int i = 0; i < n;) {
    const int len =
        1 + static_cast<int>(rng.next_below(std::min(4, n - i)));
    std::vector<int> w;
    for (int j = i; j < i + len; ++j) {
      w.push_back(j);
      wire_of[j] = static_cast<int>(wires.size());
      if (j > i) {
        m.left[j] = j - 1;
        m.right[j - 1] = j;
        inst.bonds.push_back({j - 1, j, false});
      }
    }
    wires.push_back(std::move(w));
    i += len;
  }

  auto bonded = [&](int a, int b) {
    if (m.left[a] == b || m.right[a] == b) return true;
    return std::find(m.vert[a].begin(), m.vert[a].end(), b) !=
           m.vert[a].end();
  };

  const int verticals = static_cast<int>(rng.next_below(n));
  for (int t = 0; t < verticals; ++t) {
    int a = static_cast<int>(rng.next_below(n));
    int b = static_cast<int>(rng.next_below(n));
    if (a == b || wire_of[a] == wire_of[b] || bonded(a, b)) continue;
    inst.bonds.push_back({a, b, true});
    m.vert[a].push_back(b);
    m.vert[b].push_back(a);
  }

  // The noise-free state carried along to decide which measurements have
  // a predetermined outcome (a branch-independent property).
  Tableau probe = [&] {
    std::vector<std::pair<int, int>> edges;
    for (const TwinBond& b : inst.bonds) edges.emplace_back(b.a, b.b);
    return graph_state(n, edges);
  }();
  auto probe_measure = [&](int q, bool xbasis) {
    Tableau::MeasResult r =
        xbasis ? probe.measure_x(q, 0) : probe.measure_z(q, 0);
    if (r.outcome) probe.pauli_x(q);
    return r;
  };

  // Fusions first, while everything is still frame-clean: successes join
  // one wire's tail to another's head; failures Z-measure both inputs.
  // Successes come before failures, as in a simultaneous attempt group.
  for (int t = 0; t < 2; ++t) {
    if (!rng.bernoulli(0.4)) continue;
    const int w1 = static_cast<int>(rng.next_below(wires.size()));
    const int w2 = static_cast<int>(rng.next_below(wires.size()));
    if (w1 == w2 || wires[w1].empty() || wires[w2].empty()) continue;
    const int a = wires[w1].back();
    const int b = wires[w2].front();
    if (bonded(a, b)) continue;
    bool overlap = false;
    auto na = m.neighbors(a), nb = m.neighbors(b);
    for (int x : na)
      if (std::find(nb.begin(), nb.end(), x) != nb.end()) overlap = true;
    if (overlap) continue;
    inst.steps.push_back({TwinStep::Kind::FuseOk, a, b, {}});
    // Splice: a inherits b's rightward continuation and couplings.
    m.right[a] = m.right[b];
    if (m.right[b] >= 0) m.left[m.right[b]] = a;
    for (int v : m.vert[b]) {
      std::replace(m.vert[v].begin(), m.vert[v].end(), b, a);
      m.vert[a].push_back(v);
    }
    m.vert[b].clear();
    m.left[b] = m.right[b] = -1;
    m.alive[b] = 0;
    wires[w1].insert(wires[w1].end(), wires[w2].begin() + 1,
                     wires[w2].end());
    for (size_t k = 1; k < wires[w2].size(); ++k)
      wire_of[wires[w2][k]] = w1;
    wires[w2].clear();
    fuse_oracle(probe, a, b, nb, 0);
  }
  for (int t = 0; t < 2; ++t) {
    if (!rng.bernoulli(0.4)) continue;
    const int w1 = static_cast<int>(rng.next_below(wires.size()));
    const int w2 = static_cast<int>(rng.next_below(wires.size()));
    if (w1 == w2 || wires[w1].empty() || wires[w2].empty()) continue;
    const int a = wires[w1].back();
    const int b = wires[w2].front();
    if (bonded(a, b)) continue;
    inst.steps.push_back({TwinStep::Kind::FuseFail, a, b, {}});
    m.kill(a);
    m.kill(b);
    wires[w1].pop_back();
    wires[w2].erase(wires[w2].begin());
    probe_measure(a, false);
    probe_measure(b, false);
  }

  // Measurement phase: X measurements sweep each wire left to right; Z
  // measurements may cut anywhere. Some nodes survive to the end.
  std::vector<char> survivor(n, 0);
  for (int i = 0; i < n; ++i)
    if (m.alive[i] && rng.bernoulli(0.15)) survivor[i] = 1;

  for (;;) {
    std::vector<int> heads, others;
    for (int i = 0; i < n; ++i) {
      if (!m.alive[i] || survivor[i]) continue;
      (m.left[i] < 0 ? heads : others).push_back(i);
    }
    if (heads.empty() && others.empty()) break;
    if (!others.empty() && (heads.empty() || rng.bernoulli(0.15))) {
      // Mid-wire node: only a Z measurement (a cut) is in order here,
      // and only while the node is still fresh.
      const int q = others[rng.next_below(others.size())];
      if (m.woven[q] || (heads.empty() && rng.bernoulli(0.5))) {
        survivor[q] = 1;  // blocked behind a survivor; sometimes keep it
        continue;
      }
      inst.steps.push_back({TwinStep::Kind::MeasZ, q, -1, {}});
      m.kill(q);
      probe_measure(q, false);
      continue;
    }
    const int q = heads[rng.next_below(heads.size())];
    const int succ = m.right[q];
    // A hand-off needs a fresh successor, a terminating read needs a
    // predetermined outcome or a disentangled node, and a cut needs the
    // node itself to be fresh. A head none of these fit survives.
    bool as_x = succ < 0 || !m.woven[succ];
    if (as_x) {
      as_x = m.woven[q] || rng.bernoulli(0.75);
      if (as_x && succ < 0) {
        Tableau px = probe;
        if (!px.measure_x(q, 0).deterministic) {
          Tableau pz = probe;
          if (!pz.measure_z(q, 0).deterministic) as_x = false;
        }
      }
    }
    if (!as_x && m.woven[q]) {
      survivor[q] = 1;
      continue;
    }
    if (as_x) {
      if (succ >= 0) m.woven[succ] = 1;
      for (int v : m.vert[q]) m.woven[v] = 1;
    }
    inst.steps.push_back(
        {as_x ? TwinStep::Kind::MeasX : TwinStep::Kind::MeasZ, q, -1, {}});
    m.kill(q);
    probe_measure(q, as_x);
  }

  const int inject = static_cast<int>(rng.next_below(max_inject + 1));
  for (int t = 0; t < inject; ++t) {
    const int pos =
        static_cast<int>(rng.next_below(inst.steps.size() + 1));
    std::vector<char> live(n, 1);
    for (int i = 0; i < pos; ++i) {
      const TwinStep& s = inst.steps[i];
      switch (s.kind) {
        case TwinStep::Kind::Inject:
          break;
        case TwinStep::Kind::FuseOk:
          live[s.b] = 0;
          break;
        case TwinStep::Kind::FuseFail:
          live[s.a] = 0;
          live[s.b] = 0;
          break;
        default:
          live[s.a] = 0;
      }
    }
    std::vector<int> cands;
    for (int i = 0; i < n; ++i)
      if (live[i]) cands.push_back(i);
    if (cands.empty()) continue;
    const int tgt = cands[rng.next_below(cands.size())];
    const PauliBits p =
        pauli_from_index(1 + static_cast<int>(rng.next_below(3)));
    inst.steps.insert(inst.steps.begin() + pos,
                      {TwinStep::Kind::Inject, tgt, -1, p});
  }
  return inst;
}

int run_twin_batch(std::uint64_t master_seed, int count,
                   std::string* first_detail) {
  int failures = 0;
  for (int i = 0; i < count; ++i) {
    Rng rng = Rng::for_trial(master_seed, 0, static_cast<std::uint64_t>(i));
    TwinInstance inst = random_twin_instance(rng);
    TwinResult r = run_twin(inst, rng);
    if (!r.ok) {
      ++failures;
      if (first_detail && failures == 1) {
        std::ostringstream os;
        os << "instance " << i << ": " << r.detail;
        *first_detail = os.str();
      }
    }
  }
  return failures;
}

}  // namespace ftsim::test
