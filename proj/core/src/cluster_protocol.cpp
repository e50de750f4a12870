#include "ftsim/cluster_protocol.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

#include "ftsim/decoder.hpp"
#include "ftsim/pauli.hpp"
#include "json.hpp"

namespace ftsim {

namespace {

int ceil_log2(int k) {
  int s = 0;
  while ((1 << s) < k) ++s;
  return s;
}

// Reduced row echelon form over GF(2), pivots at the lowest set bits.
std::vector<std::uint32_t> rref(const std::vector<std::uint32_t>& checks, int n,
                                std::vector<int>& pivots) {
  std::vector<std::uint32_t> rows = checks;
  std::vector<std::uint32_t> out;
  pivots.clear();
  for (int bit = 0; bit < n && out.size() < checks.size(); ++bit) {
    int sel = -1;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if ((rows[i] >> bit) & 1u) {
        sel = static_cast<int>(i);
        break;
      }
    }
    if (sel < 0) continue;
    const std::uint32_t r = rows[sel];
    rows.erase(rows.begin() + sel);
    for (auto& x : rows)
      if ((x >> bit) & 1u) x ^= r;
    for (auto& x : out)
      if ((x >> bit) & 1u) x ^= r;
    out.push_back(r);
    pivots.push_back(bit);
  }
  assert(out.size() == checks.size() && "checks must be independent");
  return out;
}

}  // namespace

double sample_microcluster_cost(int k, Rng& rng) {
  if (k <= 1) return 1.0;
  const int ka = (k + 1) / 2;
  const int kb = k / 2;
  double c = 0.0;
  for (;;) {
    c += sample_microcluster_cost(ka, rng) + sample_microcluster_cost(kb, rng);
    if (rng.bernoulli(0.5)) break;
  }
  return c;
}

int microcluster_steps(int k) { return ceil_log2(std::max(k, 1)) + 1; }

namespace {

int microcluster_rec(ClusterGraph& g, int lo, int hi, BondKind kind,
                     double epsilon, Rng& rng, std::vector<int>* leaves) {
  if (hi - lo == 1) {
    const int root = g.add_node(NodeRole::Root);
    const int leaf = g.add_node(NodeRole::Leaf);
    g.add_bond(root, leaf, kind);
    depolarize_2q(g.err(root).phys, g.err(leaf).phys, epsilon, rng);
    if (leaves) leaves->push_back(leaf);
    return root;
  }
  const int mid = lo + (hi - lo + 1) / 2;
  const int a = microcluster_rec(g, lo, mid, kind, epsilon, rng, leaves);
  const int b = microcluster_rec(g, mid, hi, kind, epsilon, rng, leaves);
  depolarize_2q(g.err(a).phys, g.err(b).phys, epsilon, rng);
  return g.fuse_success(a, b);
}

}  // namespace

int build_microcluster(ClusterGraph& g, int k, BondKind kind, double epsilon,
                       Rng& rng, std::vector<int>* leaves) {
  assert(k >= 1);
  return microcluster_rec(g, 0, k, kind, epsilon, rng, leaves);
}

void ClusterTally::count(const TrialOutcome& t) {
  bell_pairs += t.bell_pairs;
  switch (t.kind) {
    case TrialOutcome::Kind::Discarded: ++discarded; break;
    case TrialOutcome::Kind::None: ++n_none; break;
    case TrialOutcome::Kind::Unlocated: ++n_unlocated; break;
    case TrialOutcome::Kind::Located: ++n_located; break;
  }
}

void ClusterTally::merge(const ClusterTally& o) {
  n_unlocated += o.n_unlocated;
  n_located += o.n_located;
  n_none += o.n_none;
  discarded += o.discarded;
  bell_pairs += o.bell_pairs;
}

double ClusterTally::crash_rate() const {
  const double d = static_cast<double>(n_unlocated + n_none);
  return d > 0 ? static_cast<double>(n_unlocated) / d : 0.0;
}

double ClusterTally::sigma_crash_rate() const {
  const double d = static_cast<double>(n_unlocated + n_none);
  return d > 0 ? std::sqrt(static_cast<double>(n_unlocated)) / d : 0.0;
}

double ClusterTally::located_rate() const {
  const double d = static_cast<double>(counted());
  return d > 0 ? static_cast<double>(n_located) / d : 0.0;
}

double ClusterTally::sigma_located_rate() const {
  const double d = static_cast<double>(counted());
  return d > 0 ? std::sqrt(static_cast<double>(n_located)) / d : 0.0;
}

double ClusterTally::mean_bell_pairs() const {
  const double d = static_cast<double>(counted() + discarded);
  return d > 0 ? bell_pairs / d : 0.0;
}

// ---------------------------------------------------------------------------

struct ClusterSimulator::Impl {
  // Conceptual circuit plan for one ancilla block. Concept nodes are the
  // gate anchors, wire start pads, and output roots; memory spans between
  // them are segments of one or two hops (pads are materialized during
  // realization so parities survive).
  struct CNode {
    int wire = -1;
    int parity = 0;
    bool out = false;
  };
  struct Seg {
    int a = -1, b = -1;
    int hops = 1;
    BondKind kind = BondKind::Horizontal;
    bool tree = true;
    bool a_parent = true;  // absorb direction for tree segments
    int wire = -1;         // owning wire; -1 for gate bonds
  };
  struct Plan {
    std::vector<CNode> nodes;
    std::vector<Seg> segs;
    std::vector<std::vector<int>> wire_nodes;  // per wire, concept order
    std::vector<std::vector<int>> wire_segs;   // per wire, segment indices
    std::vector<int> out_node;                 // per code row
    std::vector<int> kh, kv;                   // leaf budgets
    int v_rows = 0, wires = 0, columns = 0, parallel_count = 0;
    int s_mc = 1;  // star construction phases
  };

  struct NodeClock {
    int last_phase = 0;
    bool premeasured = false;
    bool data_region = false;
    bool lost = false;
  };

  struct Star {
    int root = -1;
    double cost = 0.0;
    std::vector<int> h, v;
    std::size_t hi = 0, vi = 0;
    int take(BondKind k) {
      if (k == BondKind::Vertical) {
        assert(vi < v.size());
        return v[vi++];
      }
      assert(hi < h.size());
      return h[hi++];
    }
  };

  CssCode code;
  NoiseParams noise;
  ProtocolConfig cfg;
  Plan plan;
  PlanInfo info;
  int s_chain = 1, span_anc = 5, span_round = 9;

  ClusterGraph g;
  std::vector<NodeClock> clk;
  Rng* rng = nullptr;
  int phase = 0, round_t0 = 0;
  std::vector<int> data_roots;
  std::vector<std::vector<int>> data_leaf;
  std::uint32_t corr_x = 0, corr_z = 0;
  double trial_cost = 0.0;
  std::vector<RowLayout> rows;
  BuildStats stats;
  ClusterObserver* obs = nullptr;
  TamperFn tamper = nullptr;
  void* tamper_ctx = nullptr;

  // Expected-cost accumulator for the construction block being built.
  // cost sums sampled star costs, par collects success-conditioning
  // factors of the block's parallel fusion groups, fold counts the
  // postselected qubit-steps whose loss is repaid by rebuilds.
  struct CostAcc {
    double cost = 0.0, par = 1.0;
    long long fold = 0;
  };
  CostAcc acc;

  double effective(const CostAcc& a) const {
    const double gf = noise.gamma < 1.0 && noise.gamma > 0.0
                          ? std::pow(1.0 / (1.0 - noise.gamma),
                                     static_cast<double>(a.fold))
                          : 1.0;
    return a.cost * a.par * gf;
  }

  Impl(const CssCode& c, const NoiseParams& np, const ProtocolConfig& pc)
      : code(c), noise(np), cfg(pc) {
    build_plan();
  }

  // ---- plan construction ----------------------------------------------

  void build_plan() {
    std::vector<int> pivots;
    const auto enc_rows = rref(code.checks, code.n, pivots);
    const int r = code.num_checks();
    plan.v_rows = r + 1;
    plan.wires = plan.v_rows + code.n;
    const auto data_wire = [&](int q) { return plan.v_rows + q; };

    std::vector<bool> is_pivot(static_cast<std::size_t>(code.n), false);
    for (int p : pivots) is_pivot[static_cast<std::size_t>(p)] = true;

    struct Gate {
      int wc, wt;  // control wire, target wire
    };
    std::vector<Gate> gates;
    for (std::size_t i = 0; i < enc_rows.size(); ++i) {
      for (int q = 0; q < code.n; ++q) {
        if (q == pivots[i] || !((enc_rows[i] >> q) & 1u)) continue;
        gates.push_back({data_wire(pivots[i]), data_wire(q)});
      }
    }
    for (int i = 0; i < r; ++i) {
      for (int q = 0; q < code.n; ++q) {
        if ((code.checks[static_cast<std::size_t>(i)] >> q) & 1u)
          gates.push_back({data_wire(q), i});
      }
    }
    for (int q = 0; q < code.n; ++q) {
      if ((code.logical_rep >> q) & 1u) gates.push_back({data_wire(q), r});
    }

    // Greedy column schedule: one slot per wire per column.
    std::vector<int> next_free(static_cast<std::size_t>(plan.wires), 0);
    struct Anchor {
      int col, parity;
    };
    std::vector<std::vector<Anchor>> anchors(
        static_cast<std::size_t>(plan.wires));
    for (const Gate& gt : gates) {
      const int col = std::max(next_free[static_cast<std::size_t>(gt.wc)],
                               next_free[static_cast<std::size_t>(gt.wt)]);
      next_free[static_cast<std::size_t>(gt.wc)] = col + 1;
      next_free[static_cast<std::size_t>(gt.wt)] = col + 1;
      anchors[static_cast<std::size_t>(gt.wc)].push_back({col, 0});
      anchors[static_cast<std::size_t>(gt.wt)].push_back({col, 1});
      plan.columns = std::max(plan.columns, col + 1);
    }

    // Wire node sequences with parity-matching segment hop counts. Gate
    // bonds are added afterwards, referencing anchors by (wire, position).
    plan.wire_nodes.assign(static_cast<std::size_t>(plan.wires), {});
    plan.wire_segs.assign(static_cast<std::size_t>(plan.wires), {});
    plan.out_node.assign(static_cast<std::size_t>(code.n), -1);
    std::vector<std::vector<int>> anchor_concept(
        static_cast<std::size_t>(plan.wires));
    const int out_parity = 1;  // encoded |+> output column

    for (int w = 0; w < plan.wires; ++w) {
      auto& av = anchors[static_cast<std::size_t>(w)];
      const bool v_wire = w < plan.v_rows;
      const bool pivot_wire =
          !v_wire && is_pivot[static_cast<std::size_t>(w - plan.v_rows)];
      const int p0 = pivot_wire ? 0 : 1;
      auto& seq = plan.wire_nodes[static_cast<std::size_t>(w)];
      int prev = -1, prev_par = p0;
      if (!av.empty() && (av[0].parity & 1) != (p0 & 1)) {
        prev = add_cnode(w, p0);
        seq.push_back(prev);
      }
      for (const Anchor& a : av) {
        const int ci = add_cnode(w, a.parity);
        anchor_concept[static_cast<std::size_t>(w)].push_back(ci);
        if (prev >= 0) add_seg(w, prev, ci, hop_count(prev_par, a.parity));
        seq.push_back(ci);
        prev = ci;
        prev_par = a.parity;
      }
      if (!v_wire) {
        if (prev < 0) {
          prev = add_cnode(w, p0);
          seq.push_back(prev);
        }
        const int ci = add_cnode(w, out_parity);
        plan.nodes[static_cast<std::size_t>(ci)].out = true;
        plan.out_node[static_cast<std::size_t>(w - plan.v_rows)] = ci;
        add_seg(w, prev, ci, hop_count(prev_par, out_parity));
        seq.push_back(ci);
      }
    }

    // Gate bonds, in gate order, resolved to the next unused anchor of the
    // wire (anchors were appended in gate order per wire).
    std::vector<std::size_t> used(static_cast<std::size_t>(plan.wires), 0);
    std::vector<Seg> verticals;
    for (const Gate& gt : gates) {
      const int ca = anchor_concept[static_cast<std::size_t>(
          gt.wc)][used[static_cast<std::size_t>(gt.wc)]++];
      const int cb = anchor_concept[static_cast<std::size_t>(
          gt.wt)][used[static_cast<std::size_t>(gt.wt)]++];
      Seg s;
      s.a = ca;
      s.b = cb;
      s.hops = 1;
      s.kind = BondKind::Vertical;
      s.wire = -1;
      verticals.push_back(s);
    }
    // Verticals precede wire segments for spanning-tree selection.
    std::vector<Seg> wire_segs_flat = std::move(plan.segs);
    plan.segs = std::move(verticals);
    const int vert_count = static_cast<int>(plan.segs.size());
    for (auto& ws : plan.wire_segs)
      for (int& si : ws) si += vert_count;
    plan.segs.insert(plan.segs.end(), wire_segs_flat.begin(),
                     wire_segs_flat.end());

    // Union-find spanning tree; later cycle-closing segments become
    // parallel leaf-to-leaf fusions.
    std::vector<int> uf(plan.nodes.size());
    for (std::size_t i = 0; i < uf.size(); ++i) uf[i] = static_cast<int>(i);
    const auto find = [&](int x) {
      while (uf[static_cast<std::size_t>(x)] != x)
        x = uf[static_cast<std::size_t>(x)] =
            uf[static_cast<std::size_t>(uf[static_cast<std::size_t>(x)])];
      return x;
    };
    for (Seg& s : plan.segs) {
      const int ra = find(s.a), rb = find(s.b);
      if (ra == rb) {
        s.tree = false;
        ++plan.parallel_count;
      } else {
        uf[static_cast<std::size_t>(ra)] = rb;
        s.tree = true;
      }
    }

    // Orient tree segments so every concept node is absorbed through its
    // root at most once (BFS forest, lowest concept index as root).
    std::vector<std::vector<int>> adj(plan.nodes.size());
    for (std::size_t si = 0; si < plan.segs.size(); ++si) {
      if (!plan.segs[si].tree) continue;
      adj[static_cast<std::size_t>(plan.segs[si].a)].push_back(
          static_cast<int>(si));
      adj[static_cast<std::size_t>(plan.segs[si].b)].push_back(
          static_cast<int>(si));
    }
    std::vector<bool> seen(plan.nodes.size(), false);
    std::vector<int> queue;
    for (std::size_t root = 0; root < plan.nodes.size(); ++root) {
      if (seen[root]) continue;
      seen[root] = true;
      queue.assign(1, static_cast<int>(root));
      for (std::size_t qi = 0; qi < queue.size(); ++qi) {
        const int cur = queue[qi];
        for (int si : adj[static_cast<std::size_t>(cur)]) {
          Seg& s = plan.segs[static_cast<std::size_t>(si)];
          const int other = s.a == cur ? s.b : s.a;
          if (seen[static_cast<std::size_t>(other)]) continue;
          seen[static_cast<std::size_t>(other)] = true;
          s.a_parent = (s.a == cur);
          queue.push_back(other);
        }
      }
    }

    // Leaf budgets.
    plan.kh.assign(plan.nodes.size(), 0);
    plan.kv.assign(plan.nodes.size(), 0);
    const int t = cfg.build_attempts;
    for (const Seg& s : plan.segs) {
      if (s.tree) {
        const int parent = s.a_parent ? s.a : s.b;
        if (s.kind == BondKind::Vertical)
          ++plan.kv[static_cast<std::size_t>(parent)];
        else
          ++plan.kh[static_cast<std::size_t>(parent)];
      } else {
        assert(s.kind == BondKind::Horizontal && s.hops <= 2);
        if (s.hops == 1)
          ++plan.kh[static_cast<std::size_t>(s.a)];  // pad chain toward m
        else
          plan.kh[static_cast<std::size_t>(s.a)] += t;
        plan.kh[static_cast<std::size_t>(s.b)] += t;
      }
    }
    for (int q = 0; q < code.n; ++q)
      plan.kh[static_cast<std::size_t>(plan.out_node[static_cast<std::size_t>(
          q)])] += t;  // arm attempts

    int max_k = std::max(t, 1);
    for (std::size_t i = 0; i < plan.nodes.size(); ++i)
      max_k = std::max(max_k, plan.kh[i] + plan.kv[i]);
    plan.s_mc = microcluster_steps(max_k);
    span_anc = plan.s_mc + 4;  // stars, verticals, absorbs, parallels, sweep

    s_chain = microcluster_steps(cfg.join_attempts + 1);
    span_round = span_anc + 4;  // arms, creation measure, join, sweep

    info.wires = plan.wires;
    info.verification_rows = plan.v_rows;
    info.conceptual_nodes = static_cast<int>(plan.nodes.size());
    info.segments = static_cast<int>(plan.segs.size());
    info.columns = plan.columns;
    info.parallel_fusions = plan.parallel_count;
    info.chain_parallel_fusions = 4 * code.n;
  }

  int add_cnode(int wire, int parity) {
    plan.nodes.push_back(CNode{wire, parity, false});
    return static_cast<int>(plan.nodes.size()) - 1;
  }

  void add_seg(int wire, int a, int b, int hops) {
    Seg s;
    s.a = a;
    s.b = b;
    s.hops = hops;
    s.kind = BondKind::Horizontal;
    s.wire = wire;
    plan.wire_segs[static_cast<std::size_t>(wire)].push_back(
        static_cast<int>(plan.segs.size()));
    plan.segs.push_back(s);
  }

  static int hop_count(int pa, int pb) { return ((pa ^ pb) & 1) ? 1 : 2; }

  // ---- noisy graph helpers ---------------------------------------------

  int add(NodeRole role, bool data_region) {
    const int id = g.add_node(role);
    if (static_cast<std::size_t>(id) >= clk.size())
      clk.resize(static_cast<std::size_t>(id) + 1);
    clk[static_cast<std::size_t>(id)] =
        NodeClock{phase, false, data_region, false};
    return id;
  }

  // Lazy memory noise: one loss/depolarization step per phase waited.
  void touch(int id) {
    NodeClock& c = clk[static_cast<std::size_t>(id)];
    const int dt = phase - c.last_phase;
    c.last_phase = phase;
    if (dt <= 0 || c.premeasured || !noise.memory_noise) return;
    if (c.data_region) {
      if (!c.lost && noise.gamma > 0.0 &&
          rng->bernoulli(1.0 - std::pow(1.0 - noise.gamma, dt)))
        c.lost = true;
      if (c.lost) return;
    } else {
      acc.fold += dt;
    }
    for (int s = 0; s < dt; ++s)
      depolarize_1q(g.err(id).phys, noise.epsilon, *rng);
  }

  // Pre-gate treatment of one fusion input inside a postselected build.
  void ps_input(int id) {
    touch(id);
    acc.fold += 1;
  }

  void ps_fuse_noise(int a, int b) {
    ps_input(a);
    ps_input(b);
    depolarize_2q(g.err(a).phys, g.err(b).phys, noise.epsilon, *rng);
  }

  // Pre-measurement treatment inside a postselected build.
  void ps_op_1q(int id) {
    touch(id);
    acc.fold += 1;
    depolarize_1q(g.err(id).phys, noise.epsilon, *rng);
  }

  // Data-region input: memory catch-up plus one sampled loss step; false
  // means the photon is missing (detected by the gate or detector).
  bool data_op_ok(int id) {
    touch(id);
    NodeClock& c = clk[static_cast<std::size_t>(id)];
    if (c.lost) return false;
    if (noise.gamma > 0.0 && rng->bernoulli(noise.gamma)) {
      c.lost = true;
      return false;
    }
    depolarize_1q(g.err(id).phys, noise.epsilon, *rng);
    return true;
  }

  void randomize_frame(int id) {
    g.err(id).frame ^=
        pauli_from_index(static_cast<unsigned>(rng->next_below(4)));
  }

  // ---- construction primitives ------------------------------------------

  Star build_star(int kh, int kv, int t0) {
    Star s;
    std::vector<BondKind> kinds(static_cast<std::size_t>(kh),
                                BondKind::Horizontal);
    kinds.insert(kinds.end(), static_cast<std::size_t>(kv),
                 BondKind::Vertical);
    if (kinds.empty()) {
      phase = t0;
      s.root = add(NodeRole::Root, false);
      depolarize_1q(g.err(s.root).phys, noise.epsilon, *rng);
      acc.fold += 1;
      s.cost = 1.0;
      acc.cost += s.cost;
      return s;
    }
    int height = 0;
    s.root = star_rec(kinds, 0, kinds.size(), t0, height, s);
    s.cost = sample_microcluster_cost(static_cast<int>(kinds.size()), *rng);
    acc.cost += s.cost;
    return s;
  }

  int star_rec(const std::vector<BondKind>& kinds, std::size_t lo,
               std::size_t hi, int t0, int& height, Star& s) {
    if (hi - lo == 1) {
      phase = t0;
      const int root = add(NodeRole::Root, false);
      const int leaf = add(NodeRole::Leaf, false);
      g.add_bond(root, leaf, kinds[lo]);
      depolarize_2q(g.err(root).phys, g.err(leaf).phys, noise.epsilon, *rng);
      acc.fold += 2;
      (kinds[lo] == BondKind::Vertical ? s.v : s.h).push_back(leaf);
      height = 0;
      return root;
    }
    const std::size_t mid = lo + (hi - lo + 1) / 2;
    int ha = 0, hb = 0;
    const int a = star_rec(kinds, lo, mid, t0, ha, s);
    const int b = star_rec(kinds, mid, hi, t0, hb, s);
    height = std::max(ha, hb) + 1;
    phase = t0 + height;
    ps_fuse_noise(a, b);
    return g.fuse_success(a, b);
  }

  // Fuses child's root onto one of parent's leaves (forced success; the
  // child star is consumed about twice per success in expectation).
  void absorb(Star& parent, BondKind kind, Star& child) {
    const int leaf = parent.take(kind);
    ps_fuse_noise(leaf, child.root);
    g.fuse_success(child.root, leaf);
    acc.cost += child.cost;
  }

  int parallel_winner() {
    const int t = cfg.build_attempts;
    const double denom = 1.0 - std::ldexp(1.0, -t);
    acc.par /= denom;
    const double u = rng->next_double() * denom;
    double cum = 0.0, p = 0.5;
    for (int i = 0; i < t; ++i) {
      cum += p;
      if (u < cum) return i;
      p *= 0.5;
    }
    return t - 1;
  }

  // Parallel leaf-to-leaf fusion group, conditioned on at least one
  // success; earlier attempts fail and Z-measure their pair.
  int parallel_group(Star& sa, BondKind kind_a, Star& sb) {
    const int w = parallel_winner();
    int m = -1;
    for (int i = 0; i <= w; ++i) {
      const int la = sa.take(kind_a);
      const int lb = sb.take(BondKind::Horizontal);
      ps_fuse_noise(la, lb);
      if (i == w) {
        m = g.fuse_success(la, lb);
        g.set_role(m, NodeRole::Aux);
      } else {
        g.fuse_failure(la, lb);
      }
    }
    return m;
  }

  void discard_from(int lo) {
    for (int id = lo; id < g.num_ids(); ++id)
      if (g.alive(id)) g.lose_node(id);
  }

  // ---- ancilla construction ---------------------------------------------

  struct AncResult {
    std::vector<int> out;        // output root per code row
    std::vector<Star> out_star;  // leaf queues for the arm fusions
  };

  AncResult run_ancilla(int t0, long long& tries_left) {
    const CostAcc outer = acc;
    acc = CostAcc{};
    double wasted = 0.0;  // rejected tries are still consumed
    for (;;) {
      if (tries_left-- <= 0)
        throw RetryCapError("ancilla verification retry cap exceeded");
      const int lo = g.num_ids();
      std::vector<Star> stars(plan.nodes.size());
      for (std::size_t i = 0; i < plan.nodes.size(); ++i)
        stars[i] = build_star(plan.kh[i], plan.kv[i], t0);

      std::vector<std::vector<int>> seg_mid(plan.segs.size());
      // Gate bonds, then wire spans, then cycle-closing parallels.
      phase = t0 + plan.s_mc;
      for (const Seg& s : plan.segs) {
        if (!s.tree || s.kind != BondKind::Vertical) continue;
        Star& parent = stars[static_cast<std::size_t>(s.a_parent ? s.a : s.b)];
        Star& child = stars[static_cast<std::size_t>(s.a_parent ? s.b : s.a)];
        absorb(parent, BondKind::Vertical, child);
      }
      phase = t0 + plan.s_mc + 1;
      for (std::size_t si = 0; si < plan.segs.size(); ++si) {
        const Seg& s = plan.segs[si];
        if (!s.tree || s.kind != BondKind::Horizontal) continue;
        Star& parent = stars[static_cast<std::size_t>(s.a_parent ? s.a : s.b)];
        Star& child = stars[static_cast<std::size_t>(s.a_parent ? s.b : s.a)];
        if (s.hops == 1) {
          absorb(parent, BondKind::Horizontal, child);
        } else {
          Star pad = build_star(1, 0, t0);
          const int pad_id = pad.root;
          absorb(parent, BondKind::Horizontal, pad);
          absorb(pad, BondKind::Horizontal, child);
          if (!s.a_parent) g.set_role(pad_id, NodeRole::Aux);
          seg_mid[si].push_back(pad_id);
        }
      }
      phase = t0 + plan.s_mc + 2;
      for (std::size_t si = 0; si < plan.segs.size(); ++si) {
        const Seg& s = plan.segs[si];
        if (s.tree) continue;
        Star& sa = stars[static_cast<std::size_t>(s.a)];
        Star& sb = stars[static_cast<std::size_t>(s.b)];
        int m;
        if (s.hops == 1) {
          Star pad = build_star(cfg.build_attempts, 0, t0);
          absorb(sa, BondKind::Horizontal, pad);
          seg_mid[si].push_back(pad.root);
          m = parallel_group(pad, BondKind::Horizontal, sb);
        } else {
          m = parallel_group(sa, BondKind::Horizontal, sb);
        }
        seg_mid[si].push_back(m);
      }

      // Verification sweep: everything but the output column, wire by
      // wire. Unconsumed leaves go first, in the computational basis, so
      // wire nodes are left with a single live horizontal bond; the arm
      // attempt leaves on the output roots stay. Any nonzero terminal
      // flip rejects the state.
      phase = t0 + plan.s_mc + 3;
      std::vector<bool> keep_leaf(
          static_cast<std::size_t>(g.num_ids() - lo), false);
      for (int q = 0; q < code.n; ++q) {
        const Star& st = stars[static_cast<std::size_t>(
            plan.out_node[static_cast<std::size_t>(q)])];
        for (int leaf : st.h)
          keep_leaf[static_cast<std::size_t>(leaf - lo)] = true;
      }
      for (int id = lo; id < g.num_ids(); ++id) {
        if (!g.alive(id) || g.role(id) != NodeRole::Leaf ||
            keep_leaf[static_cast<std::size_t>(id - lo)])
          continue;
        ps_op_1q(id);
        g.measure_z(id);
      }
      bool ok = true;
      for (int w = 0; w < plan.wires; ++w) {
        const auto& seq = plan.wire_nodes[static_cast<std::size_t>(w)];
        const auto& wsegs = plan.wire_segs[static_cast<std::size_t>(w)];
        std::vector<int> order;
        order.push_back(stars[static_cast<std::size_t>(seq[0])].root);
        for (std::size_t k = 0; k < wsegs.size(); ++k) {
          for (int mid : seg_mid[static_cast<std::size_t>(wsegs[k])])
            order.push_back(mid);
          order.push_back(stars[static_cast<std::size_t>(seq[k + 1])].root);
        }
        const bool has_out =
            plan.nodes[static_cast<std::size_t>(seq.back())].out;
        const std::size_t stop = order.size() - (has_out ? 1 : 0);
        for (std::size_t k = 0; k < stop; ++k) {
          ps_op_1q(order[k]);
          const auto flip = g.measure_x(order[k]);
          if (flip && *flip != 0) ok = false;
        }
      }
      if (!ok) {
        ++stats.verify_rejects;
        discard_from(lo);
        wasted += effective(acc);
        acc = CostAcc{};
        continue;
      }
      AncResult res;
      res.out.resize(static_cast<std::size_t>(code.n));
      res.out_star.resize(static_cast<std::size_t>(code.n));
      for (int q = 0; q < code.n; ++q) {
        Star& st =
            stars[static_cast<std::size_t>(plan.out_node[static_cast<
                std::size_t>(q)])];
        res.out[static_cast<std::size_t>(q)] = st.root;
        res.out_star[static_cast<std::size_t>(q)] = st;
      }
      const double spent = wasted + effective(acc);
      acc = outer;
      acc.cost += spent;
      return res;
    }
  }

  // ---- telecorrector -----------------------------------------------------

  // Pre-join arm reads, replaying the sweep's hand-off algebra on the
  // current error bits without touching the graph.
  std::array<int, 4> f0_row(const RowLayout& R) const {
    std::array<int, 4> f{};
    bool ax = false, az = false;
    const auto handoff = [&](const NodeError& e) {
      const bool nax = e.phys.z ^ e.frame.z ^ az;
      const bool naz = e.frame.x ^ ax;
      ax = nax;
      az = naz;
    };
    handoff(g.err(R.left));
    handoff(g.err(R.pre));
    for (int c = 0; c < 4; ++c) {
      const NodeError& ec = g.err(R.stage[static_cast<std::size_t>(c)]);
      const NodeError& em = g.err(R.arm_m[static_cast<std::size_t>(c)]);
      const NodeError& eo = g.err(R.arm_o[static_cast<std::size_t>(c)]);
      const bool c_fx = ec.frame.x ^ ax;
      const bool m_fz = em.frame.z ^ c_fx ^ eo.frame.x;
      f[static_cast<std::size_t>(c)] = (em.phys.z ^ m_fz) ? 1 : 0;
      const bool nax = ec.phys.z ^ ec.frame.z ^ az ^ em.frame.x;
      const bool naz = ec.frame.x ^ ax;
      ax = nax;
      az = naz;
    }
    return f;
  }

  std::array<std::uint32_t, 4> f0_syndromes() const {
    std::array<std::uint32_t, 4> masks{};
    for (int r = 0; r < code.n; ++r) {
      const auto f = f0_row(rows[static_cast<std::size_t>(r)]);
      for (int c = 0; c < 4; ++c)
        if (f[static_cast<std::size_t>(c)])
          masks[static_cast<std::size_t>(c)] |= 1u << r;
    }
    std::array<std::uint32_t, 4> syn{};
    for (int c = 0; c < 4; ++c)
      syn[static_cast<std::size_t>(c)] =
          syndrome(code, masks[static_cast<std::size_t>(c)]);
    return syn;
  }

  void build_telecorrector(int t0) {
    stats = BuildStats{};
    long long tries_left = cfg.max_build_tries;
    for (;;) {
      if (tries_left-- <= 0)
        throw RetryCapError("telecorrector preagreement retry cap exceeded");
      ++stats.tries;
      const int lo = g.num_ids();
      acc = CostAcc{};

      std::array<AncResult, 4> anc;
      for (auto& a : anc) a = run_ancilla(t0, tries_left);

      rows.assign(static_cast<std::size_t>(code.n), RowLayout{});
      std::vector<std::array<Star, 7>> chain_stars(
          static_cast<std::size_t>(code.n));
      for (int r = 0; r < code.n; ++r) {
        auto& cs = chain_stars[static_cast<std::size_t>(r)];
        cs[0] = build_star(cfg.join_attempts + 1, 0, t0);  // join end
        cs[1] = build_star(1, 0, t0);
        for (int c = 0; c < 4; ++c)
          cs[static_cast<std::size_t>(2 + c)] =
              build_star(1, cfg.build_attempts, t0);
        cs[6] = build_star(cfg.join_attempts, 0, t0);  // output root
        phase = t0 + s_chain;
        for (int k = 0; k < 6; ++k)
          absorb(cs[static_cast<std::size_t>(k)], BondKind::Horizontal,
                 cs[static_cast<std::size_t>(k + 1)]);
        RowLayout& R = rows[static_cast<std::size_t>(r)];
        R.left = cs[0].root;
        R.pre = cs[1].root;
        for (int c = 0; c < 4; ++c) {
          R.stage[static_cast<std::size_t>(c)] =
              cs[static_cast<std::size_t>(2 + c)].root;
          R.arm_o[static_cast<std::size_t>(c)] =
              anc[static_cast<std::size_t>(c)]
                  .out[static_cast<std::size_t>(r)];
          R.arm_m[static_cast<std::size_t>(c)] = -1;
        }
        R.out = cs[6].root;
      }

      if (tamper) tamper(*owner, tamper_ctx);

      phase = t0 + span_anc;
      for (int r = 0; r < code.n; ++r) {
        auto& cs = chain_stars[static_cast<std::size_t>(r)];
        RowLayout& R = rows[static_cast<std::size_t>(r)];
        for (int c = 0; c < 4; ++c) {
          R.arm_m[static_cast<std::size_t>(c)] = parallel_group(
              cs[static_cast<std::size_t>(2 + c)], BondKind::Vertical,
              anc[static_cast<std::size_t>(c)]
                  .out_star[static_cast<std::size_t>(r)]);
        }
        R.left_leaves.assign(cs[0].h.begin() + static_cast<long>(cs[0].hi),
                             cs[0].h.end());
        R.out_leaves = cs[6].h;
      }

      // Everything interior is physically measured now; the sweep replays
      // it later under the reordering license. Survivors: join leaves and
      // the output column.
      phase = t0 + span_anc + 1;
      std::vector<bool> keep(
          static_cast<std::size_t>(g.num_ids() - lo), false);
      const auto mark = [&](int id) {
        keep[static_cast<std::size_t>(id - lo)] = true;
      };
      for (const RowLayout& R : rows) {
        for (int id : R.left_leaves) mark(id);
        for (int id : R.out_leaves) mark(id);
        mark(R.out);
      }
      for (int id = lo; id < g.num_ids(); ++id) {
        if (!g.alive(id) || keep[static_cast<std::size_t>(id - lo)]) continue;
        touch(id);
        acc.fold += 1;
        depolarize_1q(g.err(id).phys, noise.epsilon, *rng);
        if (g.role(id) == NodeRole::Leaf) {
          g.measure_z(id);  // unused leaf cleanup, computational basis
        } else {
          clk[static_cast<std::size_t>(id)].premeasured = true;
        }
      }

      const double spent = effective(acc);
      trial_cost += spent;
      stats.bell_pairs += spent;

      const auto syn = f0_syndromes();
      if (syn[0] == syn[2] && syn[1] == syn[3]) {
        stats.f0 = syn;
        for (const RowLayout& R : rows) {
          for (int id : R.left_leaves)
            clk[static_cast<std::size_t>(id)].data_region = true;
          for (int id : R.out_leaves)
            clk[static_cast<std::size_t>(id)].data_region = true;
          clk[static_cast<std::size_t>(R.out)].data_region = true;
        }
        return;
      }
      stats.rejected_f0 = syn;
      stats.has_rejected_f0 = true;
      ++stats.preagree_rejects;
      discard_from(lo);
    }
  }

  // ---- the round ----------------------------------------------------------

  void locate(std::vector<bool>& row_loc, int r) {
    row_loc[static_cast<std::size_t>(r)] = true;
  }

  RoundReport round(Rng& r) {
    rng = &r;
    const int t0 = round_t0;
    build_telecorrector(t0);

    RoundReport rep;
    std::vector<bool> row_loc(static_cast<std::size_t>(code.n), false);
    std::vector<int> jm(static_cast<std::size_t>(code.n), -1);
    std::vector<std::size_t> used(static_cast<std::size_t>(code.n), 0);

    phase = t0 + span_anc + 2;
    for (int q = 0; q < code.n; ++q) {
      RowLayout& R = rows[static_cast<std::size_t>(q)];
      const int D = data_roots[static_cast<std::size_t>(q)];
      auto& dl = data_leaf[static_cast<std::size_t>(q)];
      const auto& ll = R.left_leaves;
      const std::size_t pairs = std::min(dl.size(), ll.size());
      for (std::size_t i = 0; i < pairs; ++i) {
        ++used[static_cast<std::size_t>(q)];
        const int a = dl[i], b = ll[i];
        const bool oka = data_op_ok(a), okb = data_op_ok(b);
        if (!oka || !okb) {
          // Detected loss: the gate consumed the pair either way.
          if (g.alive(a)) g.lose_node(a);
          if (g.alive(b)) g.lose_node(b);
          locate(row_loc, q);
          break;
        }
        depolarize_2q(g.err(a).phys, g.err(b).phys, noise.epsilon, *rng);
        if (rng->bernoulli(0.5)) {
          jm[static_cast<std::size_t>(q)] = g.fuse_success(a, b);
          g.set_role(jm[static_cast<std::size_t>(q)], NodeRole::Aux);
          break;
        }
        g.fuse_failure(a, b);
      }
      if (jm[static_cast<std::size_t>(q)] < 0) {
        // All attempts exhausted or aborted: pretend the bond succeeded
        // through a fresh |+> and randomize the data qubit's frame.
        locate(row_loc, q);
        const int id = add(NodeRole::Aux, true);
        g.add_bond(D, id, BondKind::Horizontal);
        g.add_bond(id, R.left, BondKind::Horizontal);
        jm[static_cast<std::size_t>(q)] = id;
      }
      if (row_loc[static_cast<std::size_t>(q)]) randomize_frame(D);
    }

    // Sweep: data side with live noise, interior nodes replayed without.
    phase = t0 + span_anc + 3;
    std::array<std::uint32_t, 4> flips{};
    for (int q = 0; q < code.n; ++q) {
      RowLayout& R = rows[static_cast<std::size_t>(q)];
      const int D = data_roots[static_cast<std::size_t>(q)];
      auto& dl = data_leaf[static_cast<std::size_t>(q)];
      const int j = jm[static_cast<std::size_t>(q)];
      for (std::size_t i = used[static_cast<std::size_t>(q)]; i < dl.size();
           ++i) {
        if (data_op_ok(dl[i])) {
          g.measure_z(dl[i]);
        } else {
          if (g.alive(dl[i])) g.lose_node(dl[i]);
          locate(row_loc, q);
          randomize_frame(D);
        }
      }
      if (data_op_ok(D)) {
        const auto f = g.measure_x(D);
        assert(!f.has_value());
        (void)f;
      } else {
        g.lose_node(D);
        locate(row_loc, q);
        randomize_frame(j);
      }
      if (data_op_ok(j)) {
        const auto f = g.measure_x(j);
        assert(!f.has_value());
        (void)f;
      } else {
        g.lose_node(j);
        locate(row_loc, q);
        randomize_frame(R.left);
      }
      for (std::size_t i = used[static_cast<std::size_t>(q)];
           i < R.left_leaves.size(); ++i) {
        const int leaf = R.left_leaves[i];
        if (data_op_ok(leaf)) {
          g.measure_z(leaf);
        } else {
          if (g.alive(leaf)) g.lose_node(leaf);
          locate(row_loc, q);
          randomize_frame(R.left);
        }
      }
      g.measure_x(R.left);
      g.measure_x(R.pre);
      for (int c = 0; c < 4; ++c) {
        g.measure_x(R.stage[static_cast<std::size_t>(c)]);
        g.measure_x(R.arm_o[static_cast<std::size_t>(c)]);
        const auto f = g.measure_x(R.arm_m[static_cast<std::size_t>(c)]);
        assert(f.has_value());
        if (f && *f)
          flips[static_cast<std::size_t>(c)] |= 1u << q;
      }
    }

    rep.stage_flips = flips;
    for (int c = 0; c < 4; ++c)
      rep.syndromes[static_cast<std::size_t>(c)] =
          syndrome(code, flips[static_cast<std::size_t>(c)]);
    assert(rep.syndromes[0] == rep.syndromes[2]);
    assert(rep.syndromes[1] == rep.syndromes[3]);

    for (int q = 0; q < code.n; ++q)
      if (row_loc[static_cast<std::size_t>(q)]) rep.located_rows.push_back(q);

    DecodeInput in_x{rep.syndromes[2], rep.located_rows};
    DecodeInput in_z{rep.syndromes[3], rep.located_rows};
    const DecodeResult dx = ml_decode(code, in_x);
    const DecodeResult dz = ml_decode(code, in_z);
    rep.correction_x = dx.correction;
    rep.correction_z = dz.correction;
    corr_x ^= dx.correction;
    corr_z ^= dz.correction;
    rep.located_crash = dx.located_crash || dz.located_crash;

    // Fold the prescribed correction into the transported Pauli frame so
    // later rounds see only the residual; nothing is applied physically.
    for (int q = 0; q < code.n; ++q) {
      NodeError& e = g.err(rows[static_cast<std::size_t>(q)].out);
      if ((dx.correction >> q) & 1u) e.frame.x = !e.frame.x;
      if ((dz.correction >> q) & 1u) e.frame.z = !e.frame.z;
    }

    std::uint32_t rx = 0, rz = 0;
    for (int q = 0; q < code.n; ++q) {
      const NodeError& e =
          g.err(rows[static_cast<std::size_t>(q)].out);
      if (e.phys.x ^ e.frame.x) rx |= 1u << q;
      if (e.phys.z ^ e.frame.z) rz |= 1u << q;
    }
    const std::uint32_t ux = code.decode_array[syndrome(code, rx)];
    const std::uint32_t uz = code.decode_array[syndrome(code, rz)];
    rep.unlocated_crash =
        logical_class(code, rx ^ ux, rz ^ uz) != LogicalClass::I;

    data_roots.clear();
    data_leaf.clear();
    for (int q = 0; q < code.n; ++q) {
      data_roots.push_back(rows[static_cast<std::size_t>(q)].out);
      data_leaf.push_back(rows[static_cast<std::size_t>(q)].out_leaves);
    }
    round_t0 += span_round;
    return rep;
  }

  void start(Rng& r) {
    rng = &r;
    g = ClusterGraph{};
    g.set_observer(obs);
    clk.clear();
    phase = 0;
    round_t0 = 0;
    corr_x = 0;
    corr_z = 0;
    trial_cost = 0.0;
    rows.clear();
    data_roots.clear();
    data_leaf.clear();
    for (int q = 0; q < code.n; ++q) {
      const int root = add(NodeRole::Root, true);
      std::vector<int> leaves;
      for (int i = 0; i < cfg.data_leaves; ++i) {
        const int leaf = add(NodeRole::Leaf, true);
        g.add_bond(root, leaf, BondKind::Horizontal);
        leaves.push_back(leaf);
      }
      data_roots.push_back(root);
      data_leaf.push_back(std::move(leaves));
    }
  }

  std::string dump_json() const {
    nlohmann::json j;
    j["code"] = code.name;
    j["columns"] = plan.columns;
    j["wires"] = plan.wires;
    j["verification_rows"] = plan.v_rows;
    j["microcluster_phases"] = plan.s_mc;
    j["parallel_fusions"] = plan.parallel_count;
    j["arm_fusions"] = 4 * code.n;
    auto& jn = j["nodes"];
    jn = nlohmann::json::array();
    for (const CNode& n : plan.nodes)
      jn.push_back({{"wire", n.wire},
                    {"parity", n.parity & 1},
                    {"output", n.out}});
    auto& js = j["segments"];
    js = nlohmann::json::array();
    for (const Seg& s : plan.segs)
      js.push_back({{"a", s.a},
                    {"b", s.b},
                    {"hops", s.hops},
                    {"kind", s.kind == BondKind::Vertical ? "vertical"
                                                          : "horizontal"},
                    {"realization", s.tree ? "absorb" : "parallel"}});
    auto& jb = j["leaf_budget"];
    jb = nlohmann::json::array();
    for (std::size_t i = 0; i < plan.nodes.size(); ++i)
      jb.push_back({{"h", plan.kh[i]}, {"v", plan.kv[i]}});
    j["chain"] = {{"stage_parities", {0, 1, 0, 1}},
                  {"join_leaves", cfg.join_attempts},
                  {"arm_attempts", cfg.build_attempts},
                  {"output_leaves", cfg.join_attempts}};
    j["schedule"] = {{"microcluster_phases", plan.s_mc},
                     {"ancilla_span", span_anc},
                     {"chain_phases", s_chain},
                     {"round_span", span_round}};
    return j.dump(2);
  }

  std::string graph_json() const {
    nlohmann::json j;
    auto& jn = j["nodes"];
    jn = nlohmann::json::array();
    for (int id = 0; id < g.num_ids(); ++id) {
      if (!g.alive(id)) continue;
      nlohmann::json bonds = nlohmann::json::array();
      for (const auto& b : g.bonds(id))
        bonds.push_back({{"to", b.to},
                         {"kind", b.kind == BondKind::Vertical ? "vertical"
                                                               : "horizontal"}});
      const char* role = "aux";
      switch (g.role(id)) {
        case NodeRole::Root: role = "root"; break;
        case NodeRole::Leaf: role = "leaf"; break;
        case NodeRole::Aux: role = "aux"; break;
      }
      jn.push_back({{"id", id}, {"role", role}, {"bonds", bonds}});
    }
    j["alive"] = g.num_alive();
    return j.dump(2);
  }

  ClusterSimulator* owner = nullptr;
};

// ---------------------------------------------------------------------------

ClusterSimulator::ClusterSimulator(const CssCode& code,
                                   const NoiseParams& noise,
                                   const ProtocolConfig& cfg)
    : code_(code), noise_(noise), cfg_(cfg),
      impl_(new Impl(code, noise, cfg)) {
  impl_->owner = this;
}

ClusterSimulator::~ClusterSimulator() { delete impl_; }

void ClusterSimulator::start_trial(Rng& rng) { impl_->start(rng); }

RoundReport ClusterSimulator::run_round(Rng& rng) { return impl_->round(rng); }

TrialOutcome ClusterSimulator::run_trial(Rng& rng) {
  start_trial(rng);
  TrialOutcome out;
  for (int w = 0; w < cfg_.warmup_rounds; ++w) {
    const RoundReport rep = impl_->round(rng);
    if (rep.located_crash || rep.unlocated_crash) {
      out.kind = TrialOutcome::Kind::Discarded;
      out.bell_pairs = impl_->trial_cost;
      return out;
    }
  }
  const RoundReport rep = impl_->round(rng);
  out.kind = rep.located_crash     ? TrialOutcome::Kind::Located
             : rep.unlocated_crash ? TrialOutcome::Kind::Unlocated
                                   : TrialOutcome::Kind::None;
  out.bell_pairs = impl_->trial_cost;
  return out;
}

ClusterGraph& ClusterSimulator::graph() { return impl_->g; }
const std::vector<int>& ClusterSimulator::data_roots() const {
  return impl_->data_roots;
}
const std::vector<std::vector<int>>& ClusterSimulator::data_leaves() const {
  return impl_->data_leaf;
}
const BuildStats& ClusterSimulator::last_build() const { return impl_->stats; }
const PlanInfo& ClusterSimulator::plan_info() const { return impl_->info; }
std::string ClusterSimulator::dump_plan_json() const {
  return impl_->dump_json();
}
std::string ClusterSimulator::dump_graph_json() const {
  return impl_->graph_json();
}
std::uint32_t ClusterSimulator::correction_x() const { return impl_->corr_x; }
std::uint32_t ClusterSimulator::correction_z() const { return impl_->corr_z; }
void ClusterSimulator::set_observer(ClusterObserver* obs) {
  impl_->obs = obs;
  impl_->g.set_observer(obs);
}
void ClusterSimulator::set_creation_tamper(TamperFn fn, void* ctx) {
  impl_->tamper = fn;
  impl_->tamper_ctx = ctx;
}
const std::vector<ClusterSimulator::RowLayout>& ClusterSimulator::rows()
    const {
  return impl_->rows;
}

ClusterTally run_cluster_trials(const CssCode& code, const NoiseParams& noise,
                                const ProtocolConfig& cfg,
                                std::uint64_t master_seed,
                                std::uint64_t point_index, long long trials,
                                long long first_trial) {
  ClusterSimulator sim(code, noise, cfg);
  ClusterTally tally;
  for (long long i = 0; i < trials; ++i) {
    Rng rng = Rng::for_trial(master_seed, point_index,
                             static_cast<std::uint64_t>(first_trial + i));
    tally.count(sim.run_trial(rng));
  }
  return tally;
}

}  // namespace ftsim
