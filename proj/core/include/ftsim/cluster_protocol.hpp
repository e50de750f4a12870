#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ftsim/cluster_graph.hpp"
#include "ftsim/css_code.hpp"
#include "ftsim/noise.hpp"
#include "ftsim/rng.hpp"

namespace ftsim {

struct ProtocolConfig {
  int join_attempts = 5;   // leaf pairs per data/telecorrector fusion
  int build_attempts = 3;  // leaf pairs per fusion inside constructions
  int data_leaves = 3;     // leaves on the initial data block roots
  int warmup_rounds = 1;
  long long max_build_tries = 1000000;
};

// Thrown when a postselected construction exceeds max_build_tries.
struct RetryCapError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrialOutcome {
  enum class Kind { Discarded, None, Unlocated, Located };
  Kind kind = Kind::None;
  double bell_pairs = 0.0;  // expected Bell pairs consumed by the trial
};

struct RoundReport {
  // Per-extraction-stage masks over code rows: arm flip bits and the
  // resulting syndromes. Stages run in X, Z, X, Z order.
  std::array<std::uint32_t, 4> stage_flips{};
  std::array<std::uint32_t, 4> syndromes{};
  std::vector<int> located_rows;
  std::uint32_t correction_x = 0;  // tracked, never applied
  std::uint32_t correction_z = 0;
  bool located_crash = false;
  bool unlocated_crash = false;
};

struct BuildStats {
  long long tries = 0;              // telecorrector attempts (last round)
  long long preagree_rejects = 0;
  long long verify_rejects = 0;     // ancilla verification rejects (last round)
  double bell_pairs = 0.0;          // expected cost of the last round's build
  std::array<std::uint32_t, 4> f0{};         // accepted preagreement syndromes
  std::array<std::uint32_t, 4> rejected_f0{};  // from the last rejected try
  bool has_rejected_f0 = false;
};

struct PlanInfo {
  int wires = 0;             // ancilla wires (verification + code)
  int verification_rows = 0;
  int conceptual_nodes = 0;  // anchors, pads are folded into segments
  int segments = 0;
  int columns = 0;           // greedy schedule depth
  int parallel_fusions = 0;  // cycle-closing fusions per ancilla
  int chain_parallel_fusions = 0;  // arm fusions per telecorrector
};

struct ClusterTally {
  long long n_unlocated = 0;
  long long n_located = 0;
  long long n_none = 0;
  long long discarded = 0;
  double bell_pairs = 0.0;  // summed over counted trials

  void count(const TrialOutcome& t);
  void merge(const ClusterTally& o);

  long long counted() const { return n_unlocated + n_located + n_none; }
  double crash_rate() const;          // E = N_U / (N_U + N_N)
  double sigma_crash_rate() const;
  double located_rate() const;        // Gamma = N_L / counted
  double sigma_located_rate() const;
  double mean_bell_pairs() const;
};

// Star microcluster helpers. A k-leaf star is assembled from k Bell pairs
// by pairwise root fusions; expected Bell-pair cost is k^2 when k is a
// power of two and the build spans ceil(log2 k)+1 time steps.
double sample_microcluster_cost(int k, Rng& rng);
int microcluster_steps(int k);

// Builds one k-leaf star in the given graph with per-operation
// depolarization (joint two-qubit noise after each Bell-pair creation and
// before each forced-success root fusion). Fusions always succeed; loss is
// postselected away. Returns the root id and appends the leaf ids.
int build_microcluster(ClusterGraph& g, int k, BondKind kind, double epsilon,
                       Rng& rng, std::vector<int>* leaves = nullptr);

class ClusterSimulator {
 public:
  ClusterSimulator(const CssCode& code, const NoiseParams& noise,
                   const ProtocolConfig& cfg);
  ~ClusterSimulator();
  ClusterSimulator(const ClusterSimulator&) = delete;
  ClusterSimulator& operator=(const ClusterSimulator&) = delete;

  TrialOutcome run_trial(Rng& rng);

  // Step-wise interface. start_trial resets the graph to the noise-free
  // input block; each run_round consumes one telecorrector.
  void start_trial(Rng& rng);
  RoundReport run_round(Rng& rng);

  const CssCode& code() const { return code_; }
  const ProtocolConfig& config() const { return cfg_; }
  const NoiseParams& noise() const { return noise_; }

  // Test and tooling hooks.
  ClusterGraph& graph();
  const std::vector<int>& data_roots() const;
  const std::vector<std::vector<int>>& data_leaves() const;
  const BuildStats& last_build() const;
  const PlanInfo& plan_info() const;
  std::string dump_plan_json() const;
  std::string dump_graph_json() const;
  std::uint32_t correction_x() const;
  std::uint32_t correction_z() const;
  void set_observer(ClusterObserver* obs);
  // Invoked once per telecorrector try, after the chains and verified
  // ancillas exist but before the arm fusions and creation measurement;
  // used to tamper with constructions in tests.
  using TamperFn = void (*)(ClusterSimulator&, void*);
  void set_creation_tamper(TamperFn fn, void* ctx);
  // Ids of the most recent telecorrector's structure, indexed by code row.
  struct RowLayout {
    int left;                       // join-side chain end
    int pre;                        // bare chain node before the first stage
    std::array<int, 4> stage;       // chain nodes carrying the arms
    std::array<int, 4> arm_m;       // arm terminal nodes
    std::array<int, 4> arm_o;       // ancilla output roots
    int out;                        // output root
    std::vector<int> left_leaves;   // unconsumed join leaves
    std::vector<int> out_leaves;
  };
  const std::vector<RowLayout>& rows() const;

 private:
  struct Impl;
  CssCode code_;
  NoiseParams noise_;
  ProtocolConfig cfg_;
  Impl* impl_;
};

// Single-threaded convenience driver; per-trial RNG streams are derived
// from (master_seed, point_index, trial index) so shards merge exactly.
ClusterTally run_cluster_trials(const CssCode& code, const NoiseParams& noise,
                                const ProtocolConfig& cfg,
                                std::uint64_t master_seed,
                                std::uint64_t point_index, long long trials,
                                long long first_trial = 0);

}  // namespace ftsim
