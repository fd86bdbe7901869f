#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "nhdp/crf_state.hpp"
#include "nhdp/dataset.hpp"
#include "nhdp/hyperparams.hpp"
#include "nhdp/model.hpp"
#include "nhdp/rng.hpp"
#include "nhdp/stats.hpp"

namespace nhdp {

enum class MoveKind {
  none,  // structurally impossible draw (counted as a rejection)
  table_split,
  table_merge,
  dish_split,
  dish_merge,
  restaurant_split,
  restaurant_merge,
};

// Per-move log of the Metropolis-Hastings components, exposed so replay tests
// can check the bookkeeping against full-state recomputation.
struct MoveInfo {
  MoveKind kind = MoveKind::none;
  bool accepted = false;
  double log_q_fwd = 0.0;   // log proposal density of the move made
  double log_q_rev = 0.0;   // log proposal density of the reversing move
  double d_log_prior = 0.0; // log p(state*) - log p(state)
  double d_log_lik = 0.0;   // tempered likelihood difference (beta folded in)
  double log_accept_ratio = 0.0;
};

// Test hook: pins every random choice of one move so proposals can be forced
// and replayed in either direction. Production code never fills this in.
struct MoveOverride {
  int e1 = -1, e2 = -1;   // anchor elements: units / tables-by-rank / groups
  int dish_choice = -1;   // table split only: 0..D-1 existing by rank, D = new
  bool has_launch_seed = false;
  std::uint64_t launch_seed = 0;
  // Restaurant merge only: exact matched pairs (as ranks of each side's
  // dish-d table lists this is awkward; pairs are given as snapshot table
  // handles) and their merge flags.
  const std::vector<std::pair<int, int>>* forced_matching = nullptr;
  const std::vector<char>* forced_flags = nullptr;
  int force_decision = 0;  // +1 accept, -1 reject, 0 sample normally
};

// Split-merge sampler over the franchise state. Holds the state in mutable
// table/dish/restaurant records with incremental sufficient statistics so a
// move costs time proportional to the clusters it touches, not the dataset.
//
// beta_lik in [0, 1] tempers every likelihood term (prior-only == 0); the
// prior is never tempered.
class SamplerState {
 public:
  SamplerState(const TwoLevelDataset& data, const Hyperparams& hp, const CrfState& init,
               double beta_lik = 1.0);

  // One split-merge move at the named level. Degenerate draws (fewer than two
  // eligible elements) return kind == none and count as rejections.
  MoveInfo tables_move(Rng& rng, const MoveOverride* ovr = nullptr);
  MoveInfo dishes_move(Rng& rng, const MoveOverride* ovr = nullptr);
  MoveInfo restaurants_move(Rng& rng, const MoveOverride* ovr = nullptr);

  // Conjugate update of sigma2 (requires an inverse-gamma prior).
  void gibbs_sigma2(Rng& rng);
  // One MH step on the chosen concentration (requires a prior). Returns
  // whether the proposal was accepted.
  bool mh_alpha(AlphaIndex which, Rng& rng);

  CrfState snapshot() const;
  // Fresh recomputations from the dataset (never from incremental caches);
  // used for retained draws and consistency checks.
  double log_prior() const;
  double log_likelihood_full() const;

  const Hyperparams& hp() const { return hp_; }
  double beta_lik() const { return beta_lik_; }
  void set_beta_lik(double b) { beta_lik_ = b; }
  void set_hyperparams(const Hyperparams& hp);
  const TwoLevelDataset& data() const { return *data_; }

  void rebuild_from(const CrfState& state);
  // Recomputes every cached sufficient statistic from raw data, clearing any
  // accumulated floating-point residue. Called at retained draws.
  void refresh_stats();

  int n_restaurants() const { return static_cast<int>(live_rests_.size()); }
  int n_tables() const { return static_cast<int>(live_tables_.size()); }
  int n_dishes() const { return static_cast<int>(live_dishes_.size()); }
  std::vector<ClusterStats> dish_stats() const;

 private:
  struct TableRec {
    int rest = -1;
    int dish = -1;
    int min_unit = -1;  // smallest member unit; stable sort key across rebuilds
    std::vector<int> members;
    ClusterStats stats;
  };
  struct DishRec {
    std::vector<int> tables;
    ClusterStats stats;
  };
  struct RestRec {
    std::vector<int> groups;
    std::vector<int> tables;
    std::vector<int> customers;
  };

  const TwoLevelDataset* data_;
  Hyperparams hp_;
  double beta_lik_;

  std::vector<TableRec> table_;
  std::vector<DishRec> dish_;
  std::vector<RestRec> rest_;
  std::vector<int> free_tables_, free_dishes_, free_rests_;
  std::vector<int> live_tables_, live_dishes_, live_rests_;
  std::vector<int> table_pos_, dish_pos_, rest_pos_;  // handle -> index in live list
  std::vector<int> table_of_;                         // unit -> table handle
  std::vector<int> rest_of_group_;                    // group -> restaurant handle

  // Lookup tables over integer counts so scan inner loops stay log-free:
  // log(i), lgamma(i), log(i + k0), and prefix sums of log(alpha + i).
  std::vector<double> log_int_, lgamma_int_, log_k0_, inv_k0_, cum_log_a0_, cum_log_a1_;
  double log_2pi_sigma2_ = 0.0;
  double inv_2sigma2_ = 0.0;

  void rebuild_alpha_tables();
  void rebuild_sigma_constants();

  int alloc_table();
  int alloc_dish();
  int alloc_rest();
  void free_table(int h);
  void free_dish(int d);
  void free_rest(int s);

  double predictive(const ClusterStats& s, double y) const;
  double block_predictive(const ClusterStats& s, const ClusterStats& block) const;
  double lm(const ClusterStats& s) const;  // log_marginal_cluster at current hp

  // Restricted Gibbs scan over units for table-level proposals.
  struct UnitScan;
  // Restricted Gibbs scan over tables for dish-level proposals.
  struct TableScan;
  // Sequential group allocator for restaurant-level proposals.
  struct RestAlloc;

  MoveInfo table_split(int rest, int i1, int i2, Rng& rng, const MoveOverride* ovr);
  MoveInfo table_merge(int i1, int i2, Rng& rng, const MoveOverride* ovr);
  MoveInfo dish_split(int t1, int t2, Rng& rng, const MoveOverride* ovr);
  MoveInfo dish_merge(int t1, int t2, Rng& rng, const MoveOverride* ovr);
  MoveInfo restaurant_split(int g1, int g2, Rng& rng, const MoveOverride* ovr);
  MoveInfo restaurant_merge(int g1, int g2, Rng& rng, const MoveOverride* ovr);

  int induced_restaurant_label(const CrfState& snap, int g) const;
  std::pair<std::vector<int>, std::vector<std::pair<int, int>>> state_labels(
      const CrfState& snap) const;

  bool decide(double log_ratio, Rng& rng, const MoveOverride* ovr);
};

// Value-level kernels matching the state-in, state-out interface. Each builds
// a sampler around the given state, performs one move and returns the
// (possibly unchanged) canonical state.
struct MoveOutcome {
  CrfState state;
  MoveInfo info;
};
MoveOutcome sm_tables_move(const CrfState& state, const TwoLevelDataset& data,
                           const Hyperparams& hp, Rng& rng, double beta_lik = 1.0);
MoveOutcome sm_dishes_move(const CrfState& state, const TwoLevelDataset& data,
                           const Hyperparams& hp, Rng& rng, double beta_lik = 1.0);
MoveOutcome sm_restaurants_move(const CrfState& state, const TwoLevelDataset& data,
                                const Hyperparams& hp, Rng& rng, double beta_lik = 1.0);

struct MovesPerSweep {
  // Negative means the default: L restaurant moves, ceil(n/2) table moves,
  // 10 dish moves per sweep.
  int restaurants = -1;
  int tables = -1;
  int dishes = -1;
};

struct TemperingConfig {
  int n_rungs = 4;
  double max_temp = 4.0;
};

struct ChainConfig {
  long n_iter = 12000;
  long burn_in = 2000;
  long thin = 1;
  int n_chains = 1;
  std::uint64_t seed = 1;
  MovesPerSweep moves;
  std::optional<TemperingConfig> tempering;
  bool prior_only = false;
};

struct Draw {
  long iteration = 0;
  int chain = 0;
  PartitionPair pair;
  double sigma2 = 0.0;
  double alpha0 = 0.0, alpha1 = 0.0, alpha2 = 0.0;
  double log_posterior = 0.0;
};

struct AcceptCounter {
  long proposed = 0;
  long accepted = 0;
  double rate() const { return proposed > 0 ? static_cast<double>(accepted) / proposed : 0.0; }
  void tally(bool ok) {
    ++proposed;
    accepted += ok ? 1 : 0;
  }
};

struct PosteriorSamples {
  std::vector<Draw> draws;
  AcceptCounter tables, dishes, restaurants;
  AcceptCounter alpha[3];
  AcceptCounter swaps;
};

// Geometric temperature ladder 1 = T_0 < ... < T_{R-1} = max_temp.
std::vector<double> temperature_ladder(const TemperingConfig& cfg);

// One swap attempt between adjacent rungs a and a+1 (a sampled uniformly).
// Swaps the full states (including sigma2 and alphas) with probability
// min(1, exp[(1/T_a - 1/T_b) (logL_b - logL_a)]) on untempered likelihoods.
bool tempered_swap(std::vector<SamplerState>& rungs, const std::vector<double>& temps,
                   Rng& rng);

// Full MCMC driver: n_chains independent chains (seeds derived from
// cfg.seed), each a parallel-tempered stack when tempering is configured.
// Retained draws come from the cold rung after burn-in at the thinning
// interval, in chain-major order.
PosteriorSamples run_chain(const TwoLevelDataset& data, const Hyperparams& hp,
                           const ChainConfig& cfg,
                           const std::optional<CrfState>& init = std::nullopt);

}  // namespace nhdp
