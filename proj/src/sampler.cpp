#include "nhdp/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <stdexcept>

namespace nhdp {

namespace {

constexpr int kLaunchScans = 5;

inline std::pair<int, int> two_distinct(int n, Rng& rng) {
  int a = rng.uniform_int(n);
  int b = rng.uniform_int(n - 1);
  if (b >= a) ++b;
  return {a, b};
}

// exp for launch passes, which need draws but never densities: a coarser
// but deterministic exp only reshapes the launch distribution a little and
// leaves the proposal densities (computed with libm in the final pass)
// untouched. Degree-6 Taylor on the reduced fraction, ~3e-7 relative.
inline double launch_exp(double x) {
  if (x > 700.0) return std::numeric_limits<double>::infinity();
  if (x < -700.0) return 0.0;
  double t = x * 1.4426950408889634;  // x / ln 2
  double k = std::floor(t + 0.5);
  double r = (t - k) * 0.6931471805599453;
  double p =
      1.0 + r * (1.0 + r * (0.5 + r * (1.0 / 6.0 + r * (1.0 / 24.0 +
                 r * (1.0 / 120.0 + r * (1.0 / 720.0))))));
  std::uint64_t bits = static_cast<std::uint64_t>(static_cast<std::int64_t>(k) + 1023) << 52;
  double two_k;
  std::memcpy(&two_k, &bits, sizeof two_k);
  return p * two_k;
}

// Stable log probabilities of a two-way choice with log weights wA, wB.
inline void two_way_log_probs(double wA, double wB, double& log_pA, double& log_pB) {
  double d = wB - wA;
  if (d > 0.0) {
    log_pB = -std::log1p(std::exp(-d));
    log_pA = log_pB - d;
  } else {
    log_pA = -std::log1p(std::exp(d));
    log_pB = log_pA + d;
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// construction and bookkeeping

SamplerState::SamplerState(const TwoLevelDataset& data, const Hyperparams& hp,
                           const CrfState& init, double beta_lik)
    : data_(&data), hp_(hp), beta_lik_(beta_lik) {
  data.check();
  hp_.check();
  if (beta_lik_ < 0.0 || beta_lik_ > 1.0)
    throw std::invalid_argument("sampler: beta_lik must lie in [0, 1]");
  rebuild_from(init);
}

void SamplerState::rebuild_alpha_tables() {
  const int m = 2 * data_->n_units() + 4;
  log_int_.resize(m);
  lgamma_int_.resize(m);
  log_k0_.resize(m);
  cum_log_a0_.resize(m);
  cum_log_a1_.resize(m);
  inv_k0_.resize(m);
  log_int_[0] = 0.0;  // never queried; placeholder
  lgamma_int_[0] = 0.0;
  cum_log_a0_[0] = 0.0;
  cum_log_a1_[0] = 0.0;
  log_k0_[0] = std::log(hp_.k0);
  inv_k0_[0] = 1.0 / hp_.k0;
  for (int i = 1; i < m; ++i) {
    log_int_[i] = std::log(static_cast<double>(i));
    lgamma_int_[i] = std::lgamma(static_cast<double>(i));
    log_k0_[i] = std::log(i + hp_.k0);
    inv_k0_[i] = 1.0 / (i + hp_.k0);
    cum_log_a0_[i] = cum_log_a0_[i - 1] + std::log(hp_.alpha0 + (i - 1));
    cum_log_a1_[i] = cum_log_a1_[i - 1] + std::log(hp_.alpha1 + (i - 1));
  }
  rebuild_sigma_constants();
}

void SamplerState::rebuild_sigma_constants() {
  log_2pi_sigma2_ = std::log(2.0 * M_PI * hp_.sigma2);
  inv_2sigma2_ = 1.0 / (2.0 * hp_.sigma2);
}

void SamplerState::set_hyperparams(const Hyperparams& hp) {
  hp.check();
  hp_ = hp;
  rebuild_alpha_tables();
}

void SamplerState::rebuild_from(const CrfState& state) {
  {
    auto violations = validate(state, *data_);
    if (!violations.empty())
      throw std::invalid_argument("sampler: invalid initial state: " + violations.front());
  }
  const int n = data_->n_units();
  const int L = data_->n_groups;
  const int R = state.n_restaurants();
  const int D = state.n_dishes();

  table_.clear();
  dish_.assign(D, {});
  rest_.assign(R, {});
  free_tables_.clear();
  free_dishes_.clear();
  free_rests_.clear();

  // Handles follow the canonical labels of `state`: restaurant handle ==
  // restaurant label, dish handle == dish label, table handles sequential in
  // (restaurant, table label) order. Tests rely on this layout being stable.
  rest_of_group_.resize(L);
  for (int g = 0; g < L; ++g) rest_of_group_[g] = state.restaurant_of_group[g];

  std::vector<std::vector<int>> handle_of(R);
  int next_table = 0;
  for (int r = 0; r < R; ++r) {
    rest_[r].tables.clear();
    handle_of[r].resize(state.dish_of_table[r].size());
    for (size_t t = 0; t < state.dish_of_table[r].size(); ++t) {
      int h = next_table++;
      handle_of[r][t] = h;
      table_.push_back({});
      table_[h].rest = r;
      table_[h].dish = state.dish_of_table[r][t];
      rest_[r].tables.push_back(h);
    }
  }
  for (int g = 0; g < L; ++g) rest_[state.restaurant_of_group[g]].groups.push_back(g);

  table_of_.resize(n);
  for (int i = 0; i < n; ++i) {
    int r = state.restaurant_of_group[data_->group_of[i]];
    int h = handle_of[r][state.table_of_customer[i]];
    table_of_[i] = h;
    table_[h].members.push_back(i);
    table_[h].stats.add(data_->y[i]);
    if (table_[h].min_unit < 0) table_[h].min_unit = i;
    rest_[r].customers.push_back(i);
  }
  for (int h = 0; h < next_table; ++h) {
    dish_[table_[h].dish].tables.push_back(h);
    dish_[table_[h].dish].stats.merge(table_[h].stats);
  }

  live_tables_.resize(next_table);
  table_pos_.resize(next_table);
  for (int h = 0; h < next_table; ++h) live_tables_[h] = table_pos_[h] = h;
  live_dishes_.resize(D);
  dish_pos_.resize(D);
  for (int d = 0; d < D; ++d) live_dishes_[d] = dish_pos_[d] = d;
  live_rests_.resize(R);
  rest_pos_.resize(R);
  for (int r = 0; r < R; ++r) live_rests_[r] = rest_pos_[r] = r;

  rebuild_alpha_tables();
}

void SamplerState::refresh_stats() {
  for (int h : live_tables_) {
    ClusterStats s;
    for (int i : table_[h].members) s.add(data_->y[i]);
    table_[h].stats = s;
  }
  for (int d : live_dishes_) {
    ClusterStats s;
    for (int h : dish_[d].tables) s.merge(table_[h].stats);
    dish_[d].stats = s;
  }
}

int SamplerState::alloc_table() {
  int h;
  if (!free_tables_.empty()) {
    h = free_tables_.back();
    free_tables_.pop_back();
  } else {
    h = static_cast<int>(table_.size());
    table_.push_back({});
    table_pos_.push_back(-1);
  }
  table_[h] = TableRec{};
  table_pos_[h] = static_cast<int>(live_tables_.size());
  live_tables_.push_back(h);
  return h;
}

int SamplerState::alloc_dish() {
  int d;
  if (!free_dishes_.empty()) {
    d = free_dishes_.back();
    free_dishes_.pop_back();
  } else {
    d = static_cast<int>(dish_.size());
    dish_.push_back({});
    dish_pos_.push_back(-1);
  }
  dish_[d] = DishRec{};
  dish_pos_[d] = static_cast<int>(live_dishes_.size());
  live_dishes_.push_back(d);
  return d;
}

int SamplerState::alloc_rest() {
  int s;
  if (!free_rests_.empty()) {
    s = free_rests_.back();
    free_rests_.pop_back();
  } else {
    s = static_cast<int>(rest_.size());
    rest_.push_back({});
    rest_pos_.push_back(-1);
  }
  rest_[s] = RestRec{};
  rest_pos_[s] = static_cast<int>(live_rests_.size());
  live_rests_.push_back(s);
  return s;
}

void SamplerState::free_table(int h) {
  int pos = table_pos_[h];
  int last = live_tables_.back();
  live_tables_[pos] = last;
  table_pos_[last] = pos;
  live_tables_.pop_back();
  table_pos_[h] = -1;
  free_tables_.push_back(h);
}

void SamplerState::free_dish(int d) {
  int pos = dish_pos_[d];
  int last = live_dishes_.back();
  live_dishes_[pos] = last;
  dish_pos_[last] = pos;
  live_dishes_.pop_back();
  dish_pos_[d] = -1;
  free_dishes_.push_back(d);
}

void SamplerState::free_rest(int s) {
  int pos = rest_pos_[s];
  int last = live_rests_.back();
  live_rests_[pos] = last;
  rest_pos_[last] = pos;
  live_rests_.pop_back();
  rest_pos_[s] = -1;
  free_rests_.push_back(s);
}

// ---------------------------------------------------------------------------
// likelihood helpers (table-free inner loops: only lookups and arithmetic)

double SamplerState::lm(const ClusterStats& s) const {
  if (s.n == 0) return 0.0;
  double quad = s.sumsq - s.sum * s.sum * inv_k0_[s.n];
  return -0.5 * s.n * log_2pi_sigma2_ - 0.5 * (log_k0_[s.n] - log_k0_[0]) -
         quad * inv_2sigma2_;
}

double SamplerState::predictive(const ClusterStats& s, double y) const {
  double sum1 = s.sum + y;
  double quad = y * y - sum1 * sum1 * inv_k0_[s.n + 1] + s.sum * s.sum * inv_k0_[s.n];
  return -0.5 * log_2pi_sigma2_ - 0.5 * (log_k0_[s.n + 1] - log_k0_[s.n]) -
         quad * inv_2sigma2_;
}

double SamplerState::block_predictive(const ClusterStats& s, const ClusterStats& block) const {
  if (block.n == 0) return 0.0;
  double sum1 = s.sum + block.sum;
  double quad = block.sumsq - sum1 * sum1 * inv_k0_[s.n + block.n] +
                s.sum * s.sum * inv_k0_[s.n];
  return -0.5 * block.n * log_2pi_sigma2_ - 0.5 * (log_k0_[s.n + block.n] - log_k0_[s.n]) -
         quad * inv_2sigma2_;
}

// ---------------------------------------------------------------------------
// snapshots

CrfState SamplerState::snapshot() const {
  const int n = data_->n_units();
  const int L = data_->n_groups;
  CrfState st;
  std::vector<int> rlab(rest_.size(), -1);
  int next_r = 0;
  st.restaurant_of_group.resize(L);
  for (int g = 0; g < L; ++g) {
    int h = rest_of_group_[g];
    if (rlab[h] < 0) rlab[h] = next_r++;
    st.restaurant_of_group[g] = rlab[h];
  }
  st.dish_of_table.resize(next_r);
  std::vector<int> tlab(table_.size(), -1), dlab(dish_.size(), -1);
  int next_d = 0;
  st.table_of_customer.resize(n);
  for (int i = 0; i < n; ++i) {
    int h = table_of_[i];
    if (tlab[h] < 0) {
      int r = rlab[table_[h].rest];
      tlab[h] = static_cast<int>(st.dish_of_table[r].size());
      int d = table_[h].dish;
      if (dlab[d] < 0) dlab[d] = next_d++;
      st.dish_of_table[r].push_back(dlab[d]);
    }
    st.table_of_customer[i] = tlab[h];
  }
  return st;
}

double SamplerState::log_prior() const { return log_joint_prior(snapshot(), *data_, hp_); }

double SamplerState::log_likelihood_full() const {
  double ll = 0.0;
  for (int d : live_dishes_) {
    ClusterStats s;
    for (int h : dish_[d].tables)
      for (int i : table_[h].members) s.add(data_->y[i]);
    ll += log_marginal_cluster(s, hp_.sigma2, hp_.k0);
  }
  return ll;
}

std::vector<ClusterStats> SamplerState::dish_stats() const {
  std::vector<ClusterStats> out;
  out.reserve(live_dishes_.size());
  for (int d : live_dishes_) out.push_back(dish_[d].stats);
  return out;
}

// ---------------------------------------------------------------------------
// restricted Gibbs scans

// Scan over units for table split/merge launches. Elements are the anchor
// table's customers minus the anchors themselves, in ascending unit order so
// forward and reverse traversals of the same launch state agree exactly.
struct SamplerState::UnitScan {
  const SamplerState* S;
  std::vector<int> elems;
  std::vector<char> side;  // 0 joins the anchor-1 table, 1 the anchor-2 table
  int nA = 1, nB = 1;      // table sizes including anchors
  ClusterStats dA, dB;     // dish-level scratch stats including anchors
  bool same_dish = false;

  void place(size_t idx, char s) {
    side[idx] = s;
    double y = S->data_->y[elems[idx]];
    if (s == 0) {
      ++nA;
      dA.add(y);
    } else {
      ++nB;
      dB.add(y);
    }
  }

  void take_out(size_t idx) {
    double y = S->data_->y[elems[idx]];
    if (side[idx] == 0) {
      --nA;
      dA.remove(y);
    } else {
      --nB;
      dB.remove(y);
    }
  }

  void random_init(Rng& rng) {
    for (size_t idx = 0; idx < elems.size(); ++idx)
      place(idx, rng.uniform01() < 0.5 ? 0 : 1);
  }

  // Launch pass: draws without densities. These passes burn most of the
  // sweep budget, so the two-way choice is done division- and log-free
  // (u < pB with pB = 1 / (1 + exp(wA - wB)); inf and 0 fall out right).
  void launch(Rng& rng) {
    double beta = S->beta_lik_;
    for (size_t idx = 0; idx < elems.size(); ++idx) {
      take_out(idx);
      double y = S->data_->y[elems[idx]];
      double wA = S->log_int_[nA];
      double wB = S->log_int_[nB];
      if (!same_dish && beta != 0.0) {
        wA += beta * S->predictive(dA, y);
        wB += beta * S->predictive(dB, y);
      }
      double e = launch_exp(wA - wB);
      place(idx, rng.uniform01() * (1.0 + e) < 1.0 ? 1 : 0);
    }
  }

  // One full restricted pass. Samples when rng is given, otherwise follows
  // target. Returns the accumulated log transition probability of the pass.
  double scan(Rng* rng, const std::vector<char>* target) {
    double logq = 0.0;
    double beta = S->beta_lik_;
    for (size_t idx = 0; idx < elems.size(); ++idx) {
      take_out(idx);
      double y = S->data_->y[elems[idx]];
      double wA = S->log_int_[nA];
      double wB = S->log_int_[nB];
      if (!same_dish && beta != 0.0) {
        wA += beta * S->predictive(dA, y);
        wB += beta * S->predictive(dB, y);
      }
      double d = wB - wA;
      double e = std::exp(-std::fabs(d));  // shared by the draw and its density
      double log_pA, log_pB;
      if (d > 0.0) {
        log_pB = -std::log1p(e);
        log_pA = log_pB - d;
      } else {
        log_pA = -std::log1p(e);
        log_pB = log_pA + d;
      }
      char s;
      if (rng != nullptr) {
        // u < pB phrased multiplication-only; exact same Bernoulli law.
        double u = rng->uniform01();
        s = (d > 0.0 ? u * (1.0 + e) < 1.0 : u * (1.0 + e) < e) ? 1 : 0;
      } else {
        s = (*target)[idx];
      }
      logq += s == 0 ? log_pA : log_pB;
      place(idx, s);
    }
    return logq;
  }
};

// Scan over whole tables for dish split/merge launches; table order is by
// smallest member unit, again so replays are exact.
struct SamplerState::TableScan {
  const SamplerState* S;
  std::vector<int> elems;  // table handles
  std::vector<char> side;
  int mA = 1, mB = 1;      // dish table counts including anchors
  ClusterStats dA, dB;     // customer-level stats of each candidate dish

  void place(size_t idx, char s) {
    side[idx] = s;
    const ClusterStats& st = S->table_[elems[idx]].stats;
    if (s == 0) {
      ++mA;
      dA.merge(st);
    } else {
      ++mB;
      dB.merge(st);
    }
  }

  void take_out(size_t idx) {
    const ClusterStats& st = S->table_[elems[idx]].stats;
    if (side[idx] == 0) {
      --mA;
      dA.unmerge(st);
    } else {
      --mB;
      dB.unmerge(st);
    }
  }

  void random_init(Rng& rng) {
    for (size_t idx = 0; idx < elems.size(); ++idx)
      place(idx, rng.uniform01() < 0.5 ? 0 : 1);
  }

  // Launch pass without density bookkeeping, as in UnitScan::launch.
  void launch(Rng& rng) {
    double beta = S->beta_lik_;
    for (size_t idx = 0; idx < elems.size(); ++idx) {
      take_out(idx);
      const ClusterStats& st = S->table_[elems[idx]].stats;
      double wA = S->log_int_[mA];
      double wB = S->log_int_[mB];
      if (beta != 0.0) {
        wA += beta * S->block_predictive(dA, st);
        wB += beta * S->block_predictive(dB, st);
      }
      double e = launch_exp(wA - wB);
      place(idx, rng.uniform01() * (1.0 + e) < 1.0 ? 1 : 0);
    }
  }

  double scan(Rng* rng, const std::vector<char>* target) {
    double logq = 0.0;
    double beta = S->beta_lik_;
    for (size_t idx = 0; idx < elems.size(); ++idx) {
      take_out(idx);
      const ClusterStats& st = S->table_[elems[idx]].stats;
      double wA = S->log_int_[mA];
      double wB = S->log_int_[mB];
      if (beta != 0.0) {
        wA += beta * S->block_predictive(dA, st);
        wB += beta * S->block_predictive(dB, st);
      }
      double d = wB - wA;
      double e = std::exp(-std::fabs(d));
      double log_pA, log_pB;
      if (d > 0.0) {
        log_pB = -std::log1p(e);
        log_pA = log_pB - d;
      } else {
        log_pA = -std::log1p(e);
        log_pB = log_pA + d;
      }
      char s;
      if (rng != nullptr) {
        double u = rng->uniform01();
        s = (d > 0.0 ? u * (1.0 + e) < 1.0 : u * (1.0 + e) < e) ? 1 : 0;
      } else {
        s = (*target)[idx];
      }
      logq += s == 0 ? log_pA : log_pB;
      place(idx, s);
    }
    return logq;
  }
};

// ---------------------------------------------------------------------------
// table-level split-merge

MoveInfo SamplerState::tables_move(Rng& rng, const MoveOverride* ovr) {
  int i1, i2;
  if (ovr != nullptr && ovr->e1 >= 0) {
    i1 = ovr->e1;
    i2 = ovr->e2;
    if (rest_of_group_[data_->group_of[i1]] != rest_of_group_[data_->group_of[i2]])
      throw std::invalid_argument("tables_move: forced anchors sit in different restaurants");
  } else {
    int s = live_rests_[rng.uniform_int(static_cast<int>(live_rests_.size()))];
    const auto& cust = rest_[s].customers;
    if (cust.size() < 2) return MoveInfo{};  // degenerate: counted as a rejection
    auto [a, b] = two_distinct(static_cast<int>(cust.size()), rng);
    i1 = cust[a];
    i2 = cust[b];
  }
  int rest = rest_of_group_[data_->group_of[i1]];
  if (table_of_[i1] == table_of_[i2]) return table_split(rest, i1, i2, rng, ovr);
  return table_merge(i1, i2, rng, ovr);
}

bool SamplerState::decide(double log_ratio, Rng& rng, const MoveOverride* ovr) {
  if (ovr != nullptr && ovr->force_decision != 0) return ovr->force_decision > 0;
  return std::log(rng.uniform_pos()) < log_ratio;
}

MoveInfo SamplerState::table_split(int rest, int i1, int i2, Rng& rng, const MoveOverride* ovr) {
  MoveInfo info;
  info.kind = MoveKind::table_split;
  const int h = table_of_[i1];
  const int dA = table_[h].dish;
  const int D = static_cast<int>(live_dishes_.size());

  // Dish of the split-off table first: uniform over existing dishes plus one
  // new dish, so the choice contributes 1/(D+1) to the proposal density.
  int choice = ovr != nullptr && ovr->dish_choice >= 0 ? ovr->dish_choice
                                                       : rng.uniform_int(D + 1);
  bool new_dish = choice == D;
  int dB = new_dish ? -1 : live_dishes_[choice];
  bool same_dish = !new_dish && dB == dA;

  std::uint64_t seed = ovr != nullptr && ovr->has_launch_seed ? ovr->launch_seed : rng.raw();
  Rng lr(seed);

  UnitScan scan;
  scan.S = this;
  scan.same_dish = same_dish;
  scan.elems.reserve(table_[h].members.size());
  for (int c : table_[h].members)
    if (c != i1 && c != i2) scan.elems.push_back(c);
  std::sort(scan.elems.begin(), scan.elems.end());
  scan.side.assign(scan.elems.size(), 0);
  // Scratch dish stats: current dishes with the anchor table's members pulled
  // out, plus each anchor on its own side.
  scan.dA = dish_[dA].stats;
  scan.dA.unmerge(table_[h].stats);
  scan.dA.add(data_->y[i1]);
  if (!new_dish && !same_dish) scan.dB = dish_[dB].stats;
  scan.dB.add(data_->y[i2]);

  scan.random_init(lr);
  for (int k = 0; k < kLaunchScans; ++k) scan.launch(lr);
  double log_cfg = scan.scan(&lr, nullptr);

  info.log_q_fwd = -std::log(static_cast<double>(D + 1)) + log_cfg;
  info.log_q_rev = 0.0;  // the reversing merge is deterministic

  const int T = static_cast<int>(live_tables_.size());
  const int m_h = static_cast<int>(table_[h].members.size());
  double d_prior = std::log(hp_.alpha1) + lgamma_int_[scan.nA] + lgamma_int_[scan.nB] -
                   lgamma_int_[m_h];
  d_prior += new_dish ? std::log(hp_.alpha0)
                      : log_int_[static_cast<int>(dish_[dB].tables.size())];
  d_prior -= cum_log_a0_[T + 1] - cum_log_a0_[T];
  info.d_log_prior = d_prior;

  if (!same_dish) {
    double before = lm(dish_[dA].stats) + (new_dish ? 0.0 : lm(dish_[dB].stats));
    info.d_log_lik = beta_lik_ * (lm(scan.dA) + lm(scan.dB) - before);
  }

  info.log_accept_ratio = info.log_q_rev - info.log_q_fwd + info.d_log_prior + info.d_log_lik;
  if (!decide(info.log_accept_ratio, rng, ovr)) return info;
  info.accepted = true;

  // Apply: anchor table keeps side 0, a fresh table takes side 1.
  std::vector<int> membersA{i1}, membersB{i2};
  for (size_t idx = 0; idx < scan.elems.size(); ++idx)
    (scan.side[idx] == 0 ? membersA : membersB).push_back(scan.elems[idx]);

  int hB = alloc_table();
  int dish_b = new_dish ? alloc_dish() : dB;
  table_[hB].rest = rest;
  table_[hB].dish = dish_b;
  table_[hB].members = std::move(membersB);
  ClusterStats statsB;
  int min_b = table_[hB].members.front();
  for (int c : table_[hB].members) {
    statsB.add(data_->y[c]);
    table_of_[c] = hB;
    min_b = std::min(min_b, c);
  }
  table_[hB].stats = statsB;
  table_[hB].min_unit = min_b;

  table_[h].members = std::move(membersA);
  table_[h].stats.unmerge(statsB);
  table_[h].min_unit = *std::min_element(table_[h].members.begin(), table_[h].members.end());

  rest_[rest].tables.push_back(hB);
  dish_[dish_b].tables.push_back(hB);
  if (dish_b != dA) {
    dish_[dA].stats.unmerge(statsB);
    dish_[dish_b].stats.merge(statsB);
  }
  return info;
}

MoveInfo SamplerState::table_merge(int i1, int i2, Rng& rng, const MoveOverride* ovr) {
  MoveInfo info;
  info.kind = MoveKind::table_merge;
  const int h1 = table_of_[i1], h2 = table_of_[i2];
  const int d1 = table_[h1].dish, d2 = table_[h2].dish;
  const bool same_dish = d1 == d2;

  // Dish count of the merged state, for the reverse split's 1/(D*+1) factor.
  int D_after = static_cast<int>(live_dishes_.size()) -
                ((!same_dish && dish_[d2].tables.size() == 1) ? 1 : 0);

  std::uint64_t seed = ovr != nullptr && ovr->has_launch_seed ? ovr->launch_seed : rng.raw();
  Rng lr(seed);

  UnitScan scan;
  scan.S = this;
  scan.same_dish = same_dish;
  scan.elems.reserve(table_[h1].members.size() + table_[h2].members.size());
  for (int c : table_[h1].members)
    if (c != i1) scan.elems.push_back(c);
  for (int c : table_[h2].members)
    if (c != i2) scan.elems.push_back(c);
  std::sort(scan.elems.begin(), scan.elems.end());
  scan.side.assign(scan.elems.size(), 0);
  // Scratch stats as the reverse split would see them from the merged state:
  // dish stats minus each anchor table's members, plus the anchor itself.
  // (Identical whether computed from the current or the merged state.)
  if (!same_dish) {
    scan.dA = dish_[d1].stats;
    scan.dA.unmerge(table_[h1].stats);
    scan.dB = dish_[d2].stats;
    scan.dB.unmerge(table_[h2].stats);
  }
  scan.dA.add(data_->y[i1]);
  scan.dB.add(data_->y[i2]);

  std::vector<char> target(scan.elems.size());
  for (size_t idx = 0; idx < scan.elems.size(); ++idx)
    target[idx] = table_of_[scan.elems[idx]] == h1 ? 0 : 1;

  scan.random_init(lr);
  for (int k = 0; k < kLaunchScans; ++k) scan.launch(lr);
  double log_cfg = scan.scan(nullptr, &target);

  info.log_q_fwd = 0.0;
  info.log_q_rev = -std::log(static_cast<double>(D_after + 1)) + log_cfg;

  const int T = static_cast<int>(live_tables_.size());
  const int n1 = static_cast<int>(table_[h1].members.size());
  const int n2 = static_cast<int>(table_[h2].members.size());
  double d_prior = lgamma_int_[n1 + n2] - lgamma_int_[n1] - lgamma_int_[n2] -
                   std::log(hp_.alpha1);
  d_prior += cum_log_a0_[T] - cum_log_a0_[T - 1];
  if (same_dish) {
    d_prior -= log_int_[static_cast<int>(dish_[d1].tables.size()) - 1];
  } else if (dish_[d2].tables.size() == 1) {
    d_prior -= std::log(hp_.alpha0);
  } else {
    d_prior -= log_int_[static_cast<int>(dish_[d2].tables.size()) - 1];
  }
  info.d_log_prior = d_prior;

  if (!same_dish) {
    ClusterStats merged1 = dish_[d1].stats;
    merged1.merge(table_[h2].stats);
    ClusterStats rest2 = dish_[d2].stats;
    rest2.unmerge(table_[h2].stats);
    info.d_log_lik = beta_lik_ * (lm(merged1) + lm(rest2) - lm(dish_[d1].stats) -
                                  lm(dish_[d2].stats));
  }

  info.log_accept_ratio = info.log_q_rev - info.log_q_fwd + info.d_log_prior + info.d_log_lik;
  if (!decide(info.log_accept_ratio, rng, ovr)) return info;
  info.accepted = true;

  // Apply: h2 folds into h1; h2's dish loses a table (and disappears when
  // that was its last one).
  for (int c : table_[h2].members) {
    table_of_[c] = h1;
    table_[h1].members.push_back(c);
  }
  table_[h1].stats.merge(table_[h2].stats);
  table_[h1].min_unit = std::min(table_[h1].min_unit, table_[h2].min_unit);
  if (!same_dish) {
    dish_[d1].stats.merge(table_[h2].stats);
    dish_[d2].stats.unmerge(table_[h2].stats);
  }
  auto& tl2 = dish_[d2].tables;
  tl2.erase(std::find(tl2.begin(), tl2.end(), h2));
  if (tl2.empty()) free_dish(d2);
  auto& rt = rest_[table_[h1].rest].tables;
  rt.erase(std::find(rt.begin(), rt.end(), h2));
  free_table(h2);
  return info;
}

// ---------------------------------------------------------------------------
// dish-level split-merge (block moves of whole tables)

MoveInfo SamplerState::dishes_move(Rng& rng, const MoveOverride* ovr) {
  if (live_tables_.size() < 2) return MoveInfo{};  // degenerate
  int t1, t2;
  if (ovr != nullptr && ovr->e1 >= 0) {
    t1 = ovr->e1;
    t2 = ovr->e2;
  } else {
    auto [a, b] = two_distinct(static_cast<int>(live_tables_.size()), rng);
    t1 = live_tables_[a];
    t2 = live_tables_[b];
  }
  if (table_[t1].dish == table_[t2].dish) return dish_split(t1, t2, rng, ovr);
  return dish_merge(t1, t2, rng, ovr);
}

namespace {
// Ascending order of smallest member unit (unique per table).
struct ByMinUnit {
  const std::vector<int>* min_unit;
  bool operator()(int a, int b) const { return (*min_unit)[a] < (*min_unit)[b]; }
};
}  // namespace

MoveInfo SamplerState::dish_split(int t1, int t2, Rng& rng, const MoveOverride* ovr) {
  MoveInfo info;
  info.kind = MoveKind::dish_split;
  const int d = table_[t1].dish;

  std::uint64_t seed = ovr != nullptr && ovr->has_launch_seed ? ovr->launch_seed : rng.raw();
  Rng lr(seed);

  TableScan scan;
  scan.S = this;
  scan.elems.reserve(dish_[d].tables.size());
  for (int h : dish_[d].tables)
    if (h != t1 && h != t2) scan.elems.push_back(h);
  std::vector<int> keys(table_.size());
  for (size_t i = 0; i < table_.size(); ++i) keys[i] = table_[i].min_unit;
  std::sort(scan.elems.begin(), scan.elems.end(), ByMinUnit{&keys});
  scan.side.assign(scan.elems.size(), 0);
  scan.dA = table_[t1].stats;
  scan.dB = table_[t2].stats;

  scan.random_init(lr);
  for (int k = 0; k < kLaunchScans; ++k) scan.launch(lr);
  double log_cfg = scan.scan(&lr, nullptr);

  info.log_q_fwd = log_cfg;
  info.log_q_rev = 0.0;

  const int m = static_cast<int>(dish_[d].tables.size());
  info.d_log_prior = std::log(hp_.alpha0) + lgamma_int_[scan.mA] + lgamma_int_[scan.mB] -
                     lgamma_int_[m];
  info.d_log_lik = beta_lik_ * (lm(scan.dA) + lm(scan.dB) - lm(dish_[d].stats));

  info.log_accept_ratio = info.log_q_rev - info.log_q_fwd + info.d_log_prior + info.d_log_lik;
  if (!decide(info.log_accept_ratio, rng, ovr)) return info;
  info.accepted = true;

  int dB = alloc_dish();
  std::vector<int> keepA{t1}, moveB{t2};
  for (size_t idx = 0; idx < scan.elems.size(); ++idx)
    (scan.side[idx] == 0 ? keepA : moveB).push_back(scan.elems[idx]);
  dish_[d].tables = std::move(keepA);
  dish_[d].stats = scan.dA;
  dish_[dB].tables = std::move(moveB);
  dish_[dB].stats = scan.dB;
  for (int h : dish_[dB].tables) table_[h].dish = dB;
  return info;
}

MoveInfo SamplerState::dish_merge(int t1, int t2, Rng& rng, const MoveOverride* ovr) {
  MoveInfo info;
  info.kind = MoveKind::dish_merge;
  const int d1 = table_[t1].dish, d2 = table_[t2].dish;

  std::uint64_t seed = ovr != nullptr && ovr->has_launch_seed ? ovr->launch_seed : rng.raw();
  Rng lr(seed);

  TableScan scan;
  scan.S = this;
  scan.elems.reserve(dish_[d1].tables.size() + dish_[d2].tables.size());
  for (int h : dish_[d1].tables)
    if (h != t1) scan.elems.push_back(h);
  for (int h : dish_[d2].tables)
    if (h != t2) scan.elems.push_back(h);
  std::vector<int> keys(table_.size());
  for (size_t i = 0; i < table_.size(); ++i) keys[i] = table_[i].min_unit;
  std::sort(scan.elems.begin(), scan.elems.end(), ByMinUnit{&keys});
  scan.side.assign(scan.elems.size(), 0);
  scan.dA = table_[t1].stats;
  scan.dB = table_[t2].stats;

  std::vector<char> target(scan.elems.size());
  for (size_t idx = 0; idx < scan.elems.size(); ++idx)
    target[idx] = table_[scan.elems[idx]].dish == d1 ? 0 : 1;

  scan.random_init(lr);
  for (int k = 0; k < kLaunchScans; ++k) scan.launch(lr);
  double log_cfg = scan.scan(nullptr, &target);

  info.log_q_fwd = 0.0;
  info.log_q_rev = log_cfg;

  const int m1 = static_cast<int>(dish_[d1].tables.size());
  const int m2 = static_cast<int>(dish_[d2].tables.size());
  info.d_log_prior = lgamma_int_[m1 + m2] - lgamma_int_[m1] - lgamma_int_[m2] -
                     std::log(hp_.alpha0);
  ClusterStats merged = dish_[d1].stats;
  merged.merge(dish_[d2].stats);
  info.d_log_lik =
      beta_lik_ * (lm(merged) - lm(dish_[d1].stats) - lm(dish_[d2].stats));

  info.log_accept_ratio = info.log_q_rev - info.log_q_fwd + info.d_log_prior + info.d_log_lik;
  if (!decide(info.log_accept_ratio, rng, ovr)) return info;
  info.accepted = true;

  for (int h : dish_[d2].tables) {
    table_[h].dish = d1;
    dish_[d1].tables.push_back(h);
  }
  dish_[d1].stats = merged;
  free_dish(d2);
  return info;
}

// ---------------------------------------------------------------------------
// restaurant-level split-merge

// Sequential allocation of a restaurant's groups to two sides. Used in sample
// mode by the split proposal and in score mode (target sides given) by the
// merge proposal's reverse density; both run the same arithmetic.
struct SamplerState::RestAlloc {
  struct Parent {
    int dish = -1;
    std::vector<std::pair<int, int>> frag;  // (group, member count)
    int size = 0;
  };
  std::vector<Parent> parents;
  std::vector<int> groups;                          // ascending group ids
  std::vector<std::vector<std::pair<int, int>>> frags_of_group;  // index into groups order
  std::vector<int> group_size;                      // customers per group (in this restaurant)
  std::vector<int> n_dish;                          // dish handle -> ambient table count
  std::vector<int> split_m;                         // dish handle -> parents split so far
  std::vector<int> cnt[2];                          // per parent: members per side
  int ng[2] = {0, 0}, nc[2] = {0, 0}, nt[2] = {0, 0};

  void build_group_index() {
    frags_of_group.assign(groups.size(), {});
    group_size.assign(groups.size(), 0);
    for (size_t p = 0; p < parents.size(); ++p) {
      for (auto [g, c] : parents[p].frag) {
        size_t gi = std::lower_bound(groups.begin(), groups.end(), g) - groups.begin();
        frags_of_group[gi].push_back({static_cast<int>(p), c});
        group_size[gi] += c;
      }
    }
    cnt[0].assign(parents.size(), 0);
    cnt[1].assign(parents.size(), 0);
  }

  // Log weight change of putting group gi on side s (table-partition CRP
  // terms plus the dish-count correction for tables this assignment splits).
  double delta(const SamplerState& S, size_t gi, int s) const {
    double d = 0.0;
    int o = 1 - s;
    // Corrections can hit the same dish more than once within one group, so
    // track local increments on top of the committed split_m counters.
    std::vector<std::pair<int, int>> local;
    for (auto [p, c] : frags_of_group[gi]) {
      int cur = cnt[s][p];
      if (cur == 0) {
        d += std::log(S.hp_.alpha1) + S.lgamma_int_[c];
        if (cnt[o][p] > 0) {
          int dh = parents[p].dish;
          int extra = 0;
          bool found = false;
          for (auto& [ld, le] : local)
            if (ld == dh) {
              extra = le;
              ++le;
              found = true;
              break;
            }
          if (!found) local.push_back({dh, 1});
          d += std::log(static_cast<double>(n_dish[dh] + split_m[dh] + extra));
        }
      } else {
        d += S.lgamma_int_[cur + c] - S.lgamma_int_[cur];
      }
    }
    d -= S.cum_log_a1_[nc[s] + group_size[gi]] - S.cum_log_a1_[nc[s]];
    return d;
  }

  void commit(const SamplerState& S, size_t gi, int s) {
    (void)S;
    int o = 1 - s;
    for (auto [p, c] : frags_of_group[gi]) {
      if (cnt[s][p] == 0) {
        ++nt[s];
        if (cnt[o][p] > 0) ++split_m[parents[p].dish];
      }
      cnt[s][p] += c;
    }
    nc[s] += group_size[gi];
    ++ng[s];
  }

  // Anchors first (no contribution to the density), then the remaining groups
  // in ascending order. Returns the accumulated log density of the choices.
  double run(const SamplerState& S, int anchor0, int anchor1, Rng* rng,
             const std::vector<int>* target_side, std::vector<int>& side_of_group) {
    side_of_group.assign(S.data_->n_groups, 0);
    split_m.assign(S.dish_.size(), 0);
    size_t a0 = std::lower_bound(groups.begin(), groups.end(), anchor0) - groups.begin();
    size_t a1 = std::lower_bound(groups.begin(), groups.end(), anchor1) - groups.begin();
    commit(S, a0, 0);
    commit(S, a1, 1);
    side_of_group[anchor0] = 0;
    side_of_group[anchor1] = 1;
    double logq = 0.0;
    for (size_t gi = 0; gi < groups.size(); ++gi) {
      if (gi == a0 || gi == a1) continue;
      double w0 = delta(S, gi, 0) + S.log_int_[ng[0]];
      double w1 = delta(S, gi, 1) + S.log_int_[ng[1]];
      double log_p0, log_p1;
      two_way_log_probs(w0, w1, log_p0, log_p1);
      int s;
      if (rng != nullptr)
        s = rng->uniform01() < std::exp(log_p1) ? 1 : 0;
      else
        s = (*target_side)[groups[gi]];
      logq += s == 0 ? log_p0 : log_p1;
      commit(S, gi, s);
      side_of_group[groups[gi]] = s;
    }
    return logq;
  }
};

MoveInfo SamplerState::restaurants_move(Rng& rng, const MoveOverride* ovr) {
  const int L = data_->n_groups;
  if (L < 2) return MoveInfo{};  // degenerate
  int g1, g2;
  if (ovr != nullptr && ovr->e1 >= 0) {
    g1 = ovr->e1;
    g2 = ovr->e2;
  } else {
    auto [a, b] = two_distinct(L, rng);
    g1 = a;
    g2 = b;
  }
  if (rest_of_group_[g1] == rest_of_group_[g2]) return restaurant_split(g1, g2, rng, ovr);
  return restaurant_merge(g1, g2, rng, ovr);
}

MoveInfo SamplerState::restaurant_split(int g1, int g2, Rng& rng, const MoveOverride* ovr) {
  MoveInfo info;
  info.kind = MoveKind::restaurant_split;
  const int s = rest_of_group_[g1];

  RestAlloc alloc;
  alloc.groups = rest_[s].groups;
  std::sort(alloc.groups.begin(), alloc.groups.end());
  std::vector<int> sorted_tables = rest_[s].tables;
  {
    std::vector<int> keys(table_.size());
    for (size_t i = 0; i < table_.size(); ++i) keys[i] = table_[i].min_unit;
    std::sort(sorted_tables.begin(), sorted_tables.end(), ByMinUnit{&keys});
  }
  alloc.parents.reserve(sorted_tables.size());
  for (int h : sorted_tables) {
    RestAlloc::Parent p;
    p.dish = table_[h].dish;
    p.size = static_cast<int>(table_[h].members.size());
    // Member counts by group, in ascending group order.
    std::vector<int> per_group(data_->n_groups, 0);
    for (int c : table_[h].members) ++per_group[data_->group_of[c]];
    for (int g : alloc.groups)
      if (per_group[g] > 0) p.frag.push_back({g, per_group[g]});
    alloc.parents.push_back(std::move(p));
  }
  alloc.n_dish.assign(dish_.size(), 0);
  for (size_t d = 0; d < dish_.size(); ++d)
    alloc.n_dish[d] = static_cast<int>(dish_[d].tables.size());
  alloc.build_group_index();

  std::vector<int> side_of_group;
  // The allocation is itself random but needs no replay seed: score mode is
  // deterministic and sample mode is only used going forward.
  info.log_q_fwd = alloc.run(*this, g1, g2, &rng, nullptr, side_of_group);

  // Reverse density: the probability that a merge of the two new restaurants
  // reproduces this state. Per dish: match min(a,b) tables across sides
  // uniformly (injection into the larger side) and flip a fair coin per
  // matched pair; the split tables are forced pairs that must fuse.
  std::vector<int> a_cnt(dish_.size(), 0), b_cnt(dish_.size(), 0), r_cnt(dish_.size(), 0);
  std::vector<int> touched;
  for (size_t p = 0; p < alloc.parents.size(); ++p) {
    int dh = alloc.parents[p].dish;
    if (a_cnt[dh] == 0 && b_cnt[dh] == 0) touched.push_back(dh);
    if (alloc.cnt[0][p] > 0) ++a_cnt[dh];
    if (alloc.cnt[1][p] > 0) ++b_cnt[dh];
    if (alloc.cnt[0][p] > 0 && alloc.cnt[1][p] > 0) ++r_cnt[dh];
  }
  double q_rev = 0.0;
  int r_total = 0;
  for (int dh : touched) {
    int k = std::min(a_cnt[dh], b_cnt[dh]);
    int nmax = std::max(a_cnt[dh], b_cnt[dh]);
    r_total += r_cnt[dh];
    if (k == 0) continue;
    q_rev += lgamma_int_[nmax - r_cnt[dh] + 1] - lgamma_int_[nmax + 1] + k * std::log(0.5);
  }
  info.log_q_rev = q_rev;

  // Prior change. Restaurant level: one cluster of ng0+ng1 groups becomes two.
  double d_prior = std::log(hp_.alpha2) + lgamma_int_[alloc.ng[0]] + lgamma_int_[alloc.ng[1]] -
                   lgamma_int_[alloc.ng[0] + alloc.ng[1]];
  // Table level: restaurant s's seating CRP is replaced by one per side.
  double before_t = 0.0, after_t = 0.0;
  for (size_t p = 0; p < alloc.parents.size(); ++p) {
    before_t += std::log(hp_.alpha1) + lgamma_int_[alloc.parents[p].size];
    for (int sd = 0; sd < 2; ++sd)
      if (alloc.cnt[sd][p] > 0) after_t += std::log(hp_.alpha1) + lgamma_int_[alloc.cnt[sd][p]];
  }
  before_t -= cum_log_a1_[alloc.nc[0] + alloc.nc[1]];
  after_t -= cum_log_a1_[alloc.nc[0]] + cum_log_a1_[alloc.nc[1]];
  d_prior += after_t - before_t;
  // Dish level: each split table adds one table to its dish's count, and the
  // total table count grows by r_total.
  const int T = static_cast<int>(live_tables_.size());
  for (int dh : touched)
    if (r_cnt[dh] > 0)
      d_prior += lgamma_int_[alloc.n_dish[dh] + r_cnt[dh]] - lgamma_int_[alloc.n_dish[dh]];
  d_prior -= cum_log_a0_[T + r_total] - cum_log_a0_[T];
  info.d_log_prior = d_prior;
  info.d_log_lik = 0.0;  // units keep their dishes exactly

  info.log_accept_ratio = info.log_q_rev - info.log_q_fwd + info.d_log_prior + info.d_log_lik;
  if (!decide(info.log_accept_ratio, rng, ovr)) return info;
  info.accepted = true;

  // Restaurant moves are rare enough to apply at the value level.
  CrfState cur = snapshot();
  int s_label = induced_restaurant_label(cur, g1);
  rebuild_from(apply_restaurant_split(cur, *data_, s_label, side_of_group));
  return info;
}

MoveInfo SamplerState::restaurant_merge(int g1, int g2, Rng& rng, const MoveOverride* ovr) {
  MoveInfo info;
  info.kind = MoveKind::restaurant_merge;
  const int s1 = rest_of_group_[g1], s2 = rest_of_group_[g2];

  std::vector<int> keys(table_.size());
  for (size_t i = 0; i < table_.size(); ++i) keys[i] = table_[i].min_unit;
  std::vector<int> tabs1 = rest_[s1].tables, tabs2 = rest_[s2].tables;
  std::sort(tabs1.begin(), tabs1.end(), ByMinUnit{&keys});
  std::sort(tabs2.begin(), tabs2.end(), ByMinUnit{&keys});

  // Group each side's tables by dish: only dishes served in both restaurants
  // can have matched (and possibly fused) table pairs.
  std::vector<int> dishes_seen;
  std::vector<std::vector<int>> of_dish1(dish_.size()), of_dish2(dish_.size());
  for (int h : tabs1) {
    if (of_dish1[table_[h].dish].empty() && of_dish2[table_[h].dish].empty())
      dishes_seen.push_back(table_[h].dish);
    of_dish1[table_[h].dish].push_back(h);
  }
  for (int h : tabs2) {
    if (of_dish1[table_[h].dish].empty() && of_dish2[table_[h].dish].empty())
      dishes_seen.push_back(table_[h].dish);
    of_dish2[table_[h].dish].push_back(h);
  }

  std::vector<std::pair<int, int>> pairs;  // (table of s1, table of s2)
  std::vector<char> flags;
  double q_fwd = 0.0;
  if (ovr != nullptr && ovr->forced_matching != nullptr) {
    if (ovr->forced_flags == nullptr)
      throw std::invalid_argument("restaurant_merge: forced matching without flags");
    pairs = *ovr->forced_matching;
    flags.assign(ovr->forced_flags->begin(), ovr->forced_flags->end());
  } else {
    for (int dh : dishes_seen) {
      auto& A = of_dish1[dh];
      auto& B = of_dish2[dh];
      if (A.empty() || B.empty()) continue;
      bool a_small = A.size() <= B.size();
      const auto& small = a_small ? A : B;
      std::vector<int> pool = a_small ? B : A;
      for (int hs : small) {
        int j = rng.uniform_int(static_cast<int>(pool.size()));
        int hl = pool[j];
        pool[j] = pool.back();
        pool.pop_back();
        pairs.push_back(a_small ? std::make_pair(hs, hl) : std::make_pair(hl, hs));
        flags.push_back(rng.bernoulli(0.5) ? 1 : 0);
      }
    }
  }
  // Density of the realized outcome: matchings that agree on the fused pairs
  // are interchangeable, so only |fused| matters per dish.
  std::vector<int> fused_cnt(dish_.size(), 0);
  int fused_total = 0;
  for (size_t i = 0; i < pairs.size(); ++i) {
    if (flags[i]) {
      ++fused_cnt[table_[pairs[i].first].dish];
      ++fused_total;
    }
  }
  for (int dh : dishes_seen) {
    int a = static_cast<int>(of_dish1[dh].size());
    int b = static_cast<int>(of_dish2[dh].size());
    int k = std::min(a, b);
    int nmax = std::max(a, b);
    if (k == 0) continue;
    q_fwd += lgamma_int_[nmax - fused_cnt[dh] + 1] - lgamma_int_[nmax + 1] + k * std::log(0.5);
  }
  info.log_q_fwd = q_fwd;

  // Reverse density: a split of the merged restaurant must re-derive the two
  // current restaurants via the sequential group allocation, scored against
  // the actual sides. Parents are the merged restaurant's tables: fused pairs
  // act as single tables.
  RestAlloc alloc;
  alloc.groups.reserve(rest_[s1].groups.size() + rest_[s2].groups.size());
  alloc.groups.insert(alloc.groups.end(), rest_[s1].groups.begin(), rest_[s1].groups.end());
  alloc.groups.insert(alloc.groups.end(), rest_[s2].groups.begin(), rest_[s2].groups.end());
  std::sort(alloc.groups.begin(), alloc.groups.end());

  std::vector<int> partner2(table_.size(), -1);  // table of s2 -> fused partner in s1
  for (size_t i = 0; i < pairs.size(); ++i)
    if (flags[i]) partner2[pairs[i].second] = pairs[i].first;

  auto add_parent = [&](int h, int partner) {
    RestAlloc::Parent p;
    p.dish = table_[h].dish;
    std::vector<int> per_group(data_->n_groups, 0);
    for (int c : table_[h].members) ++per_group[data_->group_of[c]];
    if (partner >= 0)
      for (int c : table_[partner].members) ++per_group[data_->group_of[c]];
    p.size = static_cast<int>(table_[h].members.size()) +
             (partner >= 0 ? static_cast<int>(table_[partner].members.size()) : 0);
    for (int g : alloc.groups)
      if (per_group[g] > 0) p.frag.push_back({g, per_group[g]});
    alloc.parents.push_back(std::move(p));
  };
  // Merged tables sorted by min member unit, exactly as a split proposal
  // would see them after the merge.
  std::vector<std::pair<int, std::pair<int, int>>> parent_keys;  // (min_unit, (h, partner))
  std::vector<char> consumed(table_.size(), 0);
  for (size_t i = 0; i < pairs.size(); ++i)
    if (flags[i]) consumed[pairs[i].second] = 1;
  for (int h : tabs1) {
    int partner = -1;
    for (size_t i = 0; i < pairs.size(); ++i)
      if (flags[i] && pairs[i].first == h) partner = pairs[i].second;
    int mu = table_[h].min_unit;
    if (partner >= 0) mu = std::min(mu, table_[partner].min_unit);
    parent_keys.push_back({mu, {h, partner}});
  }
  for (int h : tabs2)
    if (!consumed[h]) parent_keys.push_back({table_[h].min_unit, {h, -1}});
  std::sort(parent_keys.begin(), parent_keys.end());
  for (auto& [mu, hp_pair] : parent_keys) {
    (void)mu;
    add_parent(hp_pair.first, hp_pair.second);
  }
  alloc.n_dish.assign(dish_.size(), 0);
  for (size_t d = 0; d < dish_.size(); ++d)
    alloc.n_dish[d] = static_cast<int>(dish_[d].tables.size()) - fused_cnt[d];
  alloc.build_group_index();

  std::vector<int> target(data_->n_groups, 0);
  for (int g : rest_[s2].groups) target[g] = 1;
  std::vector<int> side_of_group;
  info.log_q_rev = alloc.run(*this, g1, g2, nullptr, &target, side_of_group);

  // Prior change, mirroring the split case.
  const int G1 = static_cast<int>(rest_[s1].groups.size());
  const int G2 = static_cast<int>(rest_[s2].groups.size());
  double d_prior = lgamma_int_[G1 + G2] - lgamma_int_[G1] - lgamma_int_[G2] -
                   std::log(hp_.alpha2);
  double before_t = 0.0, after_t = 0.0;
  int nc1 = static_cast<int>(rest_[s1].customers.size());
  int nc2 = static_cast<int>(rest_[s2].customers.size());
  for (int h : tabs1)
    before_t += std::log(hp_.alpha1) + lgamma_int_[table_[h].members.size()];
  for (int h : tabs2)
    before_t += std::log(hp_.alpha1) + lgamma_int_[table_[h].members.size()];
  before_t -= cum_log_a1_[nc1] + cum_log_a1_[nc2];
  for (const auto& p : alloc.parents) after_t += std::log(hp_.alpha1) + lgamma_int_[p.size];
  after_t -= cum_log_a1_[nc1 + nc2];
  d_prior += after_t - before_t;
  const int T = static_cast<int>(live_tables_.size());
  for (int dh : dishes_seen)
    if (fused_cnt[dh] > 0)
      d_prior += lgamma_int_[alloc.n_dish[dh]] - lgamma_int_[alloc.n_dish[dh] + fused_cnt[dh]];
  d_prior += cum_log_a0_[T] - cum_log_a0_[T - fused_total];
  info.d_log_prior = d_prior;
  info.d_log_lik = 0.0;

  info.log_accept_ratio = info.log_q_rev - info.log_q_fwd + info.d_log_prior + info.d_log_lik;
  if (!decide(info.log_accept_ratio, rng, ovr)) return info;
  info.accepted = true;

  CrfState cur = snapshot();
  auto [l1, table_label] = state_labels(cur);
  std::vector<std::pair<int, int>> label_pairs;
  std::vector<char> label_flags;
  for (size_t i = 0; i < pairs.size(); ++i) {
    if (!flags[i]) continue;
    label_pairs.push_back({table_label[pairs[i].first].second,
                           table_label[pairs[i].second].second});
    label_flags.push_back(1);
  }
  rebuild_from(apply_restaurant_merge(cur, *data_, l1[s1], l1[s2], label_pairs, label_flags));
  return info;
}

// Label of the restaurant containing group g in the canonical snapshot.
int SamplerState::induced_restaurant_label(const CrfState& snap, int g) const {
  return snap.restaurant_of_group[g];
}

// Maps workspace handles to canonical snapshot labels: restaurant handle ->
// restaurant label, table handle -> (restaurant label, table label).
std::pair<std::vector<int>, std::vector<std::pair<int, int>>> SamplerState::state_labels(
    const CrfState& snap) const {
  std::vector<int> rl(rest_.size(), -1);
  for (int g = 0; g < data_->n_groups; ++g)
    rl[rest_of_group_[g]] = snap.restaurant_of_group[g];
  std::vector<std::pair<int, int>> tl(table_.size(), {-1, -1});
  for (int i = 0; i < data_->n_units(); ++i)
    tl[table_of_[i]] = {snap.restaurant_of_group[data_->group_of[i]],
                        snap.table_of_customer[i]};
  return {rl, tl};
}

// ---------------------------------------------------------------------------
// hyperparameter updates

void SamplerState::gibbs_sigma2(Rng& rng) {
  auto stats = dish_stats();
  hp_.sigma2 = gibbs_sigma2_draw(stats, hp_, rng, beta_lik_);
  rebuild_sigma_constants();
}

bool SamplerState::mh_alpha(AlphaIndex which, Rng& rng) {
  CrfState st = snapshot();
  bool accepted = mh_alpha_update(which, st, *data_, hp_, rng);
  if (accepted) rebuild_alpha_tables();
  return accepted;
}

// ---------------------------------------------------------------------------
// value-level kernels

MoveOutcome sm_tables_move(const CrfState& state, const TwoLevelDataset& data,
                           const Hyperparams& hp, Rng& rng, double beta_lik) {
  SamplerState ws(data, hp, canonicalize(state, data), beta_lik);
  MoveInfo info = ws.tables_move(rng);
  return {ws.snapshot(), info};
}

MoveOutcome sm_dishes_move(const CrfState& state, const TwoLevelDataset& data,
                           const Hyperparams& hp, Rng& rng, double beta_lik) {
  SamplerState ws(data, hp, canonicalize(state, data), beta_lik);
  MoveInfo info = ws.dishes_move(rng);
  return {ws.snapshot(), info};
}

MoveOutcome sm_restaurants_move(const CrfState& state, const TwoLevelDataset& data,
                                const Hyperparams& hp, Rng& rng, double beta_lik) {
  SamplerState ws(data, hp, canonicalize(state, data), beta_lik);
  MoveInfo info = ws.restaurants_move(rng);
  return {ws.snapshot(), info};
}

// ---------------------------------------------------------------------------
// chain driver

std::vector<double> temperature_ladder(const TemperingConfig& cfg) {
  if (cfg.n_rungs < 1) throw std::invalid_argument("tempering: need at least one rung");
  if (!(cfg.max_temp >= 1.0)) throw std::invalid_argument("tempering: max_temp must be >= 1");
  std::vector<double> temps(cfg.n_rungs);
  if (cfg.n_rungs == 1) {
    temps[0] = 1.0;
    return temps;
  }
  for (int r = 0; r < cfg.n_rungs; ++r)
    temps[r] = std::pow(cfg.max_temp, static_cast<double>(r) / (cfg.n_rungs - 1));
  return temps;
}

bool tempered_swap(std::vector<SamplerState>& rungs, const std::vector<double>& temps,
                   Rng& rng) {
  if (rungs.size() < 2) return false;
  if (rungs.size() != temps.size())
    throw std::invalid_argument("tempered_swap: rungs/temperatures length mismatch");
  int a = rng.uniform_int(static_cast<int>(rungs.size()) - 1);
  int b = a + 1;
  double la = rungs[a].log_likelihood_full();
  double lb = rungs[b].log_likelihood_full();
  double log_acc = (1.0 / temps[a] - 1.0 / temps[b]) * (lb - la);
  if (std::log(rng.uniform_pos()) < log_acc) {
    double beta_a = rungs[a].beta_lik(), beta_b = rungs[b].beta_lik();
    std::swap(rungs[a], rungs[b]);
    rungs[a].set_beta_lik(beta_a);  // the inverse temperature stays with the rung
    rungs[b].set_beta_lik(beta_b);
    return true;
  }
  return false;
}

PosteriorSamples run_chain(const TwoLevelDataset& data, const Hyperparams& hp,
                           const ChainConfig& cfg, const std::optional<CrfState>& init) {
  data.check();
  hp.check();
  if (cfg.n_iter < 1 || cfg.burn_in < 0 || cfg.burn_in >= cfg.n_iter)
    throw std::invalid_argument("run_chain: need 0 <= burn_in < n_iter");
  if (cfg.thin < 1) throw std::invalid_argument("run_chain: thin must be >= 1");
  if (cfg.n_chains < 1) throw std::invalid_argument("run_chain: need at least one chain");

  const int L = data.n_groups;
  const int n = data.n_units();
  int mr = cfg.moves.restaurants >= 0 ? cfg.moves.restaurants : L;
  int mt = cfg.moves.tables >= 0 ? cfg.moves.tables : (n + 1) / 2;
  int md = cfg.moves.dishes >= 0 ? cfg.moves.dishes : 10;

  std::vector<double> temps{1.0};
  if (cfg.tempering) temps = temperature_ladder(*cfg.tempering);

  CrfState start = init ? canonicalize(*init, data) : all_merged_state(data);

  // Per-sweep slate of elementary moves. The counts are fixed but the order
  // is reshuffled every sweep: under a fixed order, paired proposals whose
  // acceptance ratio lands exactly at one undo each other deterministically
  // on tiny problems and leave states unreachable at sweep boundaries.
  std::vector<int> slate;
  slate.insert(slate.end(), mr, 0);
  slate.insert(slate.end(), mt, 1);
  slate.insert(slate.end(), md, 2);

  PosteriorSamples out;
  for (int c = 0; c < cfg.n_chains; ++c) {
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(c)));
    std::vector<SamplerState> rungs;
    rungs.reserve(temps.size());
    for (double t : temps)
      rungs.emplace_back(data, hp, start, cfg.prior_only ? 0.0 : 1.0 / t);

    for (long iter = 1; iter <= cfg.n_iter; ++iter) {
      for (auto& rung : rungs) {
        for (size_t i = slate.size(); i > 1; --i)
          std::swap(slate[i - 1], slate[rng.uniform_int(static_cast<int>(i))]);
        for (int kind : slate) {
          if (kind == 0)
            out.restaurants.tally(rung.restaurants_move(rng).accepted);
          else if (kind == 1)
            out.tables.tally(rung.tables_move(rng).accepted);
          else
            out.dishes.tally(rung.dishes_move(rng).accepted);
        }
        if (hp.sigma2_prior) rung.gibbs_sigma2(rng);
        if (hp.alpha_prior)
          for (int w = 0; w < 3; ++w)
            out.alpha[w].tally(rung.mh_alpha(static_cast<AlphaIndex>(w), rng));
      }
      if (rungs.size() > 1 && !cfg.prior_only)
        out.swaps.tally(tempered_swap(rungs, temps, rng));

      if (iter > cfg.burn_in && (iter - cfg.burn_in) % cfg.thin == 0) {
        SamplerState& cold = rungs.front();
        cold.refresh_stats();
        Draw d;
        d.iteration = iter;
        d.chain = c;
        d.pair = induced_partitions(cold.snapshot(), data);
        d.sigma2 = cold.hp().sigma2;
        d.alpha0 = cold.hp().alpha0;
        d.alpha1 = cold.hp().alpha1;
        d.alpha2 = cold.hp().alpha2;
        d.log_posterior =
            cold.log_prior() + (cfg.prior_only ? 0.0 : cold.log_likelihood_full());
        out.draws.push_back(std::move(d));
      }
    }
  }
  return out;
}

}  // namespace nhdp
