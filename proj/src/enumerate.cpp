#include "nhdp/enumerate.hpp"

#include <algorithm>
#include <stdexcept>

namespace nhdp {

std::vector<std::vector<int>> set_partitions(int n) {
  std::vector<std::vector<int>> out;
  if (n <= 0) {
    out.push_back({});
    return out;
  }
  // Restricted growth strings: a[0] = 0, a[i] <= 1 + max(a[0..i-1]).
  std::vector<int> a(n, 0);
  for (;;) {
    out.push_back(a);
    int i = n - 1;
    for (; i > 0; --i) {
      int mx = 0;
      for (int j = 0; j < i; ++j) mx = std::max(mx, a[j]);
      if (a[i] <= mx) break;
    }
    if (i == 0) break;
    ++a[i];
    std::fill(a.begin() + i + 1, a.end(), 0);
  }
  return out;
}

namespace {

// Expands one (restaurant partition, table partitions) combination into all
// dish partitions and appends the canonicalized states.
void expand_dishes(const TwoLevelDataset& data, const std::vector<int>& r,
                   const std::vector<std::vector<int>>& table_labels,
                   const std::vector<std::vector<int>>& units_of_rest,
                   std::vector<CrfState>& out) {
  const int R = static_cast<int>(units_of_rest.size());
  CrfState base;
  base.restaurant_of_group = r;
  base.table_of_customer.assign(data.n_units(), -1);
  base.dish_of_table.resize(R);
  int total_tables = 0;
  for (int s = 0; s < R; ++s) {
    int tcount = 0;
    for (size_t j = 0; j < units_of_rest[s].size(); ++j) {
      int t = table_labels[s][j];
      base.table_of_customer[units_of_rest[s][j]] = t;
      tcount = std::max(tcount, t + 1);
    }
    base.dish_of_table[s].assign(tcount, -1);
    total_tables += tcount;
  }
  for (const auto& dishes : set_partitions(total_tables)) {
    CrfState st = base;
    int pos = 0;
    for (int s = 0; s < R; ++s)
      for (int& d : st.dish_of_table[s]) d = dishes[pos++];
    out.push_back(canonicalize(st, data));
  }
}

void recurse_tables(const TwoLevelDataset& data, const std::vector<int>& r,
                    const std::vector<std::vector<int>>& units_of_rest,
                    const std::vector<std::vector<std::vector<int>>>& options, size_t s,
                    std::vector<std::vector<int>>& chosen, std::vector<CrfState>& out) {
  if (s == options.size()) {
    expand_dishes(data, r, chosen, units_of_rest, out);
    return;
  }
  for (const auto& labels : options[s]) {
    chosen[s] = labels;
    recurse_tables(data, r, units_of_rest, options, s + 1, chosen, out);
  }
}

}  // namespace

std::vector<CrfState> enumerate_states_given_restaurants(const TwoLevelDataset& data,
                                                         const std::vector<int>& r) {
  if (data.n_units() > 8)
    throw std::invalid_argument("enumerate_states: dataset too large for exhaustive enumeration");
  if (static_cast<int>(r.size()) != data.n_groups)
    throw std::invalid_argument("enumerate_states: restaurant labeling length mismatch");
  std::vector<int> canon = canonical_labels(r);
  const int R = count_clusters(canon);

  std::vector<std::vector<int>> units_of_rest(R);
  for (int i = 0; i < data.n_units(); ++i) units_of_rest[canon[data.group_of[i]]].push_back(i);

  std::vector<std::vector<std::vector<int>>> options(R);
  for (int s = 0; s < R; ++s)
    options[s] = set_partitions(static_cast<int>(units_of_rest[s].size()));

  std::vector<CrfState> out;
  std::vector<std::vector<int>> chosen(R);
  recurse_tables(data, canon, units_of_rest, options, 0, chosen, out);
  return out;
}

std::vector<CrfState> enumerate_states(const TwoLevelDataset& data) {
  if (data.n_units() > 8)
    throw std::invalid_argument("enumerate_states: dataset too large for exhaustive enumeration");
  std::vector<CrfState> out;
  for (const auto& r : set_partitions(data.n_groups)) {
    auto part = enumerate_states_given_restaurants(data, r);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

}  // namespace nhdp
