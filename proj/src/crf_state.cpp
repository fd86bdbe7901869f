#include "nhdp/crf_state.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

namespace nhdp {

std::vector<int> canonical_labels(const std::vector<int>& labels) {
  std::vector<int> out(labels.size());
  std::map<int, int> remap;
  int next = 0;
  for (size_t i = 0; i < labels.size(); ++i) {
    auto [it, inserted] = remap.emplace(labels[i], next);
    if (inserted) ++next;
    out[i] = it->second;
  }
  return out;
}

int count_clusters(const std::vector<int>& labels) {
  int mx = -1;
  for (int l : labels) mx = std::max(mx, l);
  return mx + 1;
}

int CrfState::n_dishes() const {
  int mx = -1;
  for (const auto& v : dish_of_table)
    for (int d : v) mx = std::max(mx, d);
  return mx + 1;
}

CrfState all_merged_state(const TwoLevelDataset& data) {
  CrfState s;
  s.restaurant_of_group.assign(data.n_groups, 0);
  s.table_of_customer.assign(data.n_units(), 0);
  s.dish_of_table = {{0}};
  return s;
}

CrfState all_split_state(const TwoLevelDataset& data) {
  CrfState s;
  s.restaurant_of_group.resize(data.n_groups);
  for (int g = 0; g < data.n_groups; ++g) s.restaurant_of_group[g] = g;
  s.table_of_customer.resize(data.n_units());
  s.dish_of_table.assign(data.n_groups, {});
  int dish = 0;
  std::vector<int> next_table(data.n_groups, 0);
  for (int i = 0; i < data.n_units(); ++i) {
    int r = data.group_of[i];
    s.table_of_customer[i] = next_table[r]++;
    s.dish_of_table[r].push_back(dish++);
  }
  return s;
}

CrfState canonicalize(const CrfState& state, const TwoLevelDataset& data) {
  const int L = data.n_groups;
  const int n = data.n_units();

  CrfState out;
  // Restaurants by first appearance over groups in index order.
  out.restaurant_of_group = canonical_labels(state.restaurant_of_group);
  const int R = count_clusters(out.restaurant_of_group);

  // Tables by first appearance over units in input order, per restaurant.
  // new_table[r] maps old table id -> new id.
  std::vector<std::map<int, int>> new_table(R);
  out.table_of_customer.resize(n);
  for (int i = 0; i < n; ++i) {
    int r = out.restaurant_of_group[data.group_of[i]];
    auto& m = new_table[r];
    auto [it, inserted] = m.emplace(state.table_of_customer[i], static_cast<int>(m.size()));
    (void)inserted;
    out.table_of_customer[i] = it->second;
  }

  // Dishes by first appearance over units in input order.
  std::map<int, int> new_dish;
  out.dish_of_table.resize(R);
  for (int r = 0; r < R; ++r) out.dish_of_table[r].assign(new_table[r].size(), -1);
  for (int i = 0; i < n; ++i) {
    int old_r = state.restaurant_of_group[data.group_of[i]];
    int r = out.restaurant_of_group[data.group_of[i]];
    int old_dish = state.dish_of_table[old_r][state.table_of_customer[i]];
    auto [it, inserted] = new_dish.emplace(old_dish, static_cast<int>(new_dish.size()));
    (void)inserted;
    out.dish_of_table[r][out.table_of_customer[i]] = it->second;
  }
  (void)L;
  return out;
}

PartitionPair induced_partitions(const CrfState& state, const TwoLevelDataset& data) {
  PartitionPair p;
  p.gamma_l = canonical_labels(state.restaurant_of_group);
  std::vector<int> dish_of_unit(data.n_units());
  for (int i = 0; i < data.n_units(); ++i) {
    int r = state.restaurant_of_group[data.group_of[i]];
    dish_of_unit[i] = state.dish_of_table[r][state.table_of_customer[i]];
  }
  p.gamma_h = canonical_labels(dish_of_unit);
  return p;
}

std::vector<std::string> validate(const CrfState& state, const TwoLevelDataset& data) {
  std::vector<std::string> v;
  const int L = data.n_groups;
  const int n = data.n_units();

  if (static_cast<int>(state.restaurant_of_group.size()) != L) {
    v.push_back("restaurant_of_group length does not match group count");
    return v;
  }
  if (static_cast<int>(state.table_of_customer.size()) != n) {
    v.push_back("table_of_customer length does not match unit count");
    return v;
  }
  const int R = state.n_restaurants();
  std::vector<int> groups_in(R, 0);
  for (int g = 0; g < L; ++g) {
    int r = state.restaurant_of_group[g];
    if (r < 0 || r >= R) {
      v.push_back("group " + std::to_string(g) + " assigned to out-of-range restaurant " +
                  std::to_string(r));
      return v;
    }
    ++groups_in[r];
  }
  for (int r = 0; r < R; ++r)
    if (groups_in[r] == 0) v.push_back("restaurant " + std::to_string(r) + " has no groups");

  // Table occupancy per restaurant.
  std::vector<std::vector<int>> occupancy(R);
  for (int r = 0; r < R; ++r) occupancy[r].assign(state.dish_of_table[r].size(), 0);
  for (int i = 0; i < n; ++i) {
    int r = state.restaurant_of_group[data.group_of[i]];
    int t = state.table_of_customer[i];
    if (t < 0 || t >= static_cast<int>(state.dish_of_table[r].size())) {
      v.push_back("unit " + std::to_string(i) + " sits at out-of-range table " +
                  std::to_string(t));
      return v;
    }
    ++occupancy[r][t];
  }
  for (int r = 0; r < R; ++r)
    for (size_t t = 0; t < occupancy[r].size(); ++t)
      if (occupancy[r][t] == 0)
        v.push_back("table " + std::to_string(t) + " in restaurant " + std::to_string(r) +
                    " has no customers");

  // Dish labels dense 0..D-1 with every dish holding at least one table.
  const int D = state.n_dishes();
  std::vector<int> tables_of_dish(std::max(D, 0), 0);
  for (int r = 0; r < R; ++r) {
    for (int d : state.dish_of_table[r]) {
      if (d < 0 || d >= D) {
        v.push_back("out-of-range dish id " + std::to_string(d));
        return v;
      }
      ++tables_of_dish[d];
    }
  }
  for (int d = 0; d < D; ++d)
    if (tables_of_dish[d] == 0) v.push_back("dish " + std::to_string(d) + " has no tables");
  return v;
}

CrfState apply_restaurant_split(const CrfState& state, const TwoLevelDataset& data,
                                int restaurant, const std::vector<int>& side_of_group) {
  const int L = data.n_groups;
  if (restaurant < 0 || restaurant >= state.n_restaurants())
    throw std::invalid_argument("apply_restaurant_split: bad restaurant id");
  if (static_cast<int>(side_of_group.size()) != L)
    throw std::invalid_argument("apply_restaurant_split: side_of_group length mismatch");

  bool side_seen[2] = {false, false};
  for (int g = 0; g < L; ++g) {
    if (state.restaurant_of_group[g] != restaurant) continue;
    int side = side_of_group[g];
    if (side != 0 && side != 1)
      throw std::invalid_argument("apply_restaurant_split: sides must be 0 or 1");
    side_seen[side] = true;
  }
  if (!side_seen[0] || !side_seen[1])
    throw std::invalid_argument("apply_restaurant_split: both sides must be non-empty");

  CrfState out;
  out.restaurant_of_group = state.restaurant_of_group;
  const int fresh = state.n_restaurants();  // side 1 becomes a new restaurant
  for (int g = 0; g < L; ++g)
    if (state.restaurant_of_group[g] == restaurant && side_of_group[g] == 1)
      out.restaurant_of_group[g] = fresh;

  out.dish_of_table = state.dish_of_table;
  out.dish_of_table.emplace_back();
  out.table_of_customer = state.table_of_customer;

  // Each parent table splits into at most one sub-table per side; sub-tables
  // inherit the parent's dish, so units keep their dishes exactly.
  const int n_parent = static_cast<int>(state.dish_of_table[restaurant].size());
  std::vector<int> sub_table(2 * n_parent, -1);  // [side * n_parent + t] -> new id
  std::vector<int> keep_count(n_parent, 0);      // side-0 occupancy per parent table
  std::vector<int>& side0_dishes = out.dish_of_table[restaurant];
  std::vector<int>& side1_dishes = out.dish_of_table[fresh];
  side0_dishes.clear();

  for (int i = 0; i < data.n_units(); ++i) {
    if (state.restaurant_of_group[data.group_of[i]] != restaurant) continue;
    int side = side_of_group[data.group_of[i]];
    int t = state.table_of_customer[i];
    int key = side * n_parent + t;
    if (sub_table[key] < 0) {
      auto& dishes = side == 0 ? side0_dishes : side1_dishes;
      sub_table[key] = static_cast<int>(dishes.size());
      dishes.push_back(state.dish_of_table[restaurant][t]);
    }
    out.table_of_customer[i] = sub_table[key];
    if (side == 0) ++keep_count[t];
  }
  (void)keep_count;
  return canonicalize(out, data);
}

CrfState apply_restaurant_merge(const CrfState& state, const TwoLevelDataset& data,
                                int s1, int s2,
                                const std::vector<std::pair<int, int>>& matching,
                                const std::vector<char>& merge_flags) {
  const int R = state.n_restaurants();
  if (s1 < 0 || s1 >= R || s2 < 0 || s2 >= R || s1 == s2)
    throw std::invalid_argument("apply_restaurant_merge: bad restaurant pair");
  if (matching.size() != merge_flags.size())
    throw std::invalid_argument("apply_restaurant_merge: matching/flags length mismatch");

  const int T1 = static_cast<int>(state.dish_of_table[s1].size());
  const int T2 = static_cast<int>(state.dish_of_table[s2].size());

  // fused_into[t2] = table of s1 that table t2 of s2 joins, or -1.
  std::vector<int> fused_into(T2, -1);
  std::vector<char> used1(T1, 0), used2(T2, 0);
  for (size_t i = 0; i < matching.size(); ++i) {
    auto [t1, t2] = matching[i];
    if (t1 < 0 || t1 >= T1 || t2 < 0 || t2 >= T2)
      throw std::invalid_argument("apply_restaurant_merge: table id out of range");
    if (used1[t1] || used2[t2])
      throw std::invalid_argument("apply_restaurant_merge: matching is not one-to-one");
    used1[t1] = used2[t2] = 1;
    if (state.dish_of_table[s1][t1] != state.dish_of_table[s2][t2])
      throw std::invalid_argument("apply_restaurant_merge: matched tables serve different dishes");
    if (merge_flags[i]) fused_into[t2] = t1;
  }

  CrfState out;
  out.restaurant_of_group = state.restaurant_of_group;
  for (int g = 0; g < data.n_groups; ++g)
    if (out.restaurant_of_group[g] == s2) out.restaurant_of_group[g] = s1;

  // Merged restaurant's tables: all of s1's, then the unfused tables of s2.
  std::vector<int> new_id2(T2, -1);
  out.dish_of_table = state.dish_of_table;
  auto& merged = out.dish_of_table[s1];
  for (int t2 = 0; t2 < T2; ++t2) {
    if (fused_into[t2] >= 0) {
      new_id2[t2] = fused_into[t2];
    } else {
      new_id2[t2] = static_cast<int>(merged.size());
      merged.push_back(state.dish_of_table[s2][t2]);
    }
  }
  out.dish_of_table[s2].clear();

  out.table_of_customer = state.table_of_customer;
  for (int i = 0; i < data.n_units(); ++i)
    if (state.restaurant_of_group[data.group_of[i]] == s2)
      out.table_of_customer[i] = new_id2[state.table_of_customer[i]];

  // Canonicalization drops the now-empty restaurant s2 and renumbers.
  // Dish labels are untouched by construction, so the unit-level dish
  // partition is exactly preserved.
  std::vector<std::vector<int>> kept;
  std::vector<int> rest_remap(R, -1);
  for (int r = 0; r < R; ++r) {
    if (r == s2) continue;
    rest_remap[r] = static_cast<int>(kept.size());
    kept.push_back(std::move(out.dish_of_table[r]));
  }
  out.dish_of_table = std::move(kept);
  for (int& r : out.restaurant_of_group) r = rest_remap[r];
  return canonicalize(out, data);
}

}  // namespace nhdp
