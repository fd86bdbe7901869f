#pragma once

#include <string>
#include <vector>

#include "nhdp/dataset.hpp"

namespace nhdp {

// Chinese restaurant franchise state for the nested model.
//
//   restaurant_of_group : group -> restaurant (clusters of groups)
//   table_of_customer   : unit  -> table id, scoped to the unit's restaurant
//   dish_of_table       : [restaurant][table] -> dish id, global across
//                         restaurants (dishes are what tables share)
//
// Tables being restaurant-scoped makes "a table never spans restaurants"
// structural: two units can only share a table if their groups share a
// restaurant. A state is canonical when every label space (restaurants,
// per-restaurant tables, dishes) is numbered by first appearance: groups in
// index order for restaurants, units in input order for tables and dishes.
struct CrfState {
  std::vector<int> restaurant_of_group;
  std::vector<int> table_of_customer;
  std::vector<std::vector<int>> dish_of_table;

  int n_restaurants() const { return static_cast<int>(dish_of_table.size()); }
  int n_tables() const {
    int t = 0;
    for (const auto& v : dish_of_table) t += static_cast<int>(v.size());
    return t;
  }
  int n_dishes() const;

  bool operator==(const CrfState&) const = default;
};

// The two cluster labelings the model is really about: gamma_l partitions the
// groups (low resolution), gamma_h partitions the units (high resolution).
// Both are canonical first-appearance labelings.
struct PartitionPair {
  std::vector<int> gamma_l;
  std::vector<int> gamma_h;

  bool operator==(const PartitionPair&) const = default;
  // Lexicographic order so pairs can key a std::map.
  auto operator<=>(const PartitionPair&) const = default;
};

// Relabels an arbitrary integer labeling to canonical first-appearance form.
std::vector<int> canonical_labels(const std::vector<int>& labels);

// Number of distinct labels; assumes canonical input.
int count_clusters(const std::vector<int>& labels);

// All-in-one starting state: one restaurant, one table, one dish.
CrfState all_merged_state(const TwoLevelDataset& data);

// One table per customer, one restaurant per group, one dish per table.
CrfState all_split_state(const TwoLevelDataset& data);

// Canonical relabeling of every label space; partition structure unchanged.
CrfState canonicalize(const CrfState& state, const TwoLevelDataset& data);

// gamma_l = restaurant partition of groups, gamma_h = dish partition of
// units via their tables. Invariant to relabeling of the input state.
PartitionPair induced_partitions(const CrfState& state, const TwoLevelDataset& data);

// Structural checks; returns human-readable violations, empty if valid.
// Covers shape mismatches, out-of-range or gappy labels, and empty
// restaurants / tables / dishes.
std::vector<std::string> validate(const CrfState& state, const TwoLevelDataset& data);

// Restaurant split: groups of restaurant s are reassigned per side_of_group
// (0 = stay in s-side, 1 = new restaurant; only groups of s are read). Every
// table of s splits into at most two sub-tables, one per side, each keeping
// the dish of the parent table, so the unit-level dish labeling is unchanged.
CrfState apply_restaurant_split(const CrfState& state, const TwoLevelDataset& data,
                                int restaurant, const std::vector<int>& side_of_group);

// Restaurant merge: restaurants s1 and s2 fuse into one. matching lists pairs
// (table of s1, table of s2) sharing a dish; pairs with merge_flags[i] true
// fuse into a single table (again leaving the unit-level dish labeling
// unchanged). Unmatched and unflagged tables carry over as they are.
CrfState apply_restaurant_merge(const CrfState& state, const TwoLevelDataset& data,
                                int s1, int s2,
                                const std::vector<std::pair<int, int>>& matching,
                                const std::vector<char>& merge_flags);

}  // namespace nhdp
