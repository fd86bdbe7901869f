#pragma once

#include <vector>

#include "nhdp/crf_state.hpp"
#include "nhdp/dataset.hpp"

namespace nhdp {

// All set partitions of {0..n-1} as canonical (first-appearance) labelings,
// generated as restricted growth strings.
std::vector<std::vector<int>> set_partitions(int n);

// Every canonical franchise state of the dataset: all restaurant partitions
// of the groups, crossed with all table partitions of each restaurant's units,
// crossed with all dish partitions of the resulting tables. Exhaustive, so it
// is guarded to datasets with at most 8 units.
std::vector<CrfState> enumerate_states(const TwoLevelDataset& data);

// Same, but with the restaurant partition held fixed at r (labels over
// groups). Used for conditional-law oracles with a frozen group partition.
std::vector<CrfState> enumerate_states_given_restaurants(const TwoLevelDataset& data,
                                                         const std::vector<int>& r);

}  // namespace nhdp
