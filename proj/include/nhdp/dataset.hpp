#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace nhdp {

// Observations on nested areal units: one scalar outcome per high-resolution
// unit (customer), each unit belonging to exactly one low-resolution group.
// Groups are 0..n_groups-1; units keep their input order throughout, all
// labelings elsewhere in the library refer back to these indices.
struct TwoLevelDataset {
  std::vector<double> y;        // outcome per unit
  std::vector<int> group_of;    // unit -> group index
  int n_groups = 0;

  // Optional identifiers carried along from ingestion for reporting.
  std::vector<std::string> unit_ids;
  std::vector<std::string> group_ids;

  int n_units() const { return static_cast<int>(y.size()); }

  // Units of each group in input order.
  std::vector<std::vector<int>> units_by_group() const {
    std::vector<std::vector<int>> out(n_groups);
    for (int i = 0; i < n_units(); ++i) out[group_of[i]].push_back(i);
    return out;
  }

  void check() const {
    if (y.size() != group_of.size())
      throw std::invalid_argument("dataset: y and group_of length mismatch");
    if (n_groups <= 0) throw std::invalid_argument("dataset: no groups");
    std::vector<char> seen(n_groups, 0);
    for (int g : group_of) {
      if (g < 0 || g >= n_groups)
        throw std::invalid_argument("dataset: group index out of range");
      seen[g] = 1;
    }
    for (int g = 0; g < n_groups; ++g)
      if (!seen[g]) throw std::invalid_argument("dataset: empty group " + std::to_string(g));
  }
};

// Convenience constructor for tests and simulations: groups identified by
// contiguous blocks of the y vector.
inline TwoLevelDataset make_dataset(const std::vector<std::vector<double>>& groups) {
  TwoLevelDataset d;
  d.n_groups = static_cast<int>(groups.size());
  for (int g = 0; g < d.n_groups; ++g) {
    for (double v : groups[g]) {
      d.y.push_back(v);
      d.group_of.push_back(g);
    }
  }
  d.check();
  return d;
}

}  // namespace nhdp
