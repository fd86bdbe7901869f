#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "nhdp/crf_state.hpp"
#include "nhdp/dataset.hpp"

namespace nhdp {

struct KmeansResult {
  std::vector<int> labels;                             // canonical, n entries
  std::vector<std::vector<double>> centers;            // chosen_k rows
  int chosen_k = 0;                                    // argmax of the curve
  std::vector<std::pair<int, double>> silhouette_by_k; // the scanned curve
};

// Mean silhouette width (Rousseeuw) under the Euclidean metric. Labels may be
// arbitrary integers; they are compacted internally. Singleton clusters and
// a = b = 0 points score 0 by convention.
double silhouette(const std::vector<std::vector<double>>& points,
                  const std::vector<int>& labels);

// K-means with k-means++ seeding, `restarts` independent starts per K (best
// within-cluster sum of squares wins), scanning K = 2..k_max and keeping the
// K with the highest silhouette. Deterministic given seed.
KmeansResult kmeans_select(const std::vector<std::vector<double>>& points,
                           int k_max, std::uint64_t seed, int restarts = 10);

// Stage-2 features: each group's distribution over the unit-level cluster
// labels. Rows are nonnegative and sum to 1.
std::vector<std::vector<double>> group_proportion_vectors(
    const TwoLevelDataset& data, const std::vector<int>& unit_labels,
    int n_clusters);

// Two-stage comparator: cluster the scalar unit values, form each group's
// vector of cluster proportions, then cluster those vectors. Both stages pick
// K by silhouette over 2..k_max.
PartitionPair multilevel_kmeans(const TwoLevelDataset& data, int k_max,
                                std::uint64_t seed);

}  // namespace nhdp
