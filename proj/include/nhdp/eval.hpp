#pragma once

#include <vector>

#include "nhdp/dataset.hpp"

namespace nhdp {

// Variation of information between two partitions of the same elements
// (labelings need not be canonical), in nats: H(a) + H(b) - 2 I(a, b).
// A metric on partitions; 0 iff the partitions are equal.
double vi_distance(const std::vector<int>& a, const std::vector<int>& b);

// Posterior similarity matrix: psm[i][j] = fraction of draws in which i and j
// share a cluster. Symmetric with unit diagonal.
std::vector<std::vector<double>> compute_psm(const std::vector<std::vector<int>>& draws);

enum class Linkage { average, complete };

// Partitions obtained by cutting an agglomerative dendrogram of the
// dissimilarity matrix at k = 1..max_k clusters (Lance-Williams updates,
// merges in nondecreasing height order). Returned in canonical labels,
// indexed by k - 1.
std::vector<std::vector<int>> agglomerative_cuts(
    const std::vector<std::vector<double>>& dissim, int max_k,
    Linkage linkage = Linkage::average);

// Mean VI from one candidate partition to every draw.
double mean_vi_to_draws(const std::vector<int>& candidate,
                        const std::vector<std::vector<int>>& draws);

// Point estimate minimizing the mean VI to the retained draws. Candidates are
// every distinct sampled partition plus average-linkage cuts of (1 - PSM) at
// k = 1 up to the largest cluster count seen in the draws. Ties break toward
// fewer clusters, then earlier candidates (draws before cuts).
std::vector<int> minvi_point_estimate(const std::vector<std::vector<int>>& draws);

// Posterior mean of each unit's cluster location: within one draw a cluster
// of statistics (n, sum) estimates its mean by sum / (n + k0); the final
// estimate averages over draws.
std::vector<double> estimate_theta(const std::vector<std::vector<int>>& gamma_h_draws,
                                   const std::vector<double>& y, double k0);

// Posterior mean of each group's cluster-level location: within one draw a
// group-cluster estimate is the average of the member groups' data means; the
// final estimate averages over draws.
std::vector<double> estimate_phi(const std::vector<std::vector<int>>& gamma_l_draws,
                                 const TwoLevelDataset& data);

double rmse(const std::vector<double>& estimate, const std::vector<double>& truth);

}  // namespace nhdp
