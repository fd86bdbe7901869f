#include "nhdp/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>

#include "nhdp/rng.hpp"

namespace nhdp {

namespace {

double sqdist(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    double diff = a[d] - b[d];
    acc += diff * diff;
  }
  return acc;
}

std::vector<int> compact(const std::vector<int>& labels, int* k_out) {
  std::unordered_map<int, int> remap;
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto it = remap.find(labels[i]);
    if (it == remap.end()) {
      out[i] = static_cast<int>(remap.size());
      remap.emplace(labels[i], out[i]);
    } else {
      out[i] = it->second;
    }
  }
  *k_out = static_cast<int>(remap.size());
  return out;
}

int count_distinct_points(const std::vector<std::vector<double>>& points) {
  std::vector<std::vector<double>> copy = points;
  std::sort(copy.begin(), copy.end());
  copy.erase(std::unique(copy.begin(), copy.end()), copy.end());
  return static_cast<int>(copy.size());
}

struct LloydRun {
  std::vector<int> labels;
  std::vector<std::vector<double>> centers;
  double wss = 0.0;
};

// One k-means++ seeded Lloyd run; assignment ties and the empty-cluster
// rescue (move the point farthest from its own center) break toward the
// smallest index so reruns are bit-identical.
LloydRun lloyd_once(const std::vector<std::vector<double>>& points, int k,
                    Rng& rng, int max_iter) {
  const int n = static_cast<int>(points.size());
  const int dim = static_cast<int>(points[0].size());

  std::vector<std::vector<double>> centers;
  centers.reserve(k);
  centers.push_back(points[rng.uniform_int(n)]);
  std::vector<double> d2(n);
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) best = std::min(best, sqdist(points[i], c));
      d2[i] = best;
      total += best;
    }
    int pick;
    if (total > 0.0) {
      double u = rng.uniform01() * total;
      pick = n - 1;
      double cum = 0.0;
      for (int i = 0; i < n; ++i) {
        cum += d2[i];
        if (u < cum) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.uniform_int(n);  // all mass on existing centers
    }
    centers.push_back(points[pick]);
  }

  std::vector<int> labels(n, -1);
  std::vector<int> counts(k, 0);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    std::fill(counts.begin(), counts.end(), 0);
    for (int i = 0; i < n; ++i) {
      int arg = 0;
      double best = sqdist(points[i], centers[0]);
      for (int c = 1; c < k; ++c) {
        double d = sqdist(points[i], centers[c]);
        if (d < best) {
          best = d;
          arg = c;
        }
      }
      if (arg != labels[i]) changed = true;
      labels[i] = arg;
      ++counts[arg];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      int steal = -1;
      double far = -1.0;
      for (int i = 0; i < n; ++i) {
        if (counts[labels[i]] < 2) continue;
        double d = sqdist(points[i], centers[labels[i]]);
        if (d > far) {
          far = d;
          steal = i;
        }
      }
      if (steal < 0) break;  // n < k, nothing to do
      --counts[labels[steal]];
      labels[steal] = c;
      ++counts[c];
      changed = true;
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      std::fill(centers[c].begin(), centers[c].end(), 0.0);
    }
    for (int i = 0; i < n; ++i) {
      for (int d = 0; d < dim; ++d) centers[labels[i]][d] += points[i][d];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (int d = 0; d < dim; ++d) centers[c][d] /= counts[c];
    }
    if (!changed) break;
  }

  LloydRun run;
  run.labels = std::move(labels);
  run.centers = std::move(centers);
  for (int i = 0; i < n; ++i) run.wss += sqdist(points[i], run.centers[run.labels[i]]);
  return run;
}

}  // namespace

double silhouette(const std::vector<std::vector<double>>& points,
                  const std::vector<int>& labels) {
  const int n = static_cast<int>(points.size());
  if (n == 0 || labels.size() != points.size())
    throw std::invalid_argument("silhouette: size mismatch");
  int k = 0;
  std::vector<int> lab = compact(labels, &k);
  if (k < 2) throw std::invalid_argument("silhouette: need at least 2 clusters");
  std::vector<int> counts(k, 0);
  for (int c : lab) ++counts[c];

  double total = 0.0;
  std::vector<double> dsum(k);
  for (int i = 0; i < n; ++i) {
    std::fill(dsum.begin(), dsum.end(), 0.0);
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      dsum[lab[j]] += std::sqrt(sqdist(points[i], points[j]));
    }
    if (counts[lab[i]] == 1) continue;  // singleton scores 0
    double a = dsum[lab[i]] / (counts[lab[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      if (c == lab[i]) continue;
      b = std::min(b, dsum[c] / counts[c]);
    }
    double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return total / n;
}

KmeansResult kmeans_select(const std::vector<std::vector<double>>& points,
                           int k_max, std::uint64_t seed, int restarts) {
  const int n = static_cast<int>(points.size());
  if (n < 3) throw std::invalid_argument("kmeans_select: need at least 3 points");
  if (k_max < 2) throw std::invalid_argument("kmeans_select: k_max must be >= 2");
  if (restarts < 1) throw std::invalid_argument("kmeans_select: restarts must be >= 1");
  const int dim = static_cast<int>(points[0].size());
  for (const auto& p : points) {
    if (static_cast<int>(p.size()) != dim)
      throw std::invalid_argument("kmeans_select: ragged points");
  }
  int distinct = count_distinct_points(points);
  if (distinct < 2)
    throw std::invalid_argument("kmeans_select: fewer than 2 distinct points");
  int k_hi = std::min({k_max, n - 1, distinct});

  Rng rng(seed);
  KmeansResult result;
  double best_sil = -std::numeric_limits<double>::infinity();
  for (int k = 2; k <= k_hi; ++k) {
    LloydRun best;
    best.wss = std::numeric_limits<double>::infinity();
    for (int r = 0; r < restarts; ++r) {
      LloydRun run = lloyd_once(points, k, rng, 100);
      if (run.wss < best.wss) best = std::move(run);
    }
    int k_eff = 0;
    std::vector<int> lab = compact(best.labels, &k_eff);
    if (k_eff != k) continue;  // degenerate fit, drop from the scan
    double sil = silhouette(points, lab);
    result.silhouette_by_k.emplace_back(k, sil);
    if (sil > best_sil) {
      best_sil = sil;
      result.chosen_k = k;
      result.labels = canonical_labels(lab);
      result.centers = std::move(best.centers);
    }
  }
  if (result.chosen_k == 0)
    throw std::runtime_error("kmeans_select: no K produced a valid clustering");
  return result;
}

std::vector<std::vector<double>> group_proportion_vectors(
    const TwoLevelDataset& data, const std::vector<int>& unit_labels,
    int n_clusters) {
  const int L = data.n_groups;
  std::vector<std::vector<double>> props(L, std::vector<double>(n_clusters, 0.0));
  std::vector<int> gsize(L, 0);
  for (int i = 0; i < data.n_units(); ++i) {
    props[data.group_of[i]][unit_labels[i]] += 1.0;
    ++gsize[data.group_of[i]];
  }
  for (int g = 0; g < L; ++g) {
    for (double& v : props[g]) v /= gsize[g];
  }
  return props;
}

PartitionPair multilevel_kmeans(const TwoLevelDataset& data, int k_max,
                                std::uint64_t seed) {
  data.check();
  const int n = data.n_units();
  const int L = data.n_groups;

  std::vector<std::vector<double>> unit_points(n, std::vector<double>(1));
  for (int i = 0; i < n; ++i) unit_points[i][0] = data.y[i];
  KmeansResult high = kmeans_select(unit_points, std::min(k_max, n - 1), seed);

  auto props = group_proportion_vectors(data, high.labels, high.chosen_k);
  KmeansResult low =
      kmeans_select(props, std::min(k_max, L - 1), derive_seed(seed, 1));

  PartitionPair pair;
  pair.gamma_h = high.labels;
  pair.gamma_l = low.labels;
  return pair;
}

}  // namespace nhdp
