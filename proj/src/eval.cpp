#include "nhdp/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <unordered_map>

namespace nhdp {

namespace {

// Relabel to compact 0-based ids in order of first appearance.
std::vector<int> compact_labels(const std::vector<int>& a, int* n_clusters) {
  std::unordered_map<int, int> remap;
  std::vector<int> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto it = remap.find(a[i]);
    if (it == remap.end()) {
      int fresh = static_cast<int>(remap.size());
      remap.emplace(a[i], fresh);
      out[i] = fresh;
    } else {
      out[i] = it->second;
    }
  }
  if (n_clusters) *n_clusters = static_cast<int>(remap.size());
  return out;
}

int count_distinct(const std::vector<int>& a) {
  int k = 0;
  compact_labels(a, &k);
  return k;
}

}  // namespace

double vi_distance(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("vi_distance: size mismatch");
  if (a.empty()) throw std::invalid_argument("vi_distance: empty partitions");
  const int n = static_cast<int>(a.size());
  int ka = 0, kb = 0;
  std::vector<int> ca = compact_labels(a, &ka);
  std::vector<int> cb = compact_labels(b, &kb);
  std::vector<int> na(ka, 0), nb(kb, 0);
  std::vector<std::vector<int>> joint(ka, std::vector<int>(kb, 0));
  for (int i = 0; i < n; ++i) {
    ++na[ca[i]];
    ++nb[cb[i]];
    ++joint[ca[i]][cb[i]];
  }
  // Cell form of H(a) + H(b) - 2 I(a, b): each nonempty cell contributes
  // (n_ij/n) [log(n_i/n_ij) + log(n_j/n_ij)]. Every term is nonnegative and
  // identical partitions give exactly 0 (all cells hit log 1), so the metric
  // axioms hold without clamping.
  double vi = 0.0;
  for (int i = 0; i < ka; ++i) {
    for (int j = 0; j < kb; ++j) {
      if (joint[i][j] == 0) continue;
      double nij = joint[i][j];
      vi += nij / n * (std::log(na[i] / nij) + std::log(nb[j] / nij));
    }
  }
  return vi;
}

std::vector<std::vector<double>> compute_psm(const std::vector<std::vector<int>>& draws) {
  if (draws.empty()) throw std::invalid_argument("compute_psm: no draws");
  const int n = static_cast<int>(draws[0].size());
  std::vector<std::vector<int>> counts(n, std::vector<int>(n, 0));
  for (const auto& d : draws) {
    if (static_cast<int>(d.size()) != n)
      throw std::invalid_argument("compute_psm: ragged draws");
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (d[i] == d[j]) ++counts[i][j];
      }
    }
  }
  std::vector<std::vector<double>> psm(n, std::vector<double>(n, 0.0));
  const double m = static_cast<double>(draws.size());
  for (int i = 0; i < n; ++i) {
    psm[i][i] = 1.0;
    for (int j = i + 1; j < n; ++j) {
      psm[i][j] = psm[j][i] = counts[i][j] / m;
    }
  }
  return psm;
}

std::vector<std::vector<int>> agglomerative_cuts(
    const std::vector<std::vector<double>>& dissim, int max_k, Linkage linkage) {
  const int n = static_cast<int>(dissim.size());
  if (n == 0) throw std::invalid_argument("agglomerative_cuts: empty matrix");
  if (max_k < 1 || max_k > n)
    throw std::invalid_argument("agglomerative_cuts: max_k out of range");

  std::vector<std::vector<double>> d = dissim;
  std::vector<bool> active(n, true);
  std::vector<int> size(n, 1);
  std::vector<int> assign(n);
  for (int i = 0; i < n; ++i) assign[i] = i;

  // Nearest active neighbor per row, kept lazily in sync: a row is rescanned
  // only when its recorded neighbor was consumed by a merge. Ties everywhere
  // break toward the smallest index so the dendrogram is reproducible.
  std::vector<int> nn(n, -1);
  std::vector<double> nndist(n, std::numeric_limits<double>::infinity());
  auto rescan = [&](int i) {
    nn[i] = -1;
    nndist[i] = std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
      if (j == i || !active[j]) continue;
      if (d[i][j] < nndist[i]) {
        nndist[i] = d[i][j];
        nn[i] = j;
      }
    }
  };
  for (int i = 0; i < n; ++i) rescan(i);

  std::vector<std::vector<int>> cuts(max_k);
  auto snapshot = [&](int k) { cuts[k - 1] = compact_labels(assign, nullptr); };
  if (n <= max_k) snapshot(n);

  int n_active = n;
  while (n_active > 1) {
    int best = -1;
    for (int i = 0; i < n; ++i) {
      if (!active[i]) continue;
      if (best == -1 || nndist[i] < nndist[best]) best = i;
    }
    int a = best, b = nn[best];
    if (b < a) std::swap(a, b);

    // Average linkage: size-weighted mean, exactly the mean pairwise
    // dissimilarity between the merged cluster and m. Complete: the max.
    for (int m2 = 0; m2 < n; ++m2) {
      if (!active[m2] || m2 == a || m2 == b) continue;
      d[a][m2] = d[m2][a] =
          linkage == Linkage::average
              ? (size[a] * d[a][m2] + size[b] * d[b][m2]) / (size[a] + size[b])
              : std::max(d[a][m2], d[b][m2]);
    }
    size[a] += size[b];
    active[b] = false;
    for (int i = 0; i < n; ++i) {
      if (assign[i] == b) assign[i] = a;
    }
    --n_active;
    for (int i = 0; i < n; ++i) {
      if (!active[i]) continue;
      if (i == a || nn[i] == a || nn[i] == b) rescan(i);
    }
    if (n_active <= max_k) snapshot(n_active);
  }
  return cuts;
}

double mean_vi_to_draws(const std::vector<int>& candidate,
                        const std::vector<std::vector<int>>& draws) {
  if (draws.empty()) throw std::invalid_argument("mean_vi_to_draws: no draws");
  double total = 0.0;
  for (const auto& d : draws) total += vi_distance(candidate, d);
  return total / static_cast<double>(draws.size());
}

std::vector<int> minvi_point_estimate(const std::vector<std::vector<int>>& draws) {
  if (draws.empty()) throw std::invalid_argument("minvi_point_estimate: no draws");

  std::vector<std::vector<int>> candidates;
  std::map<std::vector<int>, bool> seen;
  int max_k = 1;
  for (const auto& d : draws) {
    std::vector<int> c = compact_labels(d, nullptr);
    max_k = std::max(max_k, count_distinct(c));
    if (!seen.count(c)) {
      seen[c] = true;
      candidates.push_back(std::move(c));
    }
  }

  auto psm = compute_psm(draws);
  const int n = static_cast<int>(psm.size());
  std::vector<std::vector<double>> dissim(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) dissim[i][j] = 1.0 - psm[i][j];
  }
  for (auto& cut : agglomerative_cuts(dissim, std::min(max_k, n))) {
    if (!seen.count(cut)) {
      seen[cut] = true;
      candidates.push_back(std::move(cut));
    }
  }

  int best = -1, best_k = 0;
  double best_mean = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    double mean = mean_vi_to_draws(candidates[c], draws);
    int k = count_distinct(candidates[c]);
    bool better = mean < best_mean || (mean == best_mean && k < best_k);
    if (best == -1 || better) {
      best = static_cast<int>(c);
      best_mean = mean;
      best_k = k;
    }
  }
  return candidates[best];
}

std::vector<double> estimate_theta(const std::vector<std::vector<int>>& gamma_h_draws,
                                   const std::vector<double>& y, double k0) {
  if (gamma_h_draws.empty()) throw std::invalid_argument("estimate_theta: no draws");
  const int n = static_cast<int>(y.size());
  std::vector<double> est(n, 0.0);
  for (const auto& d : gamma_h_draws) {
    if (static_cast<int>(d.size()) != n)
      throw std::invalid_argument("estimate_theta: draw size mismatch");
    int k = 0;
    std::vector<int> c = compact_labels(d, &k);
    std::vector<double> sum(k, 0.0);
    std::vector<int> cnt(k, 0);
    for (int i = 0; i < n; ++i) {
      sum[c[i]] += y[i];
      ++cnt[c[i]];
    }
    for (int i = 0; i < n; ++i) est[i] += sum[c[i]] / (cnt[c[i]] + k0);
  }
  for (auto& v : est) v /= static_cast<double>(gamma_h_draws.size());
  return est;
}

std::vector<double> estimate_phi(const std::vector<std::vector<int>>& gamma_l_draws,
                                 const TwoLevelDataset& data) {
  if (gamma_l_draws.empty()) throw std::invalid_argument("estimate_phi: no draws");
  const int L = data.n_groups;
  std::vector<double> ybar(L, 0.0);
  std::vector<int> gsize(L, 0);
  for (int i = 0; i < data.n_units(); ++i) {
    ybar[data.group_of[i]] += data.y[i];
    ++gsize[data.group_of[i]];
  }
  for (int g = 0; g < L; ++g) ybar[g] /= gsize[g];

  std::vector<double> est(L, 0.0);
  for (const auto& d : gamma_l_draws) {
    if (static_cast<int>(d.size()) != L)
      throw std::invalid_argument("estimate_phi: draw size mismatch");
    int k = 0;
    std::vector<int> c = compact_labels(d, &k);
    std::vector<double> sum(k, 0.0);
    std::vector<int> cnt(k, 0);
    for (int g = 0; g < L; ++g) {
      sum[c[g]] += ybar[g];
      ++cnt[c[g]];
    }
    for (int g = 0; g < L; ++g) est[g] += sum[c[g]] / cnt[c[g]];
  }
  for (auto& v : est) v /= static_cast<double>(gamma_l_draws.size());
  return est;
}

double rmse(const std::vector<double>& estimate, const std::vector<double>& truth) {
  if (estimate.size() != truth.size() || estimate.empty())
    throw std::invalid_argument("rmse: size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    double diff = estimate[i] - truth[i];
    acc += diff * diff;
  }
  return std::sqrt(acc / static_cast<double>(estimate.size()));
}

}  // namespace nhdp
