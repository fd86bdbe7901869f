#include "nhdp/synth.hpp"

#include <cmath>
#include <stdexcept>

#include "nhdp/crf_state.hpp"
#include "nhdp/rng.hpp"

namespace nhdp {

double tv_distance(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size())
    throw std::invalid_argument("tv_distance: supports differ in length");
  double sp = 0.0, sq = 0.0, acc = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    sp += p[i];
    sq += q[i];
    acc += std::abs(p[i] - q[i]);
  }
  if (std::abs(sp - 1.0) > 1e-9 || std::abs(sq - 1.0) > 1e-9)
    throw std::invalid_argument("tv_distance: inputs must each sum to 1");
  return 0.5 * acc;
}

namespace {

int sample_categorical(const std::vector<double>& w, Rng& rng) {
  double u = rng.uniform01();
  double acc = 0.0;
  for (size_t k = 0; k < w.size(); ++k) {
    acc += w[k];
    if (u < acc) return static_cast<int>(k);
  }
  return static_cast<int>(w.size()) - 1;  // guard against rounding at u ~ 1
}

// Distinct salts for the generator sub-streams.
constexpr std::uint64_t kAssignSalt = 0x617373;  // group-to-mixture stream
constexpr std::uint64_t kDataSalt = 0x646174;    // observation stream

}  // namespace

const std::vector<double>& framework1_means() {
  static const std::vector<double> means{-6.25, -3.75, -1.25, 1.25, 3.75, 6.25};
  return means;
}

const std::vector<std::vector<double>>& framework1_weights() {
  static const std::vector<std::vector<double>> w{
      {0.0, 0.6, 0.3, 0.0, 0.1, 0.0},
      {0.4, 0.0, 0.1, 0.1, 0.4, 0.0},
      {0.1, 0.0, 0.0, 0.0, 0.3, 0.6},
      {0.0, 0.0, 0.5, 0.5, 0.0, 0.0},
      {0.2, 0.2, 0.0, 0.2, 0.2, 0.2},
      {0.0, 0.0, 0.0, 1.0, 0.0, 0.0},
  };
  return w;
}

SynthData gen_framework1(const Framework1Config& cfg) {
  if (cfg.n_groups < 1 || cfg.units_per_group < 1)
    throw std::invalid_argument("gen_framework1: group and unit counts must be positive");
  const auto& means = framework1_means();
  const auto& weights = framework1_weights();
  const double sd = 0.5;

  // Mixture assignment on its own stream: the group-level truth depends only
  // on the seed and group count, not on units_per_group.
  Rng assign_rng(derive_seed(cfg.seed, kAssignSalt));
  std::vector<int> mixture_of(cfg.n_groups);
  for (int j = 0; j < cfg.n_groups; ++j)
    mixture_of[j] = assign_rng.uniform_int(static_cast<int>(weights.size()));

  Rng rng(derive_seed(cfg.seed, kDataSalt));
  SynthData out;
  out.true_gamma_l = canonical_labels(mixture_of);
  out.data.n_groups = cfg.n_groups;
  std::vector<int> component_of;
  for (int j = 0; j < cfg.n_groups; ++j) {
    const auto& w = weights[mixture_of[j]];
    for (int i = 0; i < cfg.units_per_group; ++i) {
      int z = sample_categorical(w, rng);
      component_of.push_back(z);
      out.data.y.push_back(rng.normal(means[z], sd));
      out.data.group_of.push_back(j);
      out.true_theta.push_back(means[z]);
    }
  }
  out.true_gamma_h = canonical_labels(component_of);
  out.true_phi.resize(cfg.n_groups);
  for (int j = 0; j < cfg.n_groups; ++j) {
    double phi = 0.0;
    for (size_t k = 0; k < means.size(); ++k) phi += weights[mixture_of[j]][k] * means[k];
    out.true_phi[j] = phi;
  }
  out.data.check();
  return out;
}

namespace {

// Truncated stick-breaking with closure: v_k ~ Beta(1, alpha) for k < m-1,
// the last atom takes the remaining mass so the weights sum to one.
std::vector<double> stick_break(double alpha, int m, Rng& rng) {
  std::vector<double> w(m);
  double remaining = 1.0;
  for (int k = 0; k + 1 < m; ++k) {
    double v = rng.beta(1.0, alpha);
    w[k] = v * remaining;
    remaining *= 1.0 - v;
  }
  w[m - 1] = remaining;
  return w;
}

// Hierarchical sticks against base weights b: pi'_k ~ Beta(a1 b_k,
// a1 (1 - sum_{l<=k} b_l)), closed at the final atom.
std::vector<double> hdp_stick_break(const std::vector<double>& b, double alpha1, Rng& rng) {
  const int m = static_cast<int>(b.size());
  std::vector<double> w(m);
  double remaining = 1.0;
  double tail = 1.0;  // 1 - sum_{l<=k} b_l
  for (int k = 0; k + 1 < m; ++k) {
    tail -= b[k];
    // The Beta parameters can hit zero from rounding in the closed tail;
    // clamp to a tiny positive mass.
    double a = std::max(alpha1 * b[k], 1e-12);
    double bb = std::max(alpha1 * tail, 1e-12);
    double v = rng.beta(a, bb);
    w[k] = v * remaining;
    remaining *= 1.0 - v;
  }
  w[m - 1] = remaining;
  return w;
}

}  // namespace

SynthData gen_framework2(const Framework2Config& cfg) {
  if (cfg.n_groups < 1 || cfg.units_per_group < 1)
    throw std::invalid_argument("gen_framework2: group and unit counts must be positive");
  if (!(cfg.alpha0 > 0.0) || !(cfg.alpha1 > 0.0) || !(cfg.alpha2 > 0.0))
    throw std::invalid_argument("gen_framework2: concentrations must be positive");
  if (!(cfg.sigma > 0.0)) throw std::invalid_argument("gen_framework2: sigma must be positive");
  if (!(cfg.min_tv >= 0.0 && cfg.min_tv < 1.0))
    throw std::invalid_argument("gen_framework2: min_tv must lie in [0, 1)");

  const int L = cfg.n_groups;
  const int n = L * cfg.units_per_group;
  Rng rng(derive_seed(cfg.seed, kDataSalt));

  std::vector<int> rest_of_group;
  std::vector<int> occupied;                    // distinct restaurant atoms in use
  std::vector<std::vector<double>> g_weights;   // per occupied restaurant
  bool ok = false;
  for (long attempt = 0; attempt < cfg.max_attempts && !ok; ++attempt) {
    // Restaurant weights and assignments.
    std::vector<double> q = stick_break(cfg.alpha2, L, rng);
    rest_of_group.resize(L);
    for (int j = 0; j < L; ++j) rest_of_group[j] = sample_categorical(q, rng);
    occupied.clear();
    std::vector<int> seen(L, -1);
    for (int j = 0; j < L; ++j) {
      if (seen[rest_of_group[j]] < 0) {
        seen[rest_of_group[j]] = static_cast<int>(occupied.size());
        occupied.push_back(rest_of_group[j]);
      }
    }
    for (int j = 0; j < L; ++j) rest_of_group[j] = seen[rest_of_group[j]];

    // Base weights over unit-count atoms, then one weight vector per
    // occupied restaurant.
    std::vector<double> base = stick_break(cfg.alpha0, n, rng);
    g_weights.assign(occupied.size(), {});
    for (auto& w : g_weights) w = hdp_stick_break(base, cfg.alpha1, rng);

    ok = true;
    for (size_t a = 0; a < g_weights.size() && ok; ++a)
      for (size_t b = a + 1; b < g_weights.size() && ok; ++b)
        if (tv_distance(g_weights[a], g_weights[b]) <= cfg.min_tv) ok = false;
  }
  if (!ok)
    throw std::runtime_error(
        "gen_framework2: could not satisfy the pairwise separation after max_attempts draws");

  SynthData out;
  out.true_gamma_l = canonical_labels(rest_of_group);
  // rest_of_group is already relabeled by first appearance, so g_weights rows
  // line up with the canonical restaurant labels.
  out.mixture_weights = g_weights;
  out.data.n_groups = L;

  std::vector<int> atom_of;
  atom_of.reserve(n);
  for (int j = 0; j < L; ++j) {
    const auto& w = g_weights[rest_of_group[j]];
    for (int i = 0; i < cfg.units_per_group; ++i) {
      atom_of.push_back(sample_categorical(w, rng));
      out.data.group_of.push_back(j);
    }
  }

  // Atom locations: evenly spaced with gap kappa * sigma over the occupied
  // atoms, centered at zero.
  std::vector<int> atoms_sorted;
  {
    std::vector<char> used(n, 0);
    for (int a : atom_of) used[a] = 1;
    for (int a = 0; a < n; ++a)
      if (used[a]) atoms_sorted.push_back(a);
  }
  const int K = static_cast<int>(atoms_sorted.size());
  std::vector<double> theta_of_atom(n, 0.0);
  for (int r = 0; r < K; ++r)
    theta_of_atom[atoms_sorted[r]] = (r - 0.5 * (K - 1)) * cfg.kappa * cfg.sigma;

  out.data.y.reserve(n);
  out.holdout.reserve(n);
  out.true_theta.reserve(n);
  for (int i = 0; i < n; ++i) {
    double th = theta_of_atom[atom_of[i]];
    out.true_theta.push_back(th);
    out.data.y.push_back(rng.normal(th, cfg.sigma));
    out.holdout.push_back(rng.normal(th, cfg.sigma));
  }
  out.true_gamma_h = canonical_labels(atom_of);

  // Group-level truth on the same scale the low-resolution estimator uses:
  // the mean component location of the group's realized units.
  out.true_phi.assign(L, 0.0);
  for (int i = 0; i < n; ++i) out.true_phi[out.data.group_of[i]] += out.true_theta[i];
  for (int j = 0; j < L; ++j) out.true_phi[j] /= cfg.units_per_group;
  out.data.check();
  return out;
}

}  // namespace nhdp
