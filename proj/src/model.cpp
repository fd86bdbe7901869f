#include "nhdp/model.hpp"

#include <cmath>
#include <stdexcept>

namespace nhdp {

double log_marginal_cluster(const ClusterStats& s, double sigma2, double k0) {
  if (!(sigma2 > 0.0) || !(k0 > 0.0))
    throw std::invalid_argument("log_marginal_cluster: sigma2 and k0 must be positive");
  if (s.n < 0) throw std::invalid_argument("log_marginal_cluster: negative count");
  if (!std::isfinite(s.sum) || !std::isfinite(s.sumsq))
    throw std::invalid_argument("log_marginal_cluster: non-finite statistics");
  if (s.n == 0) return 0.0;
  double n = static_cast<double>(s.n);
  double quad = s.sumsq - s.sum * s.sum / (n + k0);
  return -0.5 * n * std::log(2.0 * M_PI * sigma2) - 0.5 * std::log((n + k0) / k0) -
         quad / (2.0 * sigma2);
}

double log_crp_partition(std::span<const int> sizes, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("log_crp_partition: alpha must be positive");
  if (sizes.empty()) return 0.0;
  double lp = 0.0;
  long n = 0;
  for (int nk : sizes) {
    if (nk <= 0) throw std::invalid_argument("log_crp_partition: cluster sizes must be positive");
    lp += std::log(alpha) + std::lgamma(static_cast<double>(nk));
    n += nk;
  }
  lp -= std::lgamma(alpha + static_cast<double>(n)) - std::lgamma(alpha);
  return lp;
}

namespace {

// Cluster sizes of the three partition levels, reused by the prior and the
// alpha updates.
struct PriorSizes {
  std::vector<int> restaurant_sizes;             // groups per restaurant
  std::vector<std::vector<int>> table_sizes;     // per restaurant: units per table
  std::vector<int> dish_sizes;                   // tables per dish
};

PriorSizes prior_sizes(const CrfState& state, const TwoLevelDataset& data) {
  PriorSizes ps;
  const int R = state.n_restaurants();
  ps.restaurant_sizes.assign(R, 0);
  for (int g = 0; g < data.n_groups; ++g) ++ps.restaurant_sizes[state.restaurant_of_group[g]];

  ps.table_sizes.resize(R);
  for (int r = 0; r < R; ++r) ps.table_sizes[r].assign(state.dish_of_table[r].size(), 0);
  for (int i = 0; i < data.n_units(); ++i) {
    int r = state.restaurant_of_group[data.group_of[i]];
    ++ps.table_sizes[r][state.table_of_customer[i]];
  }

  const int D = state.n_dishes();
  ps.dish_sizes.assign(D, 0);
  for (int r = 0; r < R; ++r)
    for (int d : state.dish_of_table[r]) ++ps.dish_sizes[d];
  return ps;
}

}  // namespace

double log_joint_prior(const CrfState& state, const TwoLevelDataset& data,
                       const Hyperparams& hp) {
  PriorSizes ps = prior_sizes(state, data);
  double lp = log_crp_partition(ps.restaurant_sizes, hp.alpha2);
  for (const auto& sizes : ps.table_sizes) lp += log_crp_partition(sizes, hp.alpha1);
  lp += log_crp_partition(ps.dish_sizes, hp.alpha0);
  return lp;
}

double log_likelihood(const CrfState& state, const TwoLevelDataset& data,
                      const Hyperparams& hp) {
  const int D = state.n_dishes();
  std::vector<ClusterStats> stats(D);
  for (int i = 0; i < data.n_units(); ++i) {
    int r = state.restaurant_of_group[data.group_of[i]];
    stats[state.dish_of_table[r][state.table_of_customer[i]]].add(data.y[i]);
  }
  double ll = 0.0;
  for (const auto& s : stats) ll += log_marginal_cluster(s, hp.sigma2, hp.k0);
  return ll;
}

double gibbs_sigma2_draw(std::span<const ClusterStats> dish_stats, const Hyperparams& hp,
                         Rng& rng, double beta_lik) {
  if (!hp.sigma2_prior)
    throw std::invalid_argument("gibbs_sigma2_draw: no inverse-gamma prior configured");
  double n = 0.0, q = 0.0;
  for (const auto& s : dish_stats) {
    if (s.n == 0) continue;
    n += s.n;
    q += s.sumsq - s.sum * s.sum / (s.n + hp.k0);
  }
  double shape = hp.sigma2_prior->beta0 + 0.5 * beta_lik * n;
  double scale = hp.sigma2_prior->beta1 + 0.5 * beta_lik * q;
  return rng.inv_gamma(shape, scale);
}

double log_prior_alpha_terms(AlphaIndex which, const CrfState& state,
                             const TwoLevelDataset& data, const Hyperparams& hp) {
  // From the Ewens form: only K log(alpha) - [lgamma(alpha + n) - lgamma(alpha)]
  // depends on alpha. Table level sums that over restaurants.
  PriorSizes ps = prior_sizes(state, data);
  auto term = [](int K, long n, double alpha) {
    return K * std::log(alpha) - (std::lgamma(alpha + n) - std::lgamma(alpha));
  };
  switch (which) {
    case AlphaIndex::alpha2:
      return term(static_cast<int>(ps.restaurant_sizes.size()), data.n_groups, hp.alpha2);
    case AlphaIndex::alpha1: {
      double lp = 0.0;
      for (const auto& sizes : ps.table_sizes) {
        long n = 0;
        for (int s : sizes) n += s;
        lp += term(static_cast<int>(sizes.size()), n, hp.alpha1);
      }
      return lp;
    }
    default:
      return term(static_cast<int>(ps.dish_sizes.size()), state.n_tables(), hp.alpha0);
  }
}

bool mh_alpha_update(AlphaIndex which, const CrfState& state, const TwoLevelDataset& data,
                     Hyperparams& hp, Rng& rng) {
  if (!hp.alpha_prior)
    throw std::invalid_argument("mh_alpha_update: no truncated-normal prior configured");
  const TruncNormalPrior& prior = (*hp.alpha_prior)[static_cast<int>(which)];
  const double step = 0.2;

  double cur = hp.alpha(which);
  double prop = cur * std::exp(step * rng.normal());
  // Truncated-normal log density up to the (alpha-free) normalizing constant.
  auto log_prior = [&](double a) {
    double z = (a - prior.mean) / prior.sd;
    return -0.5 * z * z;
  };
  Hyperparams hp_prop = hp;
  hp_prop.set_alpha(which, prop);
  double log_ratio = log_prior(prop) - log_prior(cur) +
                     log_prior_alpha_terms(which, state, data, hp_prop) -
                     log_prior_alpha_terms(which, state, data, hp) +
                     std::log(prop) - std::log(cur);  // Jacobian of the log-scale walk
  if (std::log(rng.uniform_pos()) < log_ratio) {
    hp.set_alpha(which, prop);
    return true;
  }
  return false;
}

Standardized standardize(std::span<const double> y) {
  if (y.size() < 2) throw std::invalid_argument("standardize: need at least two values");
  Standardized out;
  double n = static_cast<double>(y.size());
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : y) ss += (v - mean) * (v - mean);
  double sd = std::sqrt(ss / (n - 1.0));
  if (!(sd > 0.0)) throw std::invalid_argument("standardize: zero variance input");
  out.mean = mean;
  out.sd = sd;
  out.values.reserve(y.size());
  for (double v : y) out.values.push_back((v - mean) / sd);
  return out;
}

}  // namespace nhdp
