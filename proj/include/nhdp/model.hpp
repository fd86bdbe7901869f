#pragma once

#include <span>
#include <vector>

#include "nhdp/crf_state.hpp"
#include "nhdp/dataset.hpp"
#include "nhdp/hyperparams.hpp"
#include "nhdp/rng.hpp"
#include "nhdp/stats.hpp"

namespace nhdp {

// Log marginal likelihood of one cluster of observations under
//   y_i | theta ~ N(theta, sigma2),  theta ~ N(0, sigma2 / k0),
// with theta integrated out:
//   -(n/2) log(2 pi sigma2) - (1/2) log((n + k0)/k0)
//   - (sumsq - sum^2/(n + k0)) / (2 sigma2).
// Empty cluster gives 0 (empty product).
double log_marginal_cluster(const ClusterStats& s, double sigma2, double k0);

// Ewens partition probability under a Chinese restaurant process:
//   log p = K log(alpha) + sum_k lgamma(n_k) - [lgamma(alpha + n) - lgamma(alpha)].
// sizes holds the cluster sizes; an empty list gives 0 by convention.
double log_crp_partition(std::span<const int> sizes, double alpha);

// Joint prior over the full franchise state:
//   log p(restaurant partition; alpha2)
// + sum over restaurants of log p(table partition of its units; alpha1)
// + log p(dish partition of all tables; alpha0).
// Sums to 1 over all canonical states of a dataset.
double log_joint_prior(const CrfState& state, const TwoLevelDataset& data,
                       const Hyperparams& hp);

// Total log marginal likelihood: sum of log_marginal_cluster over dish
// clusters of units.
double log_likelihood(const CrfState& state, const TwoLevelDataset& data,
                      const Hyperparams& hp);

// Gibbs draw of sigma2 given dish-cluster statistics: with conjugate
// inverse-gamma(beta0, beta1) prior the full conditional is
//   inverse-gamma(beta0 + n/2, beta1 + Q/2),
//   Q = sum_k [sumsq_k - sum_k^2 / (n_k + k0)].
// beta_lik tempers the likelihood contribution (beta_lik * n, beta_lik * Q);
// at beta_lik = 0 this is a draw from the prior.
double gibbs_sigma2_draw(std::span<const ClusterStats> dish_stats, const Hyperparams& hp,
                         Rng& rng, double beta_lik = 1.0);

// The part of log p(state) that depends on the selected concentration. Used
// by the MH update and exposed for tests.
double log_prior_alpha_terms(AlphaIndex which, const CrfState& state,
                             const TwoLevelDataset& data, const Hyperparams& hp);

// One random-walk MH step on log(alpha_which), step sd 0.2, against
// truncated-normal prior times the Ewens terms that involve this alpha.
// Returns true if the proposal was accepted (hp updated in place).
bool mh_alpha_update(AlphaIndex which, const CrfState& state, const TwoLevelDataset& data,
                     Hyperparams& hp, Rng& rng);

struct Standardized {
  std::vector<double> values;
  double mean = 0.0;
  double sd = 1.0;
};

// Centers and scales to unit sample standard deviation (n-1 denominator).
// Throws on fewer than two values or zero variance.
Standardized standardize(std::span<const double> y);

}  // namespace nhdp
