#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "nhdp/enumerate.hpp"
#include "nhdp/model.hpp"
#include "nhdp/rng.hpp"
#include "test_util.hpp"

using namespace nhdp;

namespace {

ClusterStats stats_of(const std::vector<double>& ys) {
  ClusterStats s;
  for (double y : ys) s.add(y);
  return s;
}

// Unnormalized log posterior density of one concentration given a fixed
// state, and its mean by Simpson quadrature. Oracle for the MH update.
double alpha_posterior_mean(AlphaIndex which, const CrfState& st,
                            const TwoLevelDataset& data, Hyperparams hp,
                            double prior_mean, double prior_sd) {
  auto logf = [&](double a) {
    hp.set_alpha(which, a);
    double lp = -0.5 * (a - prior_mean) * (a - prior_mean) / (prior_sd * prior_sd);
    return lp + log_prior_alpha_terms(which, st, data, hp);
  };
  const double lo = 1e-6, hi = 25.0;
  const int N = 60000;
  double h = (hi - lo) / N;
  double mx = -1e300;
  std::vector<double> lf(N + 1);
  for (int i = 0; i <= N; ++i) {
    lf[i] = logf(lo + i * h);
    mx = std::max(mx, lf[i]);
  }
  double z = 0.0, m = 0.0;
  for (int i = 0; i <= N; ++i) {
    double w = (i == 0 || i == N) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    double f = w * std::exp(lf[i] - mx);
    z += f;
    m += f * (lo + i * h);
  }
  return m / z;
}

}  // namespace

TEST_CASE("rng uniform01 stays in [0,1) and is seed deterministic") {
  Rng a(42), b(42);
  for (int i = 0; i < 10000; ++i) {
    double u = a.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(u == b.uniform01());
  }
}

TEST_CASE("rng moment checks against the target distributions") {
  Rng rng(7);
  const int N = 200000;

  SUBCASE("standard normal") {
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < N; ++i) {
      double x = rng.normal();
      s += x;
      s2 += x * x;
    }
    CHECK(std::abs(s / N) < 0.01);
    CHECK(std::abs(s2 / N - 1.0) < 0.02);
  }

  SUBCASE("gamma(3, 2) mean 6 variance 12") {
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < N; ++i) {
      double x = rng.gamma(3.0, 2.0);
      s += x;
      s2 += x * x;
    }
    double mean = s / N;
    CHECK(std::abs(mean - 6.0) < 0.05);
    CHECK(std::abs(s2 / N - mean * mean - 12.0) < 0.5);
  }

  SUBCASE("gamma with shape below one") {
    double s = 0.0;
    for (int i = 0; i < N; ++i) s += rng.gamma(0.4, 1.0);
    CHECK(std::abs(s / N - 0.4) < 0.01);
  }

  SUBCASE("inverse gamma(5, 1) mean 1/4 variance 1/48") {
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < N; ++i) {
      double x = rng.inv_gamma(5.0, 1.0);
      s += x;
      s2 += x * x;
    }
    double mean = s / N;
    CHECK(std::abs(mean - 0.25) < 0.005);
    CHECK(std::abs(s2 / N - mean * mean - 1.0 / 48.0) < 0.005);
  }

  SUBCASE("positive-truncated normal(2, 1)") {
    // With hazard lam = phi(2)/Phi(2): mean = 2 + lam, var = 1 - 2 lam - lam^2.
    double lam = std::exp(-2.0) / std::sqrt(2.0 * M_PI) /
                 (0.5 * (1.0 + std::erf(2.0 / std::sqrt(2.0))));
    double want_mean = 2.0 + lam;
    double want_var = 1.0 - 2.0 * lam - lam * lam;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < N; ++i) {
      double x = rng.trunc_normal_pos(2.0, 1.0);
      CHECK(x > 0.0);
      s += x;
      s2 += x * x;
    }
    double mean = s / N;
    CHECK(std::abs(mean - want_mean) < 0.01);
    CHECK(std::abs(s2 / N - mean * mean - want_var) < 0.02);
  }

  SUBCASE("uniform_int covers its range uniformly") {
    std::vector<int> cnt(7, 0);
    for (int i = 0; i < N; ++i) ++cnt[rng.uniform_int(7)];
    for (int c : cnt) CHECK(std::abs(c - N / 7.0) < 5.0 * std::sqrt(N / 7.0));
  }
}

TEST_CASE("derive_seed separates salts and is stable") {
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  CHECK(derive_seed(1, 0) != derive_seed(2, 0));
  CHECK(derive_seed(123, 4) == derive_seed(123, 4));
}

TEST_CASE("cluster stats add/remove round trip pins the empty state") {
  ClusterStats s;
  s.add(1.5);
  s.add(-2.0);
  s.remove(1.5);
  s.remove(-2.0);
  CHECK(s.n == 0);
  CHECK(s.sum == 0.0);
  CHECK(s.sumsq == 0.0);
}

TEST_CASE("log marginal cluster closed-form spot values") {
  // One observation at 0 with sigma2 = k0 = 1: integral is N(0 | 0, 2),
  // log = -log(sqrt(4 pi)).
  ClusterStats one = stats_of({0.0});
  CHECK(log_marginal_cluster(one, 1.0, 1.0) ==
        doctest::Approx(-0.5 * std::log(4.0 * M_PI)).epsilon(1e-12));

  // Two observations at -1 and 1: n=2, sum=0, sumsq=2.
  ClusterStats two = stats_of({-1.0, 1.0});
  double want = -std::log(2.0 * M_PI) - 0.5 * std::log(3.0) - 1.0;
  CHECK(log_marginal_cluster(two, 1.0, 1.0) == doctest::Approx(want).epsilon(1e-12));
  CHECK(log_marginal_cluster(two, 1.0, 1.0) == doctest::Approx(-3.3871832107433999).epsilon(1e-12));

  CHECK(log_marginal_cluster(ClusterStats{}, 1.0, 1.0) == 0.0);
  CHECK(log_marginal_cluster(ClusterStats{}, 0.3, 7.0) == 0.0);
}

TEST_CASE("log marginal cluster matches quadrature on random instances") {
  Rng rng(2024);
  for (int trial = 0; trial < 40; ++trial) {
    int n = 1 + rng.uniform_int(12);
    double sigma2 = 0.05 + 3.95 * rng.uniform01();
    double k0 = 0.05 + 9.95 * rng.uniform01();
    std::vector<double> ys(n);
    for (auto& y : ys) y = -3.0 + 6.0 * rng.uniform01();
    double got = log_marginal_cluster(stats_of(ys), sigma2, k0);
    double want = testutil::quadrature_log_marginal(ys, sigma2, k0);
    CHECK(got == doctest::Approx(want).epsilon(1e-9));
    CHECK(std::abs(got - want) < 1e-6);
  }
}

TEST_CASE("crp partition probability spot values") {
  std::vector<int> single{1};
  CHECK(log_crp_partition(single, 0.7) == doctest::Approx(0.0).epsilon(1e-14));

  std::vector<int> pair{2};
  CHECK(log_crp_partition(pair, 1.0) == doctest::Approx(std::log(0.5)).epsilon(1e-12));

  // Three singletons under alpha = 2: alpha^3 / (2*3*4) ... over (2)(3)(4).
  std::vector<int> singles{1, 1, 1};
  CHECK(log_crp_partition(singles, 2.0) ==
        doctest::Approx(std::log(8.0 / 24.0)).epsilon(1e-12));

  CHECK(log_crp_partition(std::vector<int>{}, 1.3) == 0.0);
}

TEST_CASE("crp partition probabilities sum to one over all partitions") {
  for (double alpha : {0.3, 1.0, 2.7}) {
    for (int n = 1; n <= 6; ++n) {
      double total = 0.0;
      for (const auto& part : set_partitions(n)) {
        std::vector<int> sizes(1 + *std::max_element(part.begin(), part.end()), 0);
        for (int l : part) ++sizes[l];
        total += std::exp(log_crp_partition(sizes, alpha));
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
    }
  }
}

TEST_CASE("joint prior hand-worked values at unit concentrations") {
  auto data = make_dataset({{0.1}, {-0.2}});
  Hyperparams hp;  // all alphas 1

  // Two groups in separate restaurants, their two tables sharing one dish:
  // (1/2) restaurant partition, 1 per trivial seating, (1/2) dish partition.
  CrfState separate;
  separate.restaurant_of_group = {0, 1};
  separate.table_of_customer = {0, 0};
  separate.dish_of_table = {{0}, {0}};
  CHECK(validate(separate, data).empty());
  CHECK(log_joint_prior(separate, data, hp) ==
        doctest::Approx(std::log(0.25)).epsilon(1e-12));

  // Same but both groups in one restaurant at two tables with a shared dish:
  // (1/2) restaurants, (1/2) seating of two customers, (1/2) dishes.
  CrfState together;
  together.restaurant_of_group = {0, 0};
  together.table_of_customer = {0, 1};
  together.dish_of_table = {{0, 0}};
  CHECK(validate(together, data).empty());
  CHECK(log_joint_prior(together, data, hp) ==
        doctest::Approx(std::log(0.125)).epsilon(1e-12));
}

TEST_CASE("joint prior is invariant to state relabeling") {
  auto data = testutil::gaussian_dataset({2, 3, 1}, 5);
  Hyperparams hp;
  hp.alpha0 = 0.8;
  hp.alpha1 = 1.7;
  hp.alpha2 = 0.4;
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    CrfState st = testutil::random_state(data, rng);
    // Reverse restaurant labels (and reorder dish_of_table to match), a
    // non-canonical but structurally identical state.
    int R = st.n_restaurants();
    CrfState alt = st;
    for (auto& r : alt.restaurant_of_group) r = R - 1 - r;
    std::reverse(alt.dish_of_table.begin(), alt.dish_of_table.end());
    CHECK(log_joint_prior(alt, data, hp) ==
          doctest::Approx(log_joint_prior(st, data, hp)).epsilon(1e-12));
  }
}

TEST_CASE("joint prior sums to one over enumerated states") {
  struct Case {
    std::vector<int> sizes;
    double a0, a1, a2;
  };
  for (const Case& c : {Case{{2, 1}, 1.0, 1.0, 1.0}, Case{{2, 2}, 0.5, 2.0, 1.3},
                        Case{{1, 1, 2}, 2.0, 0.7, 0.5}}) {
    auto data = testutil::gaussian_dataset(c.sizes, 3);
    Hyperparams hp;
    hp.alpha0 = c.a0;
    hp.alpha1 = c.a1;
    hp.alpha2 = c.a2;
    double total = 0.0;
    for (const CrfState& st : enumerate_states(data))
      total += std::exp(log_joint_prior(st, data, hp));
    CHECK(total == doctest::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("log likelihood is the sum of dish-cluster marginals") {
  auto data = make_dataset({{1.0, -0.5}, {0.25, 2.0}});
  Hyperparams hp;
  hp.sigma2 = 0.5;
  hp.k0 = 0.3;

  CrfState st;
  st.restaurant_of_group = {0, 0};
  st.table_of_customer = {0, 1, 1, 2};
  st.dish_of_table = {{0, 1, 0}};  // units {0, 3} share a dish, {1, 2} the other

  double want = log_marginal_cluster(stats_of({1.0, 2.0}), hp.sigma2, hp.k0) +
                log_marginal_cluster(stats_of({-0.5, 0.25}), hp.sigma2, hp.k0);
  CHECK(log_likelihood(st, data, hp) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("sigma2 gibbs draw has the conjugate posterior moments") {
  Hyperparams hp;
  hp.sigma2_prior = InvGammaPrior{6.0, 2.0};
  hp.k0 = 0.5;
  Rng rng(99);
  const int N = 200000;

  SUBCASE("prior draw when likelihood is tempered away") {
    double s = 0.0;
    std::vector<ClusterStats> stats{stats_of({1.0, 2.0, 3.0})};
    for (int i = 0; i < N; ++i) s += gibbs_sigma2_draw(stats, hp, rng, 0.0);
    CHECK(std::abs(s / N - 2.0 / 5.0) < 0.01);  // beta1 / (beta0 - 1)
  }

  SUBCASE("posterior draw concentrates on the conjugate update") {
    std::vector<ClusterStats> stats{stats_of({1.0, 2.0}), stats_of({-1.0, 0.0, 1.0})};
    double q = 0.0;
    int n = 0;
    for (const auto& st : stats) {
      q += st.sumsq - st.sum * st.sum / (st.n + hp.k0);
      n += st.n;
    }
    double a = hp.sigma2_prior->beta0 + 0.5 * n;
    double b = hp.sigma2_prior->beta1 + 0.5 * q;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < N; ++i) {
      double x = gibbs_sigma2_draw(stats, hp, rng, 1.0);
      s += x;
      s2 += x * x;
    }
    double mean = s / N;
    CHECK(std::abs(mean - b / (a - 1.0)) < 0.01);
    double var = b * b / ((a - 1.0) * (a - 1.0) * (a - 2.0));
    CHECK(std::abs(s2 / N - mean * mean - var) < 0.01);
  }

  SUBCASE("empty stats fall back to the prior") {
    double s = 0.0;
    for (int i = 0; i < N; ++i) s += gibbs_sigma2_draw({}, hp, rng, 1.0);
    CHECK(std::abs(s / N - 0.4) < 0.01);
  }
}

TEST_CASE("alpha terms are the concentration-dependent ewens factors per level") {
  auto data = testutil::gaussian_dataset({2, 1, 2}, 8);
  Rng rng(3);
  CrfState st = testutil::random_state(data, rng);
  Hyperparams hp;
  hp.alpha0 = 0.9;
  hp.alpha1 = 1.4;
  hp.alpha2 = 2.2;

  // Each level's term is its Ewens factor minus the alpha-free sum of
  // lgamma(cluster size) pieces.
  auto lgamma_sum = [](const std::vector<int>& sizes) {
    double s = 0.0;
    for (int k : sizes) s += std::lgamma(static_cast<double>(k));
    return s;
  };

  std::vector<int> rest_sizes(st.n_restaurants(), 0);
  for (int r : st.restaurant_of_group) ++rest_sizes[r];
  CHECK(log_prior_alpha_terms(AlphaIndex::alpha2, st, data, hp) ==
        doctest::Approx(log_crp_partition(rest_sizes, hp.alpha2) - lgamma_sum(rest_sizes))
            .epsilon(1e-12));

  double want1 = 0.0;
  for (int r = 0; r < st.n_restaurants(); ++r) {
    std::vector<int> sizes(st.dish_of_table[r].size(), 0);
    for (int i = 0; i < data.n_units(); ++i)
      if (st.restaurant_of_group[data.group_of[i]] == r) ++sizes[st.table_of_customer[i]];
    want1 += log_crp_partition(sizes, hp.alpha1) - lgamma_sum(sizes);
  }
  CHECK(log_prior_alpha_terms(AlphaIndex::alpha1, st, data, hp) ==
        doctest::Approx(want1).epsilon(1e-12));

  std::vector<int> dish_sizes(st.n_dishes(), 0);
  for (const auto& row : st.dish_of_table)
    for (int d : row) ++dish_sizes[d];
  CHECK(log_prior_alpha_terms(AlphaIndex::alpha0, st, data, hp) ==
        doctest::Approx(log_crp_partition(dish_sizes, hp.alpha0) - lgamma_sum(dish_sizes))
            .epsilon(1e-12));

  // Re-adding the alpha-free pieces assembles the joint prior.
  double table_lgamma = 0.0;
  for (int r = 0; r < st.n_restaurants(); ++r) {
    std::vector<int> sizes(st.dish_of_table[r].size(), 0);
    for (int i = 0; i < data.n_units(); ++i)
      if (st.restaurant_of_group[data.group_of[i]] == r) ++sizes[st.table_of_customer[i]];
    table_lgamma += lgamma_sum(sizes);
  }
  double assembled = log_prior_alpha_terms(AlphaIndex::alpha0, st, data, hp) +
                     log_prior_alpha_terms(AlphaIndex::alpha1, st, data, hp) +
                     log_prior_alpha_terms(AlphaIndex::alpha2, st, data, hp) +
                     lgamma_sum(rest_sizes) + table_lgamma + lgamma_sum(dish_sizes);
  CHECK(assembled == doctest::Approx(log_joint_prior(st, data, hp)).epsilon(1e-10));
}

TEST_CASE("mh alpha update samples the quadrature posterior") {
  auto data = testutil::gaussian_dataset({2, 2, 1, 1}, 21);
  Rng srng(17);
  CrfState st = testutil::random_state(data, srng);
  Hyperparams hp;
  hp.alpha_prior = std::array<TruncNormalPrior, 3>{
      TruncNormalPrior{2.0, 1.0}, TruncNormalPrior{2.0, 1.0}, TruncNormalPrior{2.0, 1.0}};

  double want = alpha_posterior_mean(AlphaIndex::alpha2, st, data, hp, 2.0, 1.0);

  Rng rng(4242);
  const int burn = 5000, keep = 250000;
  for (int i = 0; i < burn; ++i) mh_alpha_update(AlphaIndex::alpha2, st, data, hp, rng);
  double s = 0.0;
  long accepted = 0;
  for (int i = 0; i < keep; ++i) {
    accepted += mh_alpha_update(AlphaIndex::alpha2, st, data, hp, rng) ? 1 : 0;
    s += hp.alpha2;
  }
  double got = s / keep;
  CHECK(std::abs(got - want) < 0.05);
  // The walk should move but not always.
  CHECK(accepted > keep / 10);
  CHECK(accepted < keep);
}

TEST_CASE("mh alpha update leaves the untargeted parameters alone") {
  auto data = testutil::gaussian_dataset({2, 2}, 33);
  Rng srng(5);
  CrfState st = testutil::random_state(data, srng);
  Hyperparams hp;
  hp.alpha_prior = std::array<TruncNormalPrior, 3>{
      TruncNormalPrior{2.0, 1.0}, TruncNormalPrior{2.0, 1.0}, TruncNormalPrior{2.0, 1.0}};
  Rng rng(6);
  for (int i = 0; i < 100; ++i) {
    mh_alpha_update(AlphaIndex::alpha1, st, data, hp, rng);
    CHECK(hp.alpha0 == 1.0);
    CHECK(hp.alpha2 == 1.0);
    CHECK(hp.alpha1 > 0.0);
  }
}

TEST_CASE("standardize centers and scales with the n-1 denominator") {
  auto z = standardize(std::vector<double>{1.0, 2.0, 3.0});
  CHECK(z.mean == doctest::Approx(2.0));
  CHECK(z.sd == doctest::Approx(1.0));
  CHECK(z.values[0] == doctest::Approx(-1.0));
  CHECK(z.values[1] == doctest::Approx(0.0));
  CHECK(z.values[2] == doctest::Approx(1.0));

  CHECK_THROWS_AS(standardize(std::vector<double>{1.0}), std::invalid_argument);
  CHECK_THROWS_AS(standardize(std::vector<double>{2.0, 2.0, 2.0}), std::invalid_argument);
}
