#include <algorithm>
#include <map>
#include <vector>

#include "doctest.h"
#include "nhdp/crf_state.hpp"
#include "nhdp/enumerate.hpp"
#include "test_util.hpp"

using namespace nhdp;

TEST_CASE("canonical labels renumber by first appearance") {
  CHECK(canonical_labels({2, 2, 0, 1}) == std::vector<int>{0, 0, 1, 2});
  CHECK(canonical_labels({0, 1, 2}) == std::vector<int>{0, 1, 2});
  CHECK(canonical_labels({}) == std::vector<int>{});
  CHECK(canonical_labels({7}) == std::vector<int>{0});
  CHECK(count_clusters({0, 1, 1, 2}) == 3);
  CHECK(count_clusters({}) == 0);
}

TEST_CASE("all merged and all split bracket the state space") {
  auto data = testutil::gaussian_dataset({2, 3}, 1);

  CrfState merged = all_merged_state(data);
  CHECK(validate(merged, data).empty());
  CHECK(merged.n_restaurants() == 1);
  CHECK(merged.n_tables() == 1);
  CHECK(merged.n_dishes() == 1);
  auto pm = induced_partitions(merged, data);
  CHECK(pm.gamma_l == std::vector<int>{0, 0});
  CHECK(pm.gamma_h == std::vector<int>{0, 0, 0, 0, 0});

  CrfState split = all_split_state(data);
  CHECK(validate(split, data).empty());
  CHECK(split.n_restaurants() == 2);
  CHECK(split.n_tables() == 5);
  CHECK(split.n_dishes() == 5);
  auto ps = induced_partitions(split, data);
  CHECK(ps.gamma_l == std::vector<int>{0, 1});
  CHECK(ps.gamma_h == std::vector<int>{0, 1, 2, 3, 4});
}

TEST_CASE("canonicalize undoes relabeling and induced partitions ignore it") {
  auto data = testutil::gaussian_dataset({2, 1, 3}, 2);
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    CrfState st = testutil::random_state(data, rng);
    CHECK(validate(st, data).empty());
    CHECK(canonicalize(st, data) == st);  // random_state already canonicalizes

    // Scramble restaurant order and dish names, keeping the structure.
    CrfState alt = st;
    int R = st.n_restaurants();
    std::vector<int> rperm(R);
    for (int r = 0; r < R; ++r) rperm[r] = R - 1 - r;
    for (auto& r : alt.restaurant_of_group) r = rperm[r];
    std::vector<std::vector<int>> dt(R);
    for (int r = 0; r < R; ++r) dt[rperm[r]] = st.dish_of_table[r];
    alt.dish_of_table = dt;
    int D = st.n_dishes();
    for (auto& row : alt.dish_of_table)
      for (auto& d : row) d = D - 1 - d;

    CHECK(canonicalize(alt, data) == st);
    CHECK(induced_partitions(alt, data) == induced_partitions(st, data));
  }
}

TEST_CASE("induced partitions read dishes through tables") {
  auto data = testutil::gaussian_dataset({2, 2}, 3);
  CrfState st;
  st.restaurant_of_group = {0, 0};
  st.table_of_customer = {0, 1, 0, 2};
  st.dish_of_table = {{0, 1, 0}};
  auto p = induced_partitions(st, data);
  CHECK(p.gamma_l == std::vector<int>{0, 0});
  // units 0 and 2 share table 0 (dish 0), unit 3's table 2 has dish 0 too.
  CHECK(p.gamma_h == std::vector<int>{0, 1, 0, 0});
}

TEST_CASE("validate reports structural breakage") {
  auto data = testutil::gaussian_dataset({2, 2}, 4);
  CrfState good = all_merged_state(data);
  CHECK(validate(good, data).empty());

  SUBCASE("wrong vector lengths") {
    CrfState st = good;
    st.restaurant_of_group.pop_back();
    CHECK(!validate(st, data).empty());
    CrfState st2 = good;
    st2.table_of_customer.push_back(0);
    CHECK(!validate(st2, data).empty());
  }

  SUBCASE("restaurant labels with gaps") {
    CrfState st = good;
    st.restaurant_of_group = {0, 2};
    st.dish_of_table = {{0}, {}, {0}};
    CHECK(!validate(st, data).empty());
  }

  SUBCASE("out of range labels") {
    CrfState st = good;
    st.restaurant_of_group = {0, 5};
    CHECK(!validate(st, data).empty());
    CrfState st2 = good;
    st2.table_of_customer = {0, 0, 0, 9};
    CHECK(!validate(st2, data).empty());
    CrfState st3 = good;
    st3.table_of_customer = {0, 0, 0, -1};
    CHECK(!validate(st3, data).empty());
  }

  SUBCASE("empty table slot") {
    CrfState st = good;
    st.dish_of_table = {{0, 0}};  // second table never seated
    CHECK(!validate(st, data).empty());
  }

  SUBCASE("dish labels with gaps") {
    CrfState st = good;
    st.dish_of_table = {{1}};
    CHECK(!validate(st, data).empty());
  }

  SUBCASE("non-canonical but structurally sound states pass") {
    // Validation is about structure, not labeling order; canonicalize fixes
    // the labels separately.
    auto data3 = testutil::gaussian_dataset({1, 1}, 5);
    CrfState st;
    st.restaurant_of_group = {1, 0};
    st.table_of_customer = {0, 0};
    st.dish_of_table = {{1}, {0}};
    CHECK(validate(st, data3).empty());
    CHECK(canonicalize(st, data3).restaurant_of_group == std::vector<int>{0, 1});
  }
}

TEST_CASE("restaurant split keeps the unit partition and adds a restaurant") {
  auto data = testutil::gaussian_dataset({2, 2, 1, 3}, 6);
  Rng rng(123);
  int done = 0;
  while (done < 500) {
    CrfState st = testutil::random_state(data, rng);
    // Pick a restaurant with at least two groups.
    std::vector<std::vector<int>> groups_of(st.n_restaurants());
    for (int g = 0; g < data.n_groups; ++g)
      groups_of[st.restaurant_of_group[g]].push_back(g);
    int s = -1;
    for (int r = 0; r < st.n_restaurants(); ++r)
      if (groups_of[r].size() >= 2) s = r;
    if (s < 0) continue;

    std::vector<int> side(data.n_groups, 0);
    side[groups_of[s][0]] = 0;
    side[groups_of[s][1]] = 1;
    for (size_t k = 2; k < groups_of[s].size(); ++k)
      side[groups_of[s][k]] = rng.uniform_int(2);

    CrfState after = apply_restaurant_split(st, data, s, side);
    CHECK(validate(after, data).empty());
    CHECK(after.n_restaurants() == st.n_restaurants() + 1);
    // The split only moves whole-group seatings; units keep their dishes.
    CHECK(induced_partitions(after, data).gamma_h ==
          induced_partitions(st, data).gamma_h);
    ++done;
  }
}

TEST_CASE("restaurant merge with the split tables as matching undoes a split") {
  auto data = testutil::gaussian_dataset({2, 1, 2, 2}, 7);
  Rng rng(321);
  int done = 0;
  while (done < 500) {
    CrfState st = testutil::random_state(data, rng);
    std::vector<std::vector<int>> groups_of(st.n_restaurants());
    for (int g = 0; g < data.n_groups; ++g)
      groups_of[st.restaurant_of_group[g]].push_back(g);
    int s = -1;
    for (int r = 0; r < st.n_restaurants(); ++r)
      if (groups_of[r].size() >= 2) s = r;
    if (s < 0) continue;

    std::vector<int> side(data.n_groups, 0);
    side[groups_of[s][0]] = 0;
    side[groups_of[s][1]] = 1;
    for (size_t k = 2; k < groups_of[s].size(); ++k)
      side[groups_of[s][k]] = rng.uniform_int(2);
    CrfState split = apply_restaurant_split(st, data, s, side);

    // Locate the two fragments of every parent table that straddled the cut.
    // Tables are identified by the units they seat.
    int s1 = split.restaurant_of_group[groups_of[s][0]];
    int s2 = split.restaurant_of_group[groups_of[s][1]];
    std::map<std::pair<int, int>, std::vector<int>> units_at;  // (rest, table) -> units
    for (int i = 0; i < data.n_units(); ++i) {
      int r = split.restaurant_of_group[data.group_of[i]];
      units_at[{r, split.table_of_customer[i]}].push_back(i);
    }
    std::map<std::pair<int, int>, std::vector<int>> units_at_old;
    for (int i = 0; i < data.n_units(); ++i) {
      int r = st.restaurant_of_group[data.group_of[i]];
      units_at_old[{r, st.table_of_customer[i]}].push_back(i);
    }
    std::vector<std::pair<int, int>> matching;
    std::vector<char> flags;
    for (const auto& [key, units] : units_at_old) {
      if (key.first != s) continue;
      int t1 = -1, t2 = -1;
      for (int u : units) {
        int r = split.restaurant_of_group[data.group_of[u]];
        if (r == s1) t1 = split.table_of_customer[u];
        if (r == s2) t2 = split.table_of_customer[u];
      }
      if (t1 >= 0 && t2 >= 0) {
        matching.push_back({t1, t2});
        flags.push_back(1);
      }
    }

    CrfState merged = apply_restaurant_merge(split, data, s1, s2, matching, flags);
    CHECK(validate(merged, data).empty());
    CHECK(canonicalize(merged, data) == canonicalize(st, data));
    ++done;
  }
}

TEST_CASE("restaurant merge keeps the unit partition under arbitrary flags") {
  auto data = testutil::gaussian_dataset({1, 2, 2, 1, 2}, 8);
  Rng rng(400);
  int done = 0;
  while (done < 500) {
    CrfState st = testutil::random_state(data, rng);
    if (st.n_restaurants() < 2) continue;
    int s1 = 0, s2 = 1;

    // Random legal matching: per dish served on both sides, pair tables up to
    // the smaller count, each pair fused by a coin flip.
    std::vector<std::vector<int>> tab1(st.n_dishes()), tab2(st.n_dishes());
    for (size_t t = 0; t < st.dish_of_table[s1].size(); ++t)
      tab1[st.dish_of_table[s1][t]].push_back(static_cast<int>(t));
    for (size_t t = 0; t < st.dish_of_table[s2].size(); ++t)
      tab2[st.dish_of_table[s2][t]].push_back(static_cast<int>(t));
    std::vector<std::pair<int, int>> matching;
    std::vector<char> flags;
    for (int d = 0; d < st.n_dishes(); ++d) {
      size_t k = std::min(tab1[d].size(), tab2[d].size());
      for (size_t i = 0; i < k; ++i) {
        matching.push_back({tab1[d][i], tab2[d][i]});
        flags.push_back(rng.bernoulli(0.5) ? 1 : 0);
      }
    }

    CrfState merged = apply_restaurant_merge(st, data, s1, s2, matching, flags);
    CHECK(validate(merged, data).empty());
    CHECK(merged.n_restaurants() == st.n_restaurants() - 1);
    CHECK(induced_partitions(merged, data).gamma_h ==
          induced_partitions(st, data).gamma_h);
    ++done;
  }
}

TEST_CASE("set partitions enumerate the bell numbers") {
  CHECK(set_partitions(1).size() == 1);
  CHECK(set_partitions(2).size() == 2);
  CHECK(set_partitions(3).size() == 5);
  CHECK(set_partitions(4).size() == 15);
  CHECK(set_partitions(5).size() == 52);
  CHECK(set_partitions(6).size() == 203);
  // Every returned labeling is canonical and distinct.
  auto parts = set_partitions(4);
  std::map<std::vector<int>, int> seen;
  for (const auto& p : parts) {
    CHECK(canonical_labels(p) == p);
    ++seen[p];
  }
  CHECK(seen.size() == parts.size());
}

TEST_CASE("state enumeration counts match independent recursion") {
  // Count states as: for each restaurant partition, the product over
  // restaurants of set partitions of their units, times the number of dish
  // partitions of the resulting table multiset (a Bell number).
  auto bell = [](int n) {
    std::vector<std::vector<long>> tri(n + 1);
    tri[0] = {1};
    for (int i = 1; i <= n; ++i) {
      tri[i].resize(i + 1);
      tri[i][0] = tri[i - 1][i - 1];
      for (int j = 1; j <= i; ++j) tri[i][j] = tri[i][j - 1] + tri[i - 1][j - 1];
    }
    return tri[n][0];
  };

  for (const auto& sizes : std::vector<std::vector<int>>{{1}, {2}, {1, 1}, {2, 1}, {2, 2}, {1, 1, 2}}) {
    auto data = testutil::gaussian_dataset(sizes, 9);
    long want = 0;
    for (const auto& rpart : set_partitions(data.n_groups)) {
      int R = count_clusters(rpart);
      std::vector<int> units_in(R, 0);
      for (int i = 0; i < data.n_units(); ++i) units_in[rpart[data.group_of[i]]]++;
      // Sum over table partitions of each restaurant of Bell(total tables);
      // expand by iterating the cross product of per-restaurant partitions.
      std::vector<std::vector<std::vector<int>>> opts(R);
      for (int r = 0; r < R; ++r) opts[r] = set_partitions(units_in[r]);
      std::vector<size_t> idx(R, 0);
      for (;;) {
        int tables = 0;
        for (int r = 0; r < R; ++r) tables += count_clusters(opts[r][idx[r]]);
        want += bell(tables);
        int carry = R - 1;
        while (carry >= 0 && ++idx[carry] == opts[carry].size()) idx[carry--] = 0;
        if (carry < 0) break;
      }
    }
    auto states = enumerate_states(data);
    CHECK(static_cast<long>(states.size()) == want);
    for (const auto& st : states) {
      CHECK(validate(st, data).empty());
      CHECK(canonicalize(st, data) == st);
    }
    // No duplicates.
    std::map<std::vector<int>, int> dedupe;
    for (const auto& st : states) {
      std::vector<int> key = st.restaurant_of_group;
      key.push_back(-1);
      key.insert(key.end(), st.table_of_customer.begin(), st.table_of_customer.end());
      key.push_back(-1);
      for (const auto& row : st.dish_of_table) {
        key.insert(key.end(), row.begin(), row.end());
        key.push_back(-2);
      }
      ++dedupe[key];
    }
    CHECK(dedupe.size() == states.size());
  }
}

TEST_CASE("enumeration includes states with non-nested unit partitions") {
  // The point of the model: units of the same group can sit at tables with
  // different dishes while units of different groups share one. Check the
  // enumeration reaches such a state.
  auto data = testutil::gaussian_dataset({2, 2}, 10);
  bool found = false;
  for (const CrfState& st : enumerate_states(data)) {
    auto p = induced_partitions(st, data);
    if (p.gamma_l[0] == p.gamma_l[1] && p.gamma_h[0] != p.gamma_h[1] &&
        p.gamma_h[0] == p.gamma_h[2])
      found = true;
  }
  CHECK(found);
}

TEST_CASE("enumeration refuses oversized instances") {
  auto data = testutil::gaussian_dataset({5, 4}, 11);  // 9 units
  CHECK_THROWS_AS(enumerate_states(data), std::invalid_argument);
}

TEST_CASE("enumeration with frozen restaurants covers the conditional space") {
  auto data = testutil::gaussian_dataset({2, 1, 1}, 12);
  std::vector<int> r{0, 0, 1};
  auto states = enumerate_states_given_restaurants(data, r);
  CHECK(!states.empty());
  for (const auto& st : states) {
    CHECK(validate(st, data).empty());
    CHECK(st.restaurant_of_group == r);
  }
  // Against the full enumeration filtered to this restaurant partition.
  long filtered = 0;
  for (const auto& st : enumerate_states(data))
    if (st.restaurant_of_group == r) ++filtered;
  CHECK(static_cast<long>(states.size()) == filtered);
}
