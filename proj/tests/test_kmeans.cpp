#include <cmath>
#include <vector>

#include "doctest.h"
#include "nhdp/eval.hpp"
#include "nhdp/kmeans.hpp"

using namespace nhdp;

namespace {

std::vector<std::vector<double>> scalar_points(const std::vector<double>& xs) {
  std::vector<std::vector<double>> pts;
  for (double x : xs) pts.push_back({x});
  return pts;
}

}  // namespace

TEST_CASE("silhouette hand values") {
  SUBCASE("two tight pairs far apart") {
    auto pts = scalar_points({0.0, 0.5, 10.0, 10.5});
    std::vector<int> lab{0, 0, 1, 1};
    double outer = 9.75 / 10.25;  // points 0 and 3
    double inner = 9.25 / 9.75;   // points 1 and 2
    CHECK(silhouette(pts, lab) == doctest::Approx(0.5 * (outer + inner)).epsilon(1e-12));
    // Label values are irrelevant, only the grouping matters.
    std::vector<int> relabeled{7, 7, -2, -2};
    CHECK(silhouette(pts, relabeled) == doctest::Approx(silhouette(pts, lab)));
  }

  SUBCASE("singletons contribute zero") {
    auto pts = scalar_points({0.0, 1.0, 5.0});
    std::vector<int> lab{0, 1, 1};
    // point 0 is a singleton (0), point 1 scores (1-4)/4, point 2 (5-4)/5
    CHECK(silhouette(pts, lab) == doctest::Approx((0.0 - 0.75 + 0.2) / 3.0));
  }

  SUBCASE("coincident points score zero") {
    auto pts = scalar_points({0.0, 0.0, 0.0, 0.0});
    CHECK(silhouette(pts, {0, 0, 1, 1}) == 0.0);
  }

  CHECK_THROWS_AS(silhouette(scalar_points({1.0, 2.0}), {0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(silhouette(scalar_points({1.0, 2.0}), {0}), std::invalid_argument);
  CHECK_THROWS_AS(silhouette({}, {}), std::invalid_argument);
}

TEST_CASE("kmeans_select finds three separated blobs") {
  std::vector<double> xs;
  for (double base : {-10.0, 0.0, 10.0}) {
    for (int i = 0; i < 5; ++i) xs.push_back(base + 0.05 * i);
  }
  auto pts = scalar_points(xs);
  auto res = kmeans_select(pts, 6, 99);

  CHECK(res.chosen_k == 3);
  std::vector<int> want(15);
  for (int i = 0; i < 15; ++i) want[i] = i / 5;
  CHECK(res.labels == want);
  CHECK(res.centers.size() == 3);
  CHECK(res.centers[0][0] == doctest::Approx(-9.9));

  // The scanned curve covers K = 2..6 in order and peaks at the chosen K.
  REQUIRE(res.silhouette_by_k.size() == 5);
  double peak = -1.0;
  for (std::size_t i = 0; i < res.silhouette_by_k.size(); ++i) {
    CHECK(res.silhouette_by_k[i].first == static_cast<int>(i) + 2);
    peak = std::max(peak, res.silhouette_by_k[i].second);
  }
  CHECK(peak == res.silhouette_by_k[1].second);

  // Bit-identical rerun with the same seed.
  auto res2 = kmeans_select(pts, 6, 99);
  CHECK(res2.labels == res.labels);
  CHECK(res2.chosen_k == res.chosen_k);
  CHECK(res2.silhouette_by_k == res.silhouette_by_k);
}

TEST_CASE("kmeans_select input validation") {
  CHECK_THROWS_AS(kmeans_select(scalar_points({1.0, 2.0}), 2, 1), std::invalid_argument);
  CHECK_THROWS_AS(kmeans_select(scalar_points({1.0, 2.0, 3.0}), 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(kmeans_select(scalar_points({1.0, 2.0, 3.0}), 2, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(kmeans_select(scalar_points({2.0, 2.0, 2.0}), 2, 1), std::invalid_argument);
  CHECK_THROWS_AS(kmeans_select({{1.0}, {2.0}, {3.0, 4.0}}, 2, 1), std::invalid_argument);

  // Only two distinct values caps the scan at K = 2 regardless of k_max.
  auto res = kmeans_select(scalar_points({0.0, 0.0, 0.0, 1.0, 1.0, 1.0}), 5, 7);
  CHECK(res.chosen_k == 2);
  CHECK(res.silhouette_by_k.size() == 1);
  CHECK(res.labels == std::vector<int>{0, 0, 0, 1, 1, 1});
}

TEST_CASE("group proportion vectors") {
  auto data = make_dataset({{1.0, 2.0, 3.0}, {4.0, 5.0}});
  std::vector<int> unit_labels{0, 1, 0, 1, 1};
  auto props = group_proportion_vectors(data, unit_labels, 2);
  REQUIRE(props.size() == 2);
  CHECK(props[0] == std::vector<double>{2.0 / 3.0, 1.0 / 3.0});
  CHECK(props[1] == std::vector<double>{0.0, 1.0});
  for (const auto& row : props) {
    double s = 0.0;
    for (double v : row) {
      CHECK(v >= 0.0);
      s += v;
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("multilevel kmeans recovers a planted two-level structure") {
  // Groups 0, 1 concentrate near -10 with one unit near 0; groups 2, 3 mirror
  // at +10. Unit stage should find three blobs, group stage two profiles.
  auto data = make_dataset({
      {-10.1, -9.9, -10.0, 0.1},
      {-10.05, -9.95, -10.02, -0.1},
      {10.1, 9.9, 10.0, 0.05},
      {10.05, 9.95, 10.02, -0.05},
  });
  auto pair = multilevel_kmeans(data, 5, 42);

  CHECK(vi_distance(pair.gamma_l, {0, 0, 1, 1}) == 0.0);
  std::vector<int> want_h{0, 0, 0, 1, 0, 0, 0, 1, 2, 2, 2, 1, 2, 2, 2, 1};
  CHECK(vi_distance(pair.gamma_h, want_h) == 0.0);
  CHECK(pair.gamma_h == canonical_labels(pair.gamma_h));
  CHECK(pair.gamma_l == canonical_labels(pair.gamma_l));

  auto rerun = multilevel_kmeans(data, 5, 42);
  CHECK(rerun == pair);

  // The group stage clusters L vectors, so fewer than 3 groups cannot work.
  auto tiny = make_dataset({{-1.0, -1.1}, {1.0, 1.1}});
  CHECK_THROWS_AS(multilevel_kmeans(tiny, 3, 1), std::invalid_argument);
}
