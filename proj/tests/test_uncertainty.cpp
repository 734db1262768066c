#include <doctest.h>

#include <cmath>

#include "poseatl/uncertainty.hpp"

using namespace poseatl;

namespace {

Heatmap one_hot(int H, int W, int r, int c, float v = 1.0f) {
  Heatmap hm(1, H, W);
  hm.at(0, r, c) = v;
  return hm;
}

}  // namespace

TEST_CASE("normalize divides a channel by its sum") {
  Heatmap hm(1, 2, 2);
  hm.at(0, 0, 0) = 1.0f;
  hm.at(0, 0, 1) = 1.0f;
  hm.at(0, 1, 0) = 1.0f;
  hm.at(0, 1, 1) = 1.0f;
  auto n = normalize_heatmap(hm);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) CHECK(n.heatmap.at(0, r, c) == doctest::Approx(0.25));
  CHECK(n.degenerate[0] == 0);
}

TEST_CASE("normalize turns an all-zero channel uniform and flags it") {
  Heatmap hm(1, 4, 5);
  auto n = normalize_heatmap(hm);
  CHECK(n.degenerate[0] == 1);
  CHECK(n.heatmap.at(0, 2, 3) == doctest::Approx(1.0 / 20.0));
}

TEST_CASE("normalize is idempotent") {
  auto hm = one_hot(6, 6, 2, 2, 0.3f);
  hm.at(0, 4, 4) = 0.9f;
  auto once = normalize_heatmap(hm);
  auto twice = normalize_heatmap(once.heatmap);
  for (std::size_t i = 0; i < hm.values.size(); ++i)
    CHECK(std::abs(once.heatmap.values[i] - twice.heatmap.values[i]) < 1e-12);
}

TEST_CASE("lc score is one minus the mean confidence") {
  CHECK(lc_score({1.0, 1.0, 1.0}) == doctest::Approx(0.0));
  CHECK(lc_score({0.0, 0.0}) == doctest::Approx(1.0));
  CHECK(lc_score({1.0, 0.5, 0.0}) == doctest::Approx(0.5));
}

TEST_CASE("a one-hot channel has exactly one local peak") {
  auto hm = normalize_heatmap(one_hot(8, 8, 3, 3));
  auto peaks = find_local_peaks(hm.heatmap.channel(0), 8, 8, 0.1);
  REQUIRE(peaks.size() == 1);
  CHECK(peaks[0].row == 3);
  CHECK(peaks[0].col == 3);
}

TEST_CASE("relative threshold admits or rejects the second bump") {
  Heatmap hm(1, 8, 8);
  hm.at(0, 1, 1) = 1.0f;
  SUBCASE("bump below threshold is dropped") {
    hm.at(0, 6, 6) = 0.4f;
    auto peaks = find_local_peaks(hm.channel(0), 8, 8, 0.5);
    CHECK(peaks.size() == 1);
  }
  SUBCASE("bump above threshold is kept") {
    hm.at(0, 6, 6) = 0.6f;
    auto peaks = find_local_peaks(hm.channel(0), 8, 8, 0.5);
    CHECK(peaks.size() == 2);
    CHECK(peaks[0].value > peaks[1].value);
  }
}

TEST_CASE("the global max survives even on a plateau") {
  Heatmap hm(1, 4, 4);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) hm.at(0, r, c) = 0.5f;  // no strict maximum
  auto peaks = find_local_peaks(hm.channel(0), 4, 4, 0.1);
  REQUIRE(peaks.size() == 1);
  CHECK(peaks[0].row == 0);
  CHECK(peaks[0].col == 0);
}

TEST_CASE("mpe is zero for single-peak channels") {
  auto hm = normalize_heatmap(one_hot(8, 8, 2, 5));
  CHECK(mpe_score(hm.heatmap, 0.1) == doctest::Approx(0.0));
}

TEST_CASE("mpe of two equal peaks is ln 2") {
  Heatmap hm(1, 8, 8);
  hm.at(0, 1, 1) = 0.5f;
  hm.at(0, 6, 6) = 0.5f;
  auto n = normalize_heatmap(hm);
  CHECK(mpe_score(n.heatmap, 0.1) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("mpe averages over keypoints") {
  Heatmap hm(2, 8, 8);
  hm.at(0, 1, 1) = 1.0f;  // single peak
  hm.at(1, 1, 1) = 0.5f;
  hm.at(1, 6, 6) = 0.5f;  // two equal peaks
  auto n = normalize_heatmap(hm);
  CHECK(mpe_score(n.heatmap, 0.1) == doctest::Approx(std::log(2.0) / 2.0));
}

TEST_CASE("tpc is zero for identical poses") {
  Pose p;
  p.keypoints = {{1, 2, 2}, {3, 4, 2}};
  auto res = tpc_score(p, p, p, {0, 0, 3, 4});
  CHECK(res.value == doctest::Approx(0.0));
  CHECK_FALSE(res.isolated);
}

TEST_CASE("tpc of a uniform diag/10 shift per step is 0.2") {
  const BBox box{0, 0, 3, 4};  // diagonal 5
  const double step = box.diagonal() / 10.0;
  Pose a, b, c;
  for (int k = 0; k < 3; ++k) {
    a.keypoints.push_back({1.0 * k, 2.0, 2});
    b.keypoints.push_back({1.0 * k + step, 2.0, 2});
    c.keypoints.push_back({1.0 * k + 2 * step, 2.0, 2});
  }
  CHECK(tpc_score(a, b, c, box).value == doctest::Approx(0.2));
}

TEST_CASE("tpc doubles the remaining term at a track boundary") {
  const BBox box{0, 0, 3, 4};
  const double step = box.diagonal() / 10.0;
  Pose b, c;
  for (int k = 0; k < 3; ++k) {
    b.keypoints.push_back({1.0 * k, 2.0, 2});
    c.keypoints.push_back({1.0 * k + step, 2.0, 2});
  }
  CHECK(tpc_score(std::nullopt, b, c, box).value == doctest::Approx(0.2));
}

TEST_CASE("tpc flags a single-frame track with score zero") {
  Pose p;
  p.keypoints = {{1, 1, 2}};
  auto res = tpc_score(std::nullopt, p, std::nullopt, {0, 0, 2, 2});
  CHECK(res.value == 0.0);
  CHECK(res.isolated);
}

TEST_CASE("thc of temporally constant heatmaps is zero") {
  auto n = normalize_heatmap(one_hot(6, 6, 2, 2)).heatmap;
  auto res = thc_score(&n, n, &n);
  CHECK(res.value == doctest::Approx(0.0));
}

TEST_CASE("thc of one-hot heatmaps at disjoint cells is exactly 4") {
  auto a = normalize_heatmap(one_hot(6, 6, 0, 0)).heatmap;
  auto b = normalize_heatmap(one_hot(6, 6, 2, 3)).heatmap;
  auto c = normalize_heatmap(one_hot(6, 6, 5, 5)).heatmap;
  CHECK(thc_score(&a, b, &c).value == doctest::Approx(4.0));
}

TEST_CASE("thc doubles the remaining side at a boundary") {
  auto b = normalize_heatmap(one_hot(6, 6, 2, 3)).heatmap;
  auto c = normalize_heatmap(one_hot(6, 6, 5, 5)).heatmap;
  CHECK(thc_score(nullptr, b, &c).value == doctest::Approx(4.0));
}

TEST_CASE("thc rejects mismatched heatmap dimensions") {
  auto a = normalize_heatmap(one_hot(6, 6, 1, 1)).heatmap;
  auto b = normalize_heatmap(one_hot(5, 6, 1, 1)).heatmap;
  CHECK_THROWS_AS(thc_score(&a, b, nullptr), std::invalid_argument);
}

TEST_CASE("thc never exceeds 4 for normalized heatmaps") {
  Rng rng{31};
  for (int trial = 0; trial < 25; ++trial) {
    Heatmap raw(3, 8, 8);
    for (auto& v : raw.values) v = static_cast<float>(rng.uniform());
    auto a = normalize_heatmap(raw).heatmap;
    for (auto& v : raw.values) v = static_cast<float>(rng.uniform());
    auto b = normalize_heatmap(raw).heatmap;
    for (auto& v : raw.values) v = static_cast<float>(rng.uniform());
    auto c = normalize_heatmap(raw).heatmap;
    const double v = thc_score(&a, b, &c).value;
    CHECK(v >= 0.0);
    CHECK(v <= 4.0 + 1e-9);
  }
}
