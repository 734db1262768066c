#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "poseatl/pose_data.hpp"
#include "poseatl/uncertainty.hpp"

using namespace poseatl;

namespace {

VideoDataset tiny_dataset(const std::vector<std::pair<int, int>>& frame_tracks) {
  VideoDataset d;
  d.video_id = "tiny";
  d.frame_count = 8;
  d.keypoint_schema.names = {"a", "b"};
  d.keypoint_schema.kappas = {0.1, 0.1};
  int id = 0;
  for (auto [f, t] : frame_tracks) {
    PoseSample s;
    s.sample_id = id++;
    s.frame_index = f;
    s.track_id = t;
    s.bbox = {0, 0, 10, 20};
    s.gt_pose.keypoints = {{2, 3, 2}, {4, 5, 2}};
    d.samples.push_back(s);
  }
  return d;
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("dataset of 3 frames with 2,4,1 persons has N=7") {
  std::vector<std::pair<int, int>> ft;
  for (int t = 0; t < 2; ++t) ft.push_back({0, t});
  for (int t = 0; t < 4; ++t) ft.push_back({1, t});
  ft.push_back({2, 0});
  auto d = tiny_dataset(ft);
  const auto path = temp_path("poseatl_n7.json");
  save_dataset(d, path);
  auto loaded = load_dataset(path);
  CHECK(loaded.sample_count() == 7);
  std::filesystem::remove(path);
}

TEST_CASE("empty sample list is rejected") {
  auto d = tiny_dataset({});
  CHECK_THROWS_WITH_AS(d.validate(), "dataset has no samples", std::invalid_argument);
}

TEST_CASE("duplicate (frame, track) pair is a schema violation naming the record") {
  auto d = tiny_dataset({{0, 3}, {0, 3}});
  CHECK_THROWS_WITH_AS(d.validate(), doctest::Contains("sample_id 1"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(d.validate(), doctest::Contains("track 3"), std::invalid_argument);
}

TEST_CASE("dataset save/load round-trips to an equal dataset") {
  auto d = generate_synthetic_video({5, 2, 15}, 42);
  const auto path = temp_path("poseatl_roundtrip.json");
  save_dataset(d, path);
  auto loaded = load_dataset(path);
  CHECK(dataset_to_json(d).dump() == dataset_to_json(loaded).dump());
  std::filesystem::remove(path);
}

TEST_CASE("synthetic video is a pure function of spec and seed") {
  SynthSpec spec{30, 3, 15};
  auto a = generate_synthetic_video(spec, 7);
  auto b = generate_synthetic_video(spec, 7);
  CHECK(a.sample_count() == 90);
  CHECK(dataset_to_json(a).dump() == dataset_to_json(b).dump());

  auto c = generate_synthetic_video(spec, 8);
  CHECK(dataset_to_json(a).dump() != dataset_to_json(c).dump());
}

TEST_CASE("minimal synthetic video is valid") {
  auto d = generate_synthetic_video({1, 1, 15}, 1);
  CHECK(d.sample_count() == 1);
  CHECK_NOTHROW(d.validate());
}

TEST_CASE("synthetic spec dimensions are checked") {
  CHECK_THROWS_AS(generate_synthetic_video({0, 1, 15}, 1), std::invalid_argument);
  CHECK_THROWS_AS(generate_synthetic_video({1, 0, 15}, 1), std::invalid_argument);
  CHECK_THROWS_AS(generate_synthetic_video({1, 1, 1}, 1), std::invalid_argument);
}

TEST_CASE("per-frame ground-truth displacement stays under 5% of the bbox diagonal") {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 11ULL, 99ULL}) {
    auto d = generate_synthetic_video({40, 3, 15}, seed);
    std::map<int, std::map<int, const PoseSample*>> tracks;
    for (const auto& s : d.samples) tracks[s.track_id][s.frame_index] = &s;
    for (const auto& [tid, frames] : tracks) {
      for (auto it = frames.begin(); std::next(it) != frames.end(); ++it) {
        const PoseSample& a = *it->second;
        const PoseSample& b = *std::next(it)->second;
        double max_step = 0.0;
        for (int k = 0; k < 15; ++k) {
          const double dx = a.gt_pose.keypoints[k].x - b.gt_pose.keypoints[k].x;
          const double dy = a.gt_pose.keypoints[k].y - b.gt_pose.keypoints[k].y;
          max_step = std::max(max_step, std::hypot(dx, dy));
        }
        CHECK(max_step <= 0.05 * a.bbox.diagonal());
      }
    }
  }
}

TEST_CASE("difficulty is smooth over frames and within [0,1]") {
  auto d = generate_synthetic_video({40, 2, 15}, 5);
  std::map<int, std::map<int, double>> tracks;
  for (const auto& s : d.samples) {
    CHECK(s.difficulty >= 0.0);
    CHECK(s.difficulty <= 1.0);
    tracks[s.track_id][s.frame_index] = s.difficulty;
  }
  for (const auto& [tid, byframe] : tracks)
    for (auto it = byframe.begin(); std::next(it) != byframe.end(); ++it)
      CHECK(std::abs(it->second - std::next(it)->second) < 0.15);
}

TEST_CASE("heatmap render centers a single peak at the grid center") {
  Pose p;
  p.keypoints = {{5.0, 5.0, 2}};
  const BBox box{0, 0, 10, 10};
  auto res = render_heatmap(p, box, 7, 7, 1.0);
  auto dec = decode_pose(res.heatmap, box);
  // center cell of a 7x7 grid is (3,3)
  CHECK(res.heatmap.at(0, 3, 3) == doctest::Approx(1.0));
  CHECK(dec.pose.keypoints[0].x == doctest::Approx(5.0));
  CHECK(dec.pose.keypoints[0].y == doctest::Approx(5.0));
}

TEST_CASE("a strong spurious peak produces a second local maximum") {
  Pose p;
  p.keypoints = {{2.5, 2.5, 2}};  // exactly on a cell center
  const BBox box{0, 0, 16, 16};
  auto res = render_heatmap(p, box, 16, 16, 0.8, {{0, 13.5, 13.5, 1.0}});
  auto norm = normalize_heatmap(res.heatmap);
  auto peaks = find_local_peaks(norm.heatmap.channel(0), 16, 16, 0.5);
  CHECK(peaks.size() == 2);
}

TEST_CASE("small sigma concentrates at least 99% of mass in the 3x3 around the peak") {
  Pose p;
  p.keypoints = {{5.0, 5.0, 2}};
  const BBox box{0, 0, 10, 10};
  auto res = render_heatmap(p, box, 9, 9, 0.5);
  double total = 0.0, local = 0.0;
  int pr = 0, pc = 0;
  float best = 0.0f;
  for (int r = 0; r < 9; ++r)
    for (int c = 0; c < 9; ++c)
      if (res.heatmap.at(0, r, c) > best) {
        best = res.heatmap.at(0, r, c);
        pr = r;
        pc = c;
      }
  for (int r = 0; r < 9; ++r)
    for (int c = 0; c < 9; ++c) {
      total += res.heatmap.at(0, r, c);
      if (std::abs(r - pr) <= 1 && std::abs(c - pc) <= 1) local += res.heatmap.at(0, r, c);
    }
  CHECK(local / total >= 0.99);
}

TEST_CASE("out-of-grid keypoints are clamped and flagged") {
  Pose p;
  p.keypoints = {{100.0, 100.0, 2}};
  const BBox box{0, 0, 10, 10};
  auto res = render_heatmap(p, box, 8, 8, 1.0);
  CHECK(res.clamped[0] == 1);
  auto dec = decode_pose(res.heatmap, box);
  CHECK(dec.pose.keypoints[0].x <= 10.0);
}

TEST_CASE("spurious peaks must sit inside the grid") {
  Pose p;
  p.keypoints = {{5.0, 5.0, 2}};
  CHECK_THROWS_AS(render_heatmap(p, {0, 0, 10, 10}, 8, 8, 1.0, {{0, 20.0, 2.0, 0.5}}),
                  std::invalid_argument);
}

TEST_CASE("decode maps a one-hot cell back to its center") {
  Heatmap hm(1, 8, 6);
  hm.at(0, 3, 4) = 1.0f;
  const BBox box{10, 20, 6, 8};
  auto dec = decode_pose(hm, box);
  CHECK(dec.pose.keypoints[0].x == doctest::Approx(10 + (4 + 0.5) / 6.0 * 6.0));
  CHECK(dec.pose.keypoints[0].y == doctest::Approx(20 + (3 + 0.5) / 8.0 * 8.0));
  CHECK(dec.confidences[0] == doctest::Approx(1.0));
  CHECK(dec.flagged[0] == 0);
}

TEST_CASE("decode tie-break picks the lowest row then column") {
  Heatmap hm(1, 6, 6);
  hm.at(0, 0, 0) = 0.7f;
  hm.at(0, 5, 5) = 0.7f;
  const BBox box{0, 0, 6, 6};
  auto dec = decode_pose(hm, box);
  CHECK(dec.pose.keypoints[0].x == doctest::Approx(0.5));
  CHECK(dec.pose.keypoints[0].y == doctest::Approx(0.5));
}

TEST_CASE("decode flags an all-zero channel and falls back to the grid center") {
  Heatmap hm(1, 6, 6);
  const BBox box{0, 0, 12, 12};
  auto dec = decode_pose(hm, box);
  CHECK(dec.flagged[0] == 1);
  CHECK(dec.confidences[0] == 0.0);
  CHECK(dec.pose.keypoints[0].x == doctest::Approx(6.0));
  CHECK(dec.pose.keypoints[0].y == doctest::Approx(6.0));
}

TEST_CASE("decode recovers rendered keypoints within half a cell") {
  auto d = generate_synthetic_video({4, 2, 15}, 3);
  for (const auto& s : d.samples) {
    auto res = render_heatmap(s.gt_pose, s.bbox, 64, 48, 0.8);
    auto dec = decode_pose(res.heatmap, s.bbox);
    const double half_cell_x = s.bbox.w / 48.0 / 2.0;
    const double half_cell_y = s.bbox.h / 64.0 / 2.0;
    const double tol = std::hypot(half_cell_x, half_cell_y) + 1e-9;
    for (int k = 0; k < 15; ++k) {
      const double dx = dec.pose.keypoints[k].x - s.gt_pose.keypoints[k].x;
      const double dy = dec.pose.keypoints[k].y - s.gt_pose.keypoints[k].y;
      CHECK(std::hypot(dx, dy) <= tol);
    }
  }
}
