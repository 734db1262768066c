#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "poseatl/common.hpp"

namespace poseatl {

// Visibility follows the three-state convention: 0 = absent, 1 = labeled but
// occluded, 2 = visible. Metrics ignore keypoints with v = 0.
struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  int v = 2;
};

struct Pose {
  std::vector<Keypoint> keypoints;

  int keypoint_count() const { return static_cast<int>(keypoints.size()); }
};

struct BBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double area() const { return w * h; }
  double diagonal() const { return std::sqrt(w * w + h * h); }
  double cx() const { return x + 0.5 * w; }
  double cy() const { return y + 0.5 * h; }
};

// One person instance in one frame.
struct PoseSample {
  int sample_id = 0;
  int frame_index = 0;
  int track_id = 0;
  BBox bbox;
  Pose gt_pose;
  // Hidden scalar consumed by the simulated estimator; not a label.
  double difficulty = 0.5;
};

struct KeypointSchema {
  std::vector<std::string> names;
  std::vector<double> kappas;

  int keypoint_count() const { return static_cast<int>(names.size()); }
  // index of a named joint, -1 if the schema does not have it
  int index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return static_cast<int>(i);
    return -1;
  }
};

// The 15-joint schema used by the synthetic generator, with per-joint OKS
// constants mapped from the MS COCO sigmas.
inline KeypointSchema default_schema() {
  KeypointSchema s;
  s.names = {"nose",       "head_bottom",   "head_top",   "left_shoulder", "right_shoulder",
             "left_elbow", "right_elbow",   "left_wrist", "right_wrist",   "left_hip",
             "right_hip",  "left_knee",     "right_knee", "left_ankle",    "right_ankle"};
  s.kappas = {0.026, 0.035, 0.035, 0.079, 0.079, 0.072, 0.072, 0.062,
              0.062, 0.107, 0.107, 0.087, 0.087, 0.089, 0.089};
  return s;
}

struct VideoDataset {
  std::string video_id;
  int frame_count = 0;
  KeypointSchema keypoint_schema;
  std::vector<PoseSample> samples;

  int sample_count() const { return static_cast<int>(samples.size()); }

  const PoseSample& sample_by_id(int id) const {
    for (const auto& s : samples)
      if (s.sample_id == id) return s;
    throw std::invalid_argument("unknown sample_id " + std::to_string(id));
  }

  void validate() const {
    if (samples.empty()) throw std::invalid_argument("dataset has no samples");
    if (keypoint_schema.keypoint_count() < 2)
      throw std::invalid_argument("keypoint_schema needs at least 2 joints");
    if (keypoint_schema.kappas.size() != keypoint_schema.names.size())
      throw std::invalid_argument("keypoint_schema names/kappas length mismatch");
    for (double k : keypoint_schema.kappas)
      if (!(k > 0.0)) throw std::invalid_argument("keypoint_schema kappa must be > 0");
    std::set<std::pair<int, int>> seen_frame_track;
    std::set<int> seen_ids;
    const int K = keypoint_schema.keypoint_count();
    for (const auto& s : samples) {
      const std::string where = "sample_id " + std::to_string(s.sample_id);
      if (!seen_ids.insert(s.sample_id).second)
        throw std::invalid_argument("duplicate " + where);
      if (s.frame_index < 0 || s.frame_index >= frame_count)
        throw std::invalid_argument(where + ": frame_index " + std::to_string(s.frame_index) +
                                    " outside [0, " + std::to_string(frame_count) + ")");
      if (!seen_frame_track.insert({s.frame_index, s.track_id}).second)
        throw std::invalid_argument(where + ": duplicate (frame " + std::to_string(s.frame_index) +
                                    ", track " + std::to_string(s.track_id) + ")");
      if (!(s.bbox.w > 0.0) || !(s.bbox.h > 0.0))
        throw std::invalid_argument(where + ": bbox must have positive width and height");
      if (s.gt_pose.keypoint_count() != K)
        throw std::invalid_argument(where + ": pose has " +
                                    std::to_string(s.gt_pose.keypoint_count()) +
                                    " keypoints, schema has " + std::to_string(K));
      for (const auto& kp : s.gt_pose.keypoints) {
        if (kp.v < 0 || kp.v > 2) throw std::invalid_argument(where + ": visibility must be 0, 1 or 2");
        if (!std::isfinite(kp.x) || !std::isfinite(kp.y))
          throw std::invalid_argument(where + ": non-finite keypoint");
      }
      if (!(s.difficulty >= 0.0 && s.difficulty <= 1.0))
        throw std::invalid_argument(where + ": difficulty outside [0,1]");
    }
  }
};

// K per-keypoint score grids, row-major [k][row][col].
struct Heatmap {
  int K = 0;
  int H = 0;
  int W = 0;
  std::vector<double> values;

  Heatmap() = default;
  Heatmap(int k, int h, int w) : K(k), H(h), W(w), values(static_cast<std::size_t>(k) * h * w, 0.0) {}

  double& at(int k, int r, int c) { return values[(static_cast<std::size_t>(k) * H + r) * W + c]; }
  double at(int k, int r, int c) const { return values[(static_cast<std::size_t>(k) * H + r) * W + c]; }
  const double* channel(int k) const { return values.data() + static_cast<std::size_t>(k) * H * W; }
  double* channel(int k) { return values.data() + static_cast<std::size_t>(k) * H * W; }
  std::size_t cells_per_channel() const { return static_cast<std::size_t>(H) * W; }
};

// ---------------------------------------------------------------------------
// Dataset file I/O. One JSON document per video; field names are part of the
// on-disk contract.
// ---------------------------------------------------------------------------

inline nlohmann::json dataset_to_json(const VideoDataset& d) {
  nlohmann::json j;
  j["video_id"] = d.video_id;
  j["frame_count"] = d.frame_count;
  j["keypoint_schema"] = {{"names", d.keypoint_schema.names}, {"kappas", d.keypoint_schema.kappas}};
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : d.samples) {
    nlohmann::json js;
    js["sample_id"] = s.sample_id;
    js["frame_index"] = s.frame_index;
    js["track_id"] = s.track_id;
    js["bbox"] = {s.bbox.x, s.bbox.y, s.bbox.w, s.bbox.h};
    nlohmann::json kps = nlohmann::json::array();
    for (const auto& kp : s.gt_pose.keypoints) kps.push_back({kp.x, kp.y, kp.v});
    js["keypoints"] = kps;
    js["difficulty"] = s.difficulty;
    samples.push_back(std::move(js));
  }
  j["samples"] = std::move(samples);
  return j;
}

inline VideoDataset dataset_from_json(const nlohmann::json& j) {
  VideoDataset d;
  try {
    d.video_id = j.at("video_id").get<std::string>();
    d.frame_count = j.at("frame_count").get<int>();
    const auto& schema = j.at("keypoint_schema");
    d.keypoint_schema.names = schema.at("names").get<std::vector<std::string>>();
    d.keypoint_schema.kappas = schema.at("kappas").get<std::vector<double>>();
    for (const auto& js : j.at("samples")) {
      PoseSample s;
      s.sample_id = js.at("sample_id").get<int>();
      s.frame_index = js.at("frame_index").get<int>();
      s.track_id = js.at("track_id").get<int>();
      const auto& bb = js.at("bbox");
      if (bb.size() != 4) throw std::invalid_argument("bbox must have 4 entries");
      s.bbox = {bb[0].get<double>(), bb[1].get<double>(), bb[2].get<double>(), bb[3].get<double>()};
      for (const auto& kp : js.at("keypoints")) {
        if (kp.size() != 3) throw std::invalid_argument("keypoint must be [x, y, v]");
        s.gt_pose.keypoints.push_back({kp[0].get<double>(), kp[1].get<double>(), kp[2].get<int>()});
      }
      if (js.contains("difficulty")) s.difficulty = js.at("difficulty").get<double>();
      d.samples.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("dataset schema violation: ") + e.what());
  }
  d.validate();
  return d;
}

inline void save_dataset(const VideoDataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << dataset_to_json(d).dump(2) << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline VideoDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("parse error in " + path + ": " + e.what());
  }
  return dataset_from_json(j);
}

// ---------------------------------------------------------------------------
// Synthetic videos. Per-track trajectories are sums of low-frequency
// sinusoids, so inter-frame displacement is bounded by construction and the
// temporal-continuity criteria see smooth ground truth.
// ---------------------------------------------------------------------------

struct SynthSpec {
  int frames = 30;
  int tracks = 3;
  int K = 15;
  double image_width = 640.0;
  double image_height = 480.0;
};

namespace detail {

struct LimbOsc {
  double base = 0.0;   // rest angle, radians
  double amp = 0.0;    // oscillation amplitude
  double omega = 0.0;  // radians per frame
  double phase = 0.0;

  double at(int frame) const { return base + amp * std::sin(omega * frame + phase); }
};

// A walking-like figure driven by forward kinematics: torso placed on a
// smooth path, limb angles oscillating slowly.
struct TrackModel {
  double scale = 80.0;  // person height in grid units
  double cx0 = 0.0, cy0 = 0.0;
  double path_ax = 0.0, path_ay = 0.0, path_wx = 0.0, path_wy = 0.0, path_px = 0.0, path_py = 0.0;
  double lean_amp = 0.0, lean_w = 0.0, lean_p = 0.0;
  LimbOsc shoulder[2], elbow[2], hip[2], knee[2];
  double diff_base = 0.5, diff_amp = 0.2, diff_w = 0.2, diff_p = 0.0;

  static TrackModel make(Rng& rng, const SynthSpec& spec) {
    TrackModel m;
    m.scale = rng.uniform(60.0, 100.0);
    const double margin = 0.75 * m.scale;
    m.cx0 = rng.uniform(margin, std::max(margin + 1.0, spec.image_width - margin));
    m.cy0 = rng.uniform(margin, std::max(margin + 1.0, spec.image_height - margin));
    // amplitude * omega stays small so per-frame keypoint steps remain well
    // under 5% of the body diagonal
    m.path_ax = rng.uniform(0.05, 0.25) * m.scale;
    m.path_ay = rng.uniform(0.05, 0.15) * m.scale;
    m.path_wx = rng.uniform(0.015, 0.05);
    m.path_wy = rng.uniform(0.015, 0.05);
    m.path_px = rng.uniform(0.0, 6.28);
    m.path_py = rng.uniform(0.0, 6.28);
    m.lean_amp = rng.uniform(0.0, 0.10);
    m.lean_w = rng.uniform(0.02, 0.06);
    m.lean_p = rng.uniform(0.0, 6.28);
    auto osc = [&rng](double base, double spread, double amp_hi) {
      LimbOsc o;
      o.base = base + rng.uniform(-spread, spread);
      o.amp = rng.uniform(0.05, amp_hi);
      o.omega = rng.uniform(0.04, 0.12);
      o.phase = rng.uniform(0.0, 6.28);
      return o;
    };
    for (int side = 0; side < 2; ++side) {
      // angles measured from straight-down; arms hang, legs stand
      m.shoulder[side] = osc(0.25, 0.15, 0.25);
      m.elbow[side] = osc(0.35, 0.20, 0.30);
      m.hip[side] = osc(0.10, 0.08, 0.20);
      m.knee[side] = osc(0.20, 0.10, 0.25);
    }
    m.diff_base = rng.uniform(0.15, 0.70);
    m.diff_amp = rng.uniform(0.05, 0.25);
    m.diff_w = rng.uniform(0.05, 0.25);
    m.diff_p = rng.uniform(0.0, 6.28);
    return m;
  }

  double difficulty_at(int frame) const {
    return std::clamp(diff_base + diff_amp * std::sin(diff_w * frame + diff_p), 0.0, 1.0);
  }

  // 15-joint pose, PoseTrack layout. `side` 0 = left, 1 = right.
  Pose pose_at(int frame) const {
    const double cx = cx0 + path_ax * std::sin(path_wx * frame + path_px);
    const double cy = cy0 + path_ay * std::sin(path_wy * frame + path_py);
    const double lean = lean_amp * std::sin(lean_w * frame + lean_p);
    const double s = scale;

    const double pelvis_x = cx, pelvis_y = cy;
    const double neck_x = pelvis_x + std::sin(lean) * 0.55 * s;
    const double neck_y = pelvis_y - std::cos(lean) * 0.55 * s;

    auto limb = [](double ox, double oy, double len, double ang) {
      // angles from straight-down, positive swings forward (+x)
      return std::pair<double, double>{ox + len * std::sin(ang), oy + len * std::cos(ang)};
    };

    Pose p;
    p.keypoints.resize(15);
    auto set = [&p](int i, double x, double y) { p.keypoints[i] = {x, y, 2}; };

    set(1, neck_x, neck_y);                                    // head_bottom
    set(0, neck_x + std::sin(lean) * 0.10 * s, neck_y - std::cos(lean) * 0.10 * s);  // nose
    set(2, neck_x + std::sin(lean) * 0.20 * s, neck_y - std::cos(lean) * 0.20 * s);  // head_top

    const double half_shoulder = 0.16 * s;
    const double half_hip = 0.10 * s;
    const double upper_arm = 0.26 * s, forearm = 0.24 * s;
    const double thigh = 0.24 * s, shin = 0.22 * s;

    for (int side = 0; side < 2; ++side) {
      const double dir = side == 0 ? -1.0 : 1.0;  // left joints sit at -x
      const double sx = neck_x + dir * half_shoulder;
      const double sy = neck_y + 0.02 * s;
      const double hx = pelvis_x + dir * half_hip;
      const double hy = pelvis_y;
      const double sign = side == 0 ? 1.0 : -1.0;  // opposite swing phase feel

      const double sh_ang = sign * shoulder[side].at(frame);
      auto [ex, ey] = limb(sx, sy, upper_arm, sh_ang);
      auto [wx, wy] = limb(ex, ey, forearm, sh_ang + sign * elbow[side].at(frame));

      const double hip_ang = -sign * hip[side].at(frame);
      auto [kx, ky] = limb(hx, hy, thigh, hip_ang);
      auto [ax, ay] = limb(kx, ky, shin, hip_ang + sign * knee[side].at(frame));

      const int off = side == 0 ? 0 : 1;
      set(3 + off, sx, sy);    // shoulder
      set(5 + off, ex, ey);    // elbow
      set(7 + off, wx, wy);    // wrist
      set(9 + off, hx, hy);    // hip
      set(11 + off, kx, ky);   // knee
      set(13 + off, ax, ay);   // ankle
    }
    return p;
  }
};

inline BBox tight_bbox(const Pose& p, double margin_frac = 0.10) {
  double min_x = 1e30, min_y = 1e30, max_x = -1e30, max_y = -1e30;
  for (const auto& kp : p.keypoints) {
    if (kp.v == 0) continue;
    min_x = std::min(min_x, kp.x);
    max_x = std::max(max_x, kp.x);
    min_y = std::min(min_y, kp.y);
    max_y = std::max(max_y, kp.y);
  }
  const double w = std::max(max_x - min_x, 1.0);
  const double h = std::max(max_y - min_y, 1.0);
  return {min_x - margin_frac * w, min_y - margin_frac * h, w * (1.0 + 2.0 * margin_frac),
          h * (1.0 + 2.0 * margin_frac)};
}

// Generic smooth point cloud for schemas that are not the 15-joint skeleton.
inline Pose generic_pose_at(int K, int frame, double cx, double cy, double s) {
  Pose p;
  p.keypoints.resize(K);
  for (int k = 0; k < K; ++k) {
    const double base_ang = 6.283185307179586 * k / K;
    const double wobble = 0.3 * std::sin(0.1 * frame + base_ang * 3.0);
    const double r = s * (0.35 + 0.1 * std::sin(0.07 * frame + k));
    p.keypoints[k] = {cx + r * std::cos(base_ang + wobble), cy + r * std::sin(base_ang + wobble), 2};
  }
  return p;
}

}  // namespace detail

// Deterministic in (spec, seed). Ground-truth motion is smooth: per-frame
// keypoint displacement stays well under 5% of the bbox diagonal.
inline VideoDataset generate_synthetic_video(const SynthSpec& spec, std::uint64_t seed) {
  if (spec.frames < 1) throw std::invalid_argument("synth spec: frames must be >= 1");
  if (spec.tracks < 1) throw std::invalid_argument("synth spec: tracks must be >= 1");
  if (spec.K < 2) throw std::invalid_argument("synth spec: K must be >= 2");

  VideoDataset d;
  {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "synth-%llu", static_cast<unsigned long long>(seed));
    d.video_id = buf;
  }
  d.frame_count = spec.frames;
  if (spec.K == 15) {
    d.keypoint_schema = default_schema();
  } else {
    for (int k = 0; k < spec.K; ++k) {
      d.keypoint_schema.names.push_back("joint_" + std::to_string(k));
      d.keypoint_schema.kappas.push_back(0.08);
    }
  }

  int next_id = 0;
  for (int t = 0; t < spec.tracks; ++t) {
    Rng rng{seed, stream_key("track"), static_cast<std::uint64_t>(t)};
    const auto model = detail::TrackModel::make(rng, spec);
    for (int f = 0; f < spec.frames; ++f) {
      PoseSample s;
      s.sample_id = next_id++;
      s.frame_index = f;
      s.track_id = t;
      if (spec.K == 15) {
        s.gt_pose = model.pose_at(f);
      } else {
        const double cx = model.cx0 + model.path_ax * std::sin(model.path_wx * f + model.path_px);
        const double cy = model.cy0 + model.path_ay * std::sin(model.path_wy * f + model.path_py);
        s.gt_pose = detail::generic_pose_at(spec.K, f, cx, cy, model.scale);
      }
      s.bbox = detail::tight_bbox(s.gt_pose);
      s.difficulty = model.difficulty_at(f);
      d.samples.push_back(std::move(s));
    }
  }
  d.validate();
  return d;
}

// ---------------------------------------------------------------------------
// Heatmap rendering and decoding. Keypoints live in image grid-units; the
// bbox crop maps them into heatmap cells and back.
// ---------------------------------------------------------------------------

struct SpuriousPeak {
  int k = 0;       // keypoint channel
  double col = 0;  // continuous heatmap coords
  double row = 0;
  double weight = 0.5;
};

struct RenderResult {
  Heatmap heatmap;
  std::vector<std::uint8_t> clamped;  // per keypoint: true if pushed back into the grid
};

namespace detail {

inline void add_gaussian(Heatmap& hm, int k, double row, double col, double sigma, double amp) {
  const double reach = 3.5 * sigma;
  const int r0 = std::max(0, static_cast<int>(std::floor(row - reach)));
  const int r1 = std::min(hm.H - 1, static_cast<int>(std::ceil(row + reach)));
  const int c0 = std::max(0, static_cast<int>(std::floor(col - reach)));
  const int c1 = std::min(hm.W - 1, static_cast<int>(std::ceil(col + reach)));
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (int r = r0; r <= r1; ++r) {
    const double dy = (r + 0.5) - row;
    for (int c = c0; c <= c1; ++c) {
      const double dx = (c + 0.5) - col;
      const double d2 = dx * dx + dy * dy;
      if (d2 > reach * reach) continue;
      hm.at(k, r, c) += amp * std::exp(-d2 * inv);
    }
  }
}

}  // namespace detail

// Gaussian bump per keypoint at its bbox-normalized location (amplitude 1),
// plus optional spurious bumps. Keypoints with v = 0 leave their channel empty.
inline RenderResult render_heatmap(const Pose& pose, const BBox& bbox, int H, int W, double sigma,
                                   const std::vector<SpuriousPeak>& spurious = {}) {
  if (!(sigma > 0.0)) throw std::invalid_argument("render_heatmap: sigma must be > 0");
  if (H < 1 || W < 1) throw std::invalid_argument("render_heatmap: grid must be at least 1x1");
  const int K = pose.keypoint_count();
  RenderResult res;
  res.heatmap = Heatmap(K, H, W);
  res.clamped.assign(K, 0);

  for (int k = 0; k < K; ++k) {
    const auto& kp = pose.keypoints[k];
    if (kp.v == 0) continue;
    double col = (kp.x - bbox.x) / bbox.w * W;
    double row = (kp.y - bbox.y) / bbox.h * H;
    const double col_cl = std::clamp(col, 0.5, W - 0.5);
    const double row_cl = std::clamp(row, 0.5, H - 0.5);
    if (col_cl != col || row_cl != row) res.clamped[k] = 1;
    detail::add_gaussian(res.heatmap, k, row_cl, col_cl, sigma, 1.0);
  }
  for (const auto& sp : spurious) {
    if (sp.k < 0 || sp.k >= K) throw std::invalid_argument("spurious peak: channel out of range");
    if (sp.col < 0.0 || sp.col > W || sp.row < 0.0 || sp.row > H)
      throw std::invalid_argument("spurious peak: position outside the grid");
    detail::add_gaussian(res.heatmap, sp.k, sp.row, sp.col, sigma, sp.weight);
  }
  return res;
}

struct DecodedPose {
  Pose pose;
  std::vector<double> confidences;       // raw channel max, clamped to [0,1]
  std::vector<std::uint8_t> flagged;     // all-zero channel fallback
};

// Argmax decode: each keypoint is the bbox-mapped center of its channel's
// maximum cell. Ties break toward the lowest row, then lowest column.
inline DecodedPose decode_pose(const Heatmap& hm, const BBox& bbox) {
  if (hm.H < 1 || hm.W < 1) throw std::invalid_argument("decode_pose: empty heatmap");
  DecodedPose out;
  out.pose.keypoints.resize(hm.K);
  out.confidences.assign(hm.K, 0.0);
  out.flagged.assign(hm.K, 0);
  for (int k = 0; k < hm.K; ++k) {
    const double* ch = hm.channel(k);
    const std::size_t n = hm.cells_per_channel();
    double best = 0.0;
    std::size_t best_idx = 0;
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (ch[i] > best) {
        best = ch[i];
        best_idx = i;
        any = true;
      }
    }
    if (!any) {
      // degenerate channel: fall back to the grid center
      out.flagged[k] = 1;
      out.pose.keypoints[k] = {bbox.x + 0.5 * bbox.w, bbox.y + 0.5 * bbox.h, 2};
      out.confidences[k] = 0.0;
      continue;
    }
    const int r = static_cast<int>(best_idx) / hm.W;
    const int c = static_cast<int>(best_idx) % hm.W;
    out.pose.keypoints[k] = {bbox.x + (c + 0.5) / hm.W * bbox.w, bbox.y + (r + 0.5) / hm.H * bbox.h, 2};
    out.confidences[k] = std::clamp(best, 0.0, 1.0);
  }
  return out;
}

}  // namespace poseatl
