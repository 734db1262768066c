#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "poseatl/pose_data.hpp"

namespace poseatl {

enum class UncertaintyKind { None, LC, MPE, TPC, THC, WPU, ThcWpu };

struct UncertaintyScore {
  int sample_id = 0;
  double value = 0.0;
  UncertaintyKind criterion = UncertaintyKind::None;
};

struct NormalizedHeatmap {
  Heatmap heatmap;
  std::vector<std::uint8_t> degenerate;  // channels that were all-zero
};

// Scale every channel to sum 1. An all-zero channel becomes uniform and is
// flagged.
inline NormalizedHeatmap normalize_heatmap(const Heatmap& h) {
  NormalizedHeatmap out;
  out.heatmap = h;
  out.degenerate.assign(h.K, 0);
  const std::size_t n = h.cells_per_channel();
  for (int k = 0; k < h.K; ++k) {
    double* ch = out.heatmap.channel(k);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += ch[i];
    if (sum <= 0.0) {
      out.degenerate[k] = 1;
      const double uniform = 1.0 / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) ch[i] = uniform;
    } else {
      const double inv = 1.0 / sum;
      for (std::size_t i = 0; i < n; ++i) ch[i] *= inv;
    }
  }
  return out;
}

// Least confidence: one minus the mean of the per-keypoint raw-max
// confidences.
inline double lc_score(const std::vector<double>& confidences) {
  if (confidences.empty()) throw std::invalid_argument("lc_score: no confidences");
  const double mean = std::accumulate(confidences.begin(), confidences.end(), 0.0) /
                      static_cast<double>(confidences.size());
  return 1.0 - mean;
}

struct LocalPeak {
  int row = 0;
  int col = 0;
  double value = 0.0;
};

// Strict maxima over the 8-neighborhood, admitted at >= rel_threshold of the
// channel max, sorted by value descending. The global maximum is always
// included (plateaus have no strict maximum).
inline std::vector<LocalPeak> find_local_peaks(const double* channel, int H, int W, double rel_threshold) {
  if (!(rel_threshold > 0.0 && rel_threshold < 1.0))
    throw std::invalid_argument("find_local_peaks: threshold must be in (0,1)");
  double max_val = 0.0;
  int max_r = 0, max_c = 0;
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) {
      const double v = channel[r * W + c];
      if (v > max_val) {
        max_val = v;
        max_r = r;
        max_c = c;
      }
    }
  std::vector<LocalPeak> peaks;
  const double admit = rel_threshold * max_val;
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      const double v = channel[r * W + c];
      if (v < admit || v <= 0.0) continue;
      bool strict = true;
      for (int dr = -1; dr <= 1 && strict; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          const int rr = r + dr, cc = c + dc;
          if (rr < 0 || rr >= H || cc < 0 || cc >= W) continue;
          if (channel[rr * W + cc] >= v) {
            strict = false;
            break;
          }
        }
      }
      if (strict) peaks.push_back({r, c, v});
    }
  }
  const bool has_global = std::any_of(peaks.begin(), peaks.end(), [&](const LocalPeak& p) {
    return p.row == max_r && p.col == max_c;
  });
  if (!has_global && max_val > 0.0) peaks.push_back({max_r, max_c, max_val});
  std::sort(peaks.begin(), peaks.end(), [](const LocalPeak& a, const LocalPeak& b) {
    if (a.value != b.value) return a.value > b.value;
    if (a.row != b.row) return a.row < b.row;
    return a.col < b.col;
  });
  return peaks;
}

// Multiple peak entropy: Shannon entropy of the renormalized local-peak
// values, averaged over keypoints. A single-peak channel contributes zero.
inline double mpe_score(const Heatmap& normalized, double rel_threshold = 0.1) {
  double total = 0.0;
  for (int k = 0; k < normalized.K; ++k) {
    const auto peaks = find_local_peaks(normalized.channel(k), normalized.H, normalized.W, rel_threshold);
    if (peaks.size() <= 1) continue;
    double sum = 0.0;
    for (const auto& p : peaks) sum += p.value;
    double ent = 0.0;
    for (const auto& p : peaks) {
      const double q = p.value / sum;
      if (q > 0.0) ent -= q * std::log(q);
    }
    total += ent;
  }
  return total / normalized.K;
}

namespace detail {

inline double pose_shift(const Pose& a, const Pose& b) {
  double sum = 0.0;
  const int K = a.keypoint_count();
  for (int k = 0; k < K; ++k) {
    const double dx = a.keypoints[k].x - b.keypoints[k].x;
    const double dy = a.keypoints[k].y - b.keypoints[k].y;
    sum += std::sqrt(dx * dx + dy * dy);
  }
  return sum;
}

}  // namespace detail

struct TpcResult {
  double value = 0.0;
  bool isolated = false;  // track had no usable neighbor on either side
};

// Temporal pose continuity at frame t of one track: summed keypoint
// displacement to both neighbors, normalized by K times the bbox diagonal.
// A missing neighbor drops its term and doubles the other.
inline TpcResult tpc_score(const std::optional<Pose>& prev, const Pose& current,
                           const std::optional<Pose>& next, const BBox& bbox) {
  const double denom = current.keypoint_count() * bbox.diagonal();
  if (!(denom > 0.0)) throw std::invalid_argument("tpc_score: degenerate bbox");
  const bool has_prev = prev.has_value();
  const bool has_next = next.has_value();
  if (!has_prev && !has_next) return {0.0, true};
  double sum = 0.0;
  if (has_prev) sum += detail::pose_shift(*prev, current);
  if (has_next) sum += detail::pose_shift(current, *next);
  if (!has_prev || !has_next) sum *= 2.0;
  return {sum / denom, false};
}

// Sum of absolute differences between two normalized channels.
inline double channel_sad(const double* a, const double* b, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += std::abs(a[i] - b[i]);
  return sum;
}

// Mean-over-keypoints SAD between two frames' normalized heatmaps.
inline double heatmap_sad(const Heatmap& a, const Heatmap& b) {
  if (a.K != b.K || a.H != b.H || a.W != b.W)
    throw std::invalid_argument("heatmap_sad: dimension mismatch between frames");
  double total = 0.0;
  const std::size_t n = a.cells_per_channel();
  for (int k = 0; k < a.K; ++k) total += channel_sad(a.channel(k), b.channel(k), n);
  return total / a.K;
}

struct ThcResult {
  double value = 0.0;
  bool isolated = false;
};

// Temporal heatmap continuity at frame t: mean-over-keypoints SAD to the
// previous frame plus the same to the next frame, with the missing-neighbor
// rule of tpc_score. Inputs must be normalized heatmaps.
inline ThcResult thc_score(const Heatmap* prev, const Heatmap& current, const Heatmap* next) {
  const bool has_prev = prev != nullptr;
  const bool has_next = next != nullptr;
  if (!has_prev && !has_next) return {0.0, true};
  double sum = 0.0;
  if (has_prev) sum += heatmap_sad(*prev, current);
  if (has_next) sum += heatmap_sad(current, *next);
  if (!has_prev || !has_next) sum *= 2.0;
  return {sum, false};
}

}  // namespace poseatl
