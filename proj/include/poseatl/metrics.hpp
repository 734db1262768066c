#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "poseatl/pose_data.hpp"

namespace poseatl {

// Object Keypoint Similarity. Keypoints with gt visibility 0 are skipped;
// the scale is the gt bbox area.
inline double oks(const Pose& pred, const Pose& gt, const BBox& bbox, const std::vector<double>& kappas) {
  const int K = gt.keypoint_count();
  if (pred.keypoint_count() != K) throw std::invalid_argument("oks: keypoint count mismatch");
  if (static_cast<int>(kappas.size()) != K) throw std::invalid_argument("oks: kappa count mismatch");
  const double s2 = bbox.area();
  if (!(s2 > 0.0)) throw std::invalid_argument("oks: bbox area must be > 0");
  double sum = 0.0;
  int visible = 0;
  for (int k = 0; k < K; ++k) {
    if (gt.keypoints[k].v <= 0) continue;
    const double dx = pred.keypoints[k].x - gt.keypoints[k].x;
    const double dy = pred.keypoints[k].y - gt.keypoints[k].y;
    const double d2 = dx * dx + dy * dy;
    sum += std::exp(-d2 / (2.0 * s2 * kappas[k] * kappas[k]));
    ++visible;
  }
  if (visible == 0) throw std::invalid_argument("oks: no visible ground-truth keypoints");
  return sum / visible;
}

// Per-sample evaluation state for AP. Labeled samples are treated as
// correctly estimated (oks 1, confidence 1).
struct EvalSample {
  int sample_id = 0;
  double oks = 0.0;
  double confidence = 0.0;
  bool labeled = false;
};

// 101-point interpolated average precision at OKS threshold tau. One
// prediction per ground-truth instance, so the recall denominator is the
// number of samples.
inline double ap_at(std::vector<EvalSample> state, double tau) {
  if (state.empty()) throw std::invalid_argument("ap_at: empty state");
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("ap_at: tau must be in (0,1)");
  for (auto& s : state) {
    if (s.labeled) {
      s.oks = 1.0;
      s.confidence = 1.0;
    }
  }
  std::sort(state.begin(), state.end(), [](const EvalSample& a, const EvalSample& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.sample_id < b.sample_id;
  });
  const std::size_t n = state.size();
  std::vector<double> precision(n), recall(n);
  int tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (state[i].oks > tau) ++tp;
    precision[i] = static_cast<double>(tp) / (i + 1);
    recall[i] = static_cast<double>(tp) / n;
  }
  // monotone envelope: best precision achievable at recall >= r
  for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0.0;
  std::size_t idx = 0;
  for (int g = 0; g <= 100; ++g) {
    const double r = g / 100.0;
    while (idx < n && recall[idx] < r - 1e-12) ++idx;
    if (idx < n) ap += precision[idx];
  }
  return ap / 101.0;
}

// AP as a function of labeled fraction.
struct LearningCurve {
  std::vector<std::pair<double, double>> points;  // (labeled_fraction, ap)

  void add(double fraction, double ap) {
    if (!points.empty() && fraction <= points.back().first)
      throw std::invalid_argument("learning curve fractions must be strictly increasing");
    points.push_back({fraction, ap});
  }
};

// Area under the learning curve: trapezoidal integral normalized by the
// fraction span.
inline double alc(const LearningCurve& curve) {
  const auto& pts = curve.points;
  if (pts.size() < 2) throw std::invalid_argument("alc: need at least 2 curve points");
  double area = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double df = pts[i].first - pts[i - 1].first;
    if (df <= 0.0) throw std::invalid_argument("alc: unordered fractions");
    area += 0.5 * (pts[i].second + pts[i - 1].second) * df;
  }
  const double span = pts.back().first - pts.front().first;
  return area / span;
}

// Linear interpolation of a curve at a checkpoint fraction (clamped to ends).
inline double curve_value_at(const LearningCurve& curve, double fraction) {
  const auto& pts = curve.points;
  if (pts.empty()) throw std::invalid_argument("empty curve");
  if (fraction <= pts.front().first) return pts.front().second;
  if (fraction >= pts.back().first) return pts.back().second;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (fraction <= pts[i].first) {
      const double t = (fraction - pts[i - 1].first) / (pts[i].first - pts[i - 1].first);
      return pts[i - 1].second + t * (pts[i].second - pts[i - 1].second);
    }
  }
  return pts.back().second;
}

}  // namespace poseatl
