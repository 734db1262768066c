// Independent reference implementations used only by tests. These stay
// deliberately naive (exhaustive scans, long double accumulation) so they
// cannot share a bug with the library code they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <vector>

#include "poseatl/metrics.hpp"
#include "poseatl/pose_data.hpp"

namespace oracles {

// Scalar OKS written from the definition, one keypoint at a time.
inline double oks_reference(const poseatl::Pose& pred, const poseatl::Pose& gt,
                            const poseatl::BBox& bbox, const std::vector<double>& kappas) {
  long double acc = 0.0L;
  long double count = 0.0L;
  const long double s2 = static_cast<long double>(bbox.w) * static_cast<long double>(bbox.h);
  for (std::size_t k = 0; k < gt.keypoints.size(); ++k) {
    if (gt.keypoints[k].v == 0) continue;
    const long double dx = static_cast<long double>(pred.keypoints[k].x) - gt.keypoints[k].x;
    const long double dy = static_cast<long double>(pred.keypoints[k].y) - gt.keypoints[k].y;
    const long double kk = static_cast<long double>(kappas[k]);
    acc += std::exp(-(dx * dx + dy * dy) / (2.0L * s2 * kk * kk));
    count += 1.0L;
  }
  return static_cast<double>(acc / count);
}

// Brute-force 101-point AP: for every grid recall, scan every ranking prefix.
inline double ap_reference(std::vector<poseatl::EvalSample> state, double tau) {
  for (auto& s : state) {
    if (s.labeled) {
      s.oks = 1.0;
      s.confidence = 1.0;
    }
  }
  std::sort(state.begin(), state.end(), [](const auto& a, const auto& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.sample_id < b.sample_id;
  });
  const std::size_t n = state.size();
  double ap = 0.0;
  for (int g = 0; g <= 100; ++g) {
    const double r = g / 100.0;
    double best = 0.0;
    int tp = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (state[i].oks > tau) ++tp;
      const double recall = static_cast<double>(tp) / n;
      const double precision = static_cast<double>(tp) / (i + 1);
      if (recall >= r - 1e-12) best = std::max(best, precision);
    }
    ap += best;
  }
  return ap / 101.0;
}

// --- exhaustive k-center helpers (tiny instances only) ---

inline double euclid(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

// max over U of the distance to the closest center
inline double covering_radius(const std::vector<std::vector<double>>& unlabeled,
                              const std::vector<std::vector<double>>& centers) {
  double radius = 0.0;
  for (const auto& u : unlabeled) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : centers) best = std::min(best, euclid(u, c));
    radius = std::max(radius, best);
  }
  return radius;
}

// optimal covering radius over all B-subsets of U, given forced centers L
inline double optimal_radius(const std::vector<std::vector<double>>& unlabeled,
                             const std::vector<std::vector<double>>& labeled, int budget) {
  const int n = static_cast<int>(unlabeled.size());
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> pick(budget);
  std::function<void(int, int)> rec = [&](int start, int depth) {
    if (depth == budget) {
      std::vector<std::vector<double>> centers = labeled;
      for (int i : pick) centers.push_back(unlabeled[i]);
      best = std::min(best, covering_radius(unlabeled, centers));
      return;
    }
    for (int i = start; i < n; ++i) {
      pick[depth] = i;
      rec(i + 1, depth + 1);
    }
  };
  rec(0, 0);
  return best;
}

// One greedy pick scored straight from the weighted acquisition formula;
// ties go to the lowest id via the ascending scan.
inline int duw_pick_reference(std::vector<int> candidate_ids,
                              const std::map<int, std::vector<double>>& embeddings,
                              const std::map<int, double>& uncertainties,
                              const std::vector<int>& center_ids, double g_c, double lambda) {
  std::sort(candidate_ids.begin(), candidate_ids.end());
  double best = -std::numeric_limits<double>::infinity();
  int best_id = -1;
  for (int id : candidate_ids) {
    double min_term = std::numeric_limits<double>::infinity();
    for (int j : center_ids)
      min_term = std::min(min_term, (1.0 - g_c) * euclid(embeddings.at(id), embeddings.at(j)));
    const double score = min_term + g_c * lambda * uncertainties.at(id);
    if (score > best) {
      best = score;
      best_id = id;
    }
  }
  return best_id;
}

// Spearman rank correlation with average ranks for ties.
inline double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  const std::size_t n = xs.size();
  auto ranks = [n](const std::vector<double>& v) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = (i + j) / 2.0 + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(xs), ry = ranks(ys);
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double num = 0.0, dx = 0.0, dy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    num += (rx[i] - mx) * (ry[i] - my);
    dx += (rx[i] - mx) * (rx[i] - mx);
    dy += (ry[i] - my) * (ry[i] - my);
  }
  if (dx <= 0.0 || dy <= 0.0) return 0.0;
  return num / std::sqrt(dx * dy);
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Central-difference gradient of a scalar function of a parameter vector.
inline std::vector<double> finite_difference_gradient(std::function<double(const std::vector<double>&)> f,
                                                      std::vector<double> params, double step = 1e-5) {
  std::vector<double> grad(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + step;
    const double up = f(params);
    params[i] = saved - step;
    const double down = f(params);
    params[i] = saved;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

}  // namespace oracles
