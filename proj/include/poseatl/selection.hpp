#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "poseatl/common.hpp"

namespace poseatl {

// Inputs to one selection round. `unlabeled` and `labeled` must be disjoint
// and every id must have an embedding.
struct SelectionRequest {
  std::vector<int> unlabeled;
  std::vector<int> labeled;
  int budget = 1;
  std::unordered_map<int, std::vector<double>> embeddings;
  std::unordered_map<int, double> uncertainties;
  double g_c = 0.0;     // estimated generalization, in [0, 1]
  double lambda = 0.0;  // uncertainty weight
  std::uint64_t seed = 0;
};

namespace detail {

inline void validate_request(const SelectionRequest& req, bool need_embeddings) {
  if (req.budget < 1) throw std::invalid_argument("selection: budget must be >= 1");
  if (req.budget > static_cast<int>(req.unlabeled.size()))
    throw std::invalid_argument("selection: budget " + std::to_string(req.budget) +
                                " exceeds unlabeled pool of " + std::to_string(req.unlabeled.size()));
  for (int id : req.unlabeled)
    for (int jd : req.labeled)
      if (id == jd) throw std::invalid_argument("selection: id " + std::to_string(id) + " in both U and L");
  if (need_embeddings) {
    for (int id : req.unlabeled)
      if (!req.embeddings.count(id))
        throw std::invalid_argument("selection: missing embedding for unlabeled id " + std::to_string(id));
    for (int id : req.labeled)
      if (!req.embeddings.count(id))
        throw std::invalid_argument("selection: missing embedding for labeled id " + std::to_string(id));
  }
  if (!(req.g_c >= 0.0 && req.g_c <= 1.0)) throw std::invalid_argument("selection: g_c outside [0,1]");
  if (!(req.lambda >= 0.0)) throw std::invalid_argument("selection: lambda must be >= 0");
}

inline double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

inline double euclid(const std::vector<double>& a, const std::vector<double>& b) {
  return std::sqrt(sq_dist(a, b));
}

inline std::vector<int> sorted_ids(std::vector<int> ids) {
  std::sort(ids.begin(), ids.end());
  return ids;
}

// First pick when L is empty: the greedy min-distance objective is undefined,
// so fall back to the highest uncertainty when scores are supplied, else to a
// seeded random pick.
inline int bootstrap_pick(const SelectionRequest& req, bool use_uncertainty) {
  if (use_uncertainty && !req.uncertainties.empty()) {
    int best_id = -1;
    double best = -std::numeric_limits<double>::infinity();
    for (int id : sorted_ids(req.unlabeled)) {
      const auto it = req.uncertainties.find(id);
      if (it == req.uncertainties.end())
        throw std::invalid_argument("selection: missing uncertainty for id " + std::to_string(id));
      if (it->second > best) {
        best = it->second;
        best_id = id;
      }
    }
    return best_id;
  }
  std::vector<int> ids = sorted_ids(req.unlabeled);
  Rng rng{req.seed, stream_key("bootstrap")};
  rng.shuffle(ids);
  return ids.front();
}

}  // namespace detail

// Uniform sampling without replacement, deterministic by seed.
inline std::vector<int> select_random(const SelectionRequest& req) {
  detail::validate_request(req, false);
  std::vector<int> ids = detail::sorted_ids(req.unlabeled);
  Rng rng{req.seed, stream_key("random-select")};
  rng.shuffle(ids);
  ids.resize(req.budget);
  return ids;
}

// The B highest-uncertainty ids, ties toward the lower id.
inline std::vector<int> select_topk(const SelectionRequest& req) {
  detail::validate_request(req, false);
  std::vector<std::pair<double, int>> ranked;
  ranked.reserve(req.unlabeled.size());
  for (int id : req.unlabeled) {
    const auto it = req.uncertainties.find(id);
    if (it == req.uncertainties.end())
      throw std::invalid_argument("select_topk: missing uncertainty for id " + std::to_string(id));
    ranked.push_back({it->second, id});
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<int> out;
  out.reserve(req.budget);
  for (int i = 0; i < req.budget; ++i) out.push_back(ranked[i].second);
  return out;
}

// k-means(++) on the unlabeled embeddings with k = budget; each centroid
// contributes its nearest still-unclaimed sample.
inline std::vector<int> select_kmeans(const SelectionRequest& req) {
  detail::validate_request(req, true);
  const std::vector<int> ids = detail::sorted_ids(req.unlabeled);
  const int n = static_cast<int>(ids.size());
  const int k = req.budget;
  std::vector<const std::vector<double>*> pts(n);
  for (int i = 0; i < n; ++i) pts[i] = &req.embeddings.at(ids[i]);

  Rng rng{req.seed, stream_key("kmeans")};
  // k-means++ seeding
  std::vector<std::vector<double>> centroids;
  centroids.reserve(k);
  centroids.push_back(*pts[rng.below(static_cast<std::uint64_t>(n))]);
  std::vector<double> d2(n);
  while (static_cast<int>(centroids.size()) < k) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centroids) best = std::min(best, detail::sq_dist(*pts[i], c));
      d2[i] = best;
      total += best;
    }
    if (total <= 0.0) {
      // all points coincide with existing centroids; any point works
      centroids.push_back(*pts[rng.below(static_cast<std::uint64_t>(n))]);
      continue;
    }
    double r = rng.uniform() * total;
    int pick = n - 1;
    for (int i = 0; i < n; ++i) {
      r -= d2[i];
      if (r <= 0.0) {
        pick = i;
        break;
      }
    }
    centroids.push_back(*pts[pick]);
  }

  std::vector<int> assign(n, 0);
  for (int iter = 0; iter < 100; ++iter) {
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      int best_c = 0;
      for (int c = 0; c < k; ++c) {
        const double d = detail::sq_dist(*pts[i], centroids[c]);
        if (d < best) {
          best = d;
          best_c = c;
        }
      }
      assign[i] = best_c;
    }
    double shift = 0.0;
    for (int c = 0; c < k; ++c) {
      std::vector<double> mean(pts[0]->size(), 0.0);
      int count = 0;
      for (int i = 0; i < n; ++i) {
        if (assign[i] != c) continue;
        for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += (*pts[i])[d];
        ++count;
      }
      if (count == 0) continue;  // empty cluster keeps its centroid
      for (double& v : mean) v /= count;
      shift = std::max(shift, detail::euclid(mean, centroids[c]));
      centroids[c] = std::move(mean);
    }
    if (shift < 1e-6) break;
  }

  std::vector<int> out;
  std::vector<char> taken(n, 0);
  for (int c = 0; c < k; ++c) {
    double best = std::numeric_limits<double>::infinity();
    int best_i = -1;
    for (int i = 0; i < n; ++i) {
      if (taken[i]) continue;
      const double d = detail::sq_dist(*pts[i], centroids[c]);
      if (d < best) {
        best = d;
        best_i = i;
      }
    }
    taken[best_i] = 1;
    out.push_back(ids[best_i]);
  }
  return out;
}

namespace detail {

// Shared greedy loop of Core-Set and DUW. score(i) =
// uncertainty_weight * C(i) + distance_weight * min_{j in L+chosen} dist(i, j).
inline std::vector<int> greedy_kcenter(const SelectionRequest& req, double distance_weight,
                                       double uncertainty_weight) {
  validate_request(req, true);
  const std::vector<int> ids = sorted_ids(req.unlabeled);
  const int n = static_cast<int>(ids.size());
  std::vector<double> unc(n, 0.0);
  if (uncertainty_weight != 0.0) {
    for (int i = 0; i < n; ++i) {
      const auto it = req.uncertainties.find(ids[i]);
      if (it == req.uncertainties.end())
        throw std::invalid_argument("selection: missing uncertainty for id " + std::to_string(ids[i]));
      unc[i] = it->second;
    }
  }

  std::vector<double> min_dist(n, std::numeric_limits<double>::infinity());
  std::vector<char> chosen(n, 0);
  auto relax = [&](const std::vector<double>& center) {
    for (int i = 0; i < n; ++i) {
      if (chosen[i]) continue;
      min_dist[i] = std::min(min_dist[i], euclid(req.embeddings.at(ids[i]), center));
    }
  };
  for (int id : req.labeled) relax(req.embeddings.at(id));

  std::vector<int> out;
  out.reserve(req.budget);
  if (req.labeled.empty()) {
    const int first = bootstrap_pick(req, uncertainty_weight > 0.0);
    const int fi = static_cast<int>(std::lower_bound(ids.begin(), ids.end(), first) - ids.begin());
    chosen[fi] = 1;
    out.push_back(first);
    relax(req.embeddings.at(first));
  }
  while (static_cast<int>(out.size()) < req.budget) {
    double best = -std::numeric_limits<double>::infinity();
    int best_i = -1;
    for (int i = 0; i < n; ++i) {
      if (chosen[i]) continue;
      const double score = distance_weight * min_dist[i] + uncertainty_weight * unc[i];
      if (score > best) {
        best = score;
        best_i = i;
      }
    }
    chosen[best_i] = 1;
    out.push_back(ids[best_i]);
    relax(req.embeddings.at(ids[best_i]));
  }
  return out;
}

}  // namespace detail

// Greedy k-center: repeatedly take the unlabeled sample farthest from the
// labeled-plus-chosen set. Ties break toward the lower id (the scan order).
inline std::vector<int> select_coreset(const SelectionRequest& req) {
  return detail::greedy_kcenter(req, 1.0, 0.0);
}

// Core-Set acquisition with dynamic uncertainty weighting: the distance term
// is scaled by (1 - g_c) and each candidate adds g_c * lambda * C(i).
// With lambda = 0 the pick sequence matches select_coreset.
inline std::vector<int> select_duw(const SelectionRequest& req) {
  const double uw = req.g_c * req.lambda;
  if (uw == 0.0 && req.g_c < 1.0) {
    // positive multiple of the plain min-distance objective: same argmaxes
    return detail::greedy_kcenter(req, 1.0, 0.0);
  }
  return detail::greedy_kcenter(req, 1.0 - req.g_c, uw);
}

enum class WeightSchedule { Fixed, Increase, Const, Decrease };

inline const char* to_string(WeightSchedule s) {
  switch (s) {
    case WeightSchedule::Fixed: return "fixed";
    case WeightSchedule::Increase: return "increase";
    case WeightSchedule::Const: return "const";
    case WeightSchedule::Decrease: return "decrease";
  }
  return "?";
}

namespace detail {

inline std::map<int, double> minmax_normalize(const std::map<int, double>& m) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& [id, v] : m) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::map<int, double> out;
  const double span = hi - lo;
  for (const auto& [id, v] : m) out[id] = span > 0.0 ? (v - lo) / span : 0.0;
  return out;
}

}  // namespace detail

// Min-max normalize both criteria over the shared key set, then blend with a
// THC weight driven by the labeled fraction.
inline std::map<int, double> combine_uncertainty(const std::map<int, double>& thc,
                                                 const std::map<int, double>& wpu,
                                                 double labeled_fraction, WeightSchedule schedule,
                                                 double fixed_w = 0.5) {
  if (thc.size() != wpu.size())
    throw std::invalid_argument("combine_uncertainty: key sets differ in size");
  for (const auto& [id, v] : thc)
    if (!wpu.count(id))
      throw std::invalid_argument("combine_uncertainty: id " + std::to_string(id) + " missing from WPU map");
  if (!(labeled_fraction >= 0.0 && labeled_fraction <= 1.0))
    throw std::invalid_argument("combine_uncertainty: labeled_fraction outside [0,1]");

  double w = 0.5;
  switch (schedule) {
    case WeightSchedule::Fixed: w = fixed_w; break;
    case WeightSchedule::Increase: w = labeled_fraction; break;
    case WeightSchedule::Const: w = 0.5; break;
    case WeightSchedule::Decrease: w = 1.0 - labeled_fraction; break;
  }
  if (!(w >= 0.0 && w <= 1.0)) throw std::invalid_argument("combine_uncertainty: weight outside [0,1]");

  const auto thc_n = detail::minmax_normalize(thc);
  const auto wpu_n = detail::minmax_normalize(wpu);
  std::map<int, double> out;
  for (const auto& [id, v] : thc_n) out[id] = w * v + (1.0 - w) * wpu_n.at(id);
  return out;
}

}  // namespace poseatl
