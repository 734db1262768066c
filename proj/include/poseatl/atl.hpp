#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "poseatl/common.hpp"
#include "poseatl/estimator.hpp"
#include "poseatl/metrics.hpp"
#include "poseatl/pose_data.hpp"
#include "poseatl/selection.hpp"
#include "poseatl/uncertainty.hpp"
#include "poseatl/wpu.hpp"

namespace poseatl {

// Partition of a video's samples during the loop: U unlabeled, L labeled,
// Q the newest annotations, R the misestimated labeled samples.
struct LabelState {
  std::set<int> unlabeled;
  std::set<int> labeled;
  std::set<int> newly_selected;
  std::set<int> misestimated;

  void check_invariants(std::size_t total) const {
    if (unlabeled.size() + labeled.size() != total)
      throw std::logic_error("label state: U and L do not cover the sample set");
    for (int id : labeled)
      if (unlabeled.count(id)) throw std::logic_error("label state: U and L overlap");
    for (int id : newly_selected)
      if (!labeled.count(id)) throw std::logic_error("label state: Q not within L");
    for (int id : misestimated)
      if (!labeled.count(id)) throw std::logic_error("label state: R not within L");
  }
};

// ---------------------------------------------------------------------------
// Retraining schedule and stopping criteria.
// ---------------------------------------------------------------------------

// Estimated generalization: mean OKS over the newly annotated samples.
// Empty Q (cycle 0 before any annotation) counts as 0.
inline double estimate_generalization(const std::vector<double>& oks_on_q) {
  if (oks_on_q.empty()) return 0.0;
  double sum = 0.0;
  for (double v : oks_on_q) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("estimate_generalization: OKS outside [0,1]");
    sum += v;
  }
  return sum / oks_on_q.size();
}

// Retraining epochs for the cycle: alpha * (1 - G_c), rounded, never negative.
inline int compute_epochs(double g_c, double alpha) {
  return static_cast<int>(std::max<long>(0, std::llround(alpha * (1.0 - g_c))));
}

// Labeled samples whose OKS falls strictly below theta + margin.
inline std::set<int> misestimated_set(const std::map<int, double>& labeled_oks, double theta, double margin) {
  std::set<int> out;
  for (const auto& [id, v] : labeled_oks)
    if (v < theta + margin) out.insert(id);
  return out;
}

// Min-error stop: mean OKS over the newly annotated samples exceeds theta.
inline bool sc_min(const std::vector<double>& oks_on_q, double theta) {
  if (oks_on_q.empty()) return false;
  double sum = 0.0;
  for (double v : oks_on_q) sum += v;
  return sum / oks_on_q.size() > theta;
}

// All-samples stop: every labeled sample's OKS exceeds theta.
inline bool sc_all(const std::vector<double>& oks_on_labeled, double theta) {
  if (oks_on_labeled.empty()) return false;
  for (double v : oks_on_labeled)
    if (!(v > theta)) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Run configuration.
// ---------------------------------------------------------------------------

enum class SelectorKind { Random, TopK, KMeans, CoreSet, Duw };

struct CriterionSpec {
  SelectorKind selector = SelectorKind::Duw;
  UncertaintyKind uncertainty = UncertaintyKind::ThcWpu;
};

inline CriterionSpec parse_criterion(const std::string& name) {
  if (name == "random") return {SelectorKind::Random, UncertaintyKind::None};
  if (name == "lc") return {SelectorKind::TopK, UncertaintyKind::LC};
  if (name == "mpe") return {SelectorKind::TopK, UncertaintyKind::MPE};
  if (name == "tpc") return {SelectorKind::TopK, UncertaintyKind::TPC};
  if (name == "thc") return {SelectorKind::TopK, UncertaintyKind::THC};
  if (name == "wpu") return {SelectorKind::TopK, UncertaintyKind::WPU};
  if (name == "thc+wpu") return {SelectorKind::TopK, UncertaintyKind::ThcWpu};
  if (name == "kmeans") return {SelectorKind::KMeans, UncertaintyKind::None};
  if (name == "coreset") return {SelectorKind::CoreSet, UncertaintyKind::None};
  if (name == "thc+duw") return {SelectorKind::Duw, UncertaintyKind::THC};
  if (name == "wpu+duw") return {SelectorKind::Duw, UncertaintyKind::WPU};
  if (name == "thc+wpu+duw" || name == "duw") return {SelectorKind::Duw, UncertaintyKind::ThcWpu};
  throw std::invalid_argument("unknown criterion \"" + name + "\"");
}

inline bool criterion_uses_wpu(const CriterionSpec& spec) {
  return spec.uncertainty == UncertaintyKind::WPU || spec.uncertainty == UncertaintyKind::ThcWpu;
}

struct AeSetup {
  int pretrain_count = 500;
  int pretrain_epochs = 300;
  double pretrain_lr = 1.0e-3;
  int retrain_epochs = 20;
  double retrain_lr = 8.0e-4;
  std::uint64_t seed = 7;
};

enum class StopRule { None, Min, All };

inline const char* to_string(StopRule s) {
  switch (s) {
    case StopRule::None: return "none";
    case StopRule::Min: return "min";
    case StopRule::All: return "all";
  }
  return "?";
}

inline StopRule parse_stop_rule(const std::string& s) {
  if (s == "none") return StopRule::None;
  if (s == "min") return StopRule::Min;
  if (s == "all") return StopRule::All;
  throw std::invalid_argument("unknown stopping criterion \"" + s + "\"");
}

inline WeightSchedule parse_weight_schedule(const std::string& s) {
  if (s == "fixed") return WeightSchedule::Fixed;
  if (s == "increase") return WeightSchedule::Increase;
  if (s == "const") return WeightSchedule::Const;
  if (s == "decrease") return WeightSchedule::Decrease;
  throw std::invalid_argument("unknown weighting schedule \"" + s + "\"");
}

struct AtlConfig {
  std::string criterion = "thc+wpu+duw";
  std::vector<double> schedule = {0.05, 0.05, 0.05, 0.05, 0.10, 0.10, 0.20, 0.20, 0.20};
  double alpha = 250.0;   // epochs scale of the retraining schedule
  double lambda = 0.01;   // uncertainty weight in the DUW acquisition
  double theta = 0.6;     // target OKS
  double margin = 0.05;   // margin above theta for the misestimated set
  StopRule sc = StopRule::None;
  std::uint64_t seed = 0;
  WeightSchedule weighting = WeightSchedule::Const;
  double weighting_fixed_w = 0.5;
  double mpe_rho = 0.1;
  std::vector<double> extra_taus;  // recorded in addition to the standard AP grid
  AeSetup ae;
  SimConfig sim;

  void validate() const {
    parse_criterion(criterion);
    if (schedule.empty()) throw std::invalid_argument("config: empty budget schedule");
    double sum = 0.0;
    for (double f : schedule) {
      if (!(f > 0.0)) throw std::invalid_argument("config: schedule fractions must be > 0");
      sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("config: schedule must sum to 1");
    if (!(alpha >= 1.0)) throw std::invalid_argument("config: alpha must be >= 1");
    if (!(theta > 0.0 && theta < 1.0)) throw std::invalid_argument("config: theta must be in (0,1)");
    if (!(margin >= 0.0)) throw std::invalid_argument("config: margin must be >= 0");
    if (!(lambda >= 0.0)) throw std::invalid_argument("config: lambda must be >= 0");
    for (double t : extra_taus)
      if (!(t > 0.0 && t < 1.0)) throw std::invalid_argument("config: extra tau outside (0,1)");
  }

  std::vector<double> tau_values() const;
};

inline const std::vector<double>& ap_tau_grid() {
  static const std::vector<double> grid = {0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95};
  return grid;
}

inline std::string tau_key(double tau) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.2f", tau);
  return buf;
}

inline std::vector<double> AtlConfig::tau_values() const {
  std::vector<double> taus = ap_tau_grid();
  for (double t : extra_taus) {
    bool dup = false;
    for (double g : taus) dup = dup || tau_key(g) == tau_key(t);
    if (!dup) taus.push_back(t);
  }
  return taus;
}

// ---------------------------------------------------------------------------
// Run log.
// ---------------------------------------------------------------------------

struct CycleRecord {
  int cycle = 0;
  int budget = 0;
  std::vector<int> selected;
  double g_c = 0.0;  // mean OKS over Q under the pre-retraining model
  int epochs = 0;
  int r_size = 0;
  double labeled_fraction = 0.0;      // after this cycle's annotation
  std::map<std::string, double> ap;   // tau -> AP, post-retraining
  double mean_thc_u = 0.0;            // over U at the start of the cycle
  double mean_wpu_u = 0.0;
  double q_mean_oks = 0.0;            // post-retraining, over Q
  double labeled_min_oks = 0.0;       // post-retraining, over L
  double all_min_oks = 0.0;           // post-retraining, over all samples
  bool sc_min_fired = false;
  bool sc_all_fired = false;
  bool sc_fired = false;              // the configured rule
  double wall_time_sec = 0.0;         // diagnostic only; not serialized
};

struct RunLog {
  int schema_version = 1;
  std::string video_id;
  AtlConfig config;
  double initial_ap = 0.0;  // AP@0.6 before any annotation
  std::vector<CycleRecord> cycles;
  LearningCurve curve;  // (labeled fraction, AP@0.6)
  double alc_value = 0.0;
  bool stopped_by_sc = false;
};

inline nlohmann::json runlog_to_json(const RunLog& log) {
  nlohmann::json j;
  j["schema_version"] = log.schema_version;
  j["video_id"] = log.video_id;
  const AtlConfig& c = log.config;
  j["config"] = {{"criterion", c.criterion},
                 {"schedule", c.schedule},
                 {"alpha", c.alpha},
                 {"lambda", c.lambda},
                 {"theta", c.theta},
                 {"margin", c.margin},
                 {"sc", to_string(c.sc)},
                 {"seed", c.seed},
                 {"weighting", to_string(c.weighting)},
                 {"weighting_fixed_w", c.weighting_fixed_w},
                 {"mpe_rho", c.mpe_rho},
                 {"ae",
                  {{"pretrain_count", c.ae.pretrain_count},
                   {"pretrain_epochs", c.ae.pretrain_epochs},
                   {"pretrain_lr", c.ae.pretrain_lr},
                   {"retrain_epochs", c.ae.retrain_epochs},
                   {"retrain_lr", c.ae.retrain_lr},
                   {"seed", c.ae.seed}}},
                 {"heatmap", {{"h", c.sim.heatmap_h}, {"w", c.sim.heatmap_w}}}};
  nlohmann::json cycles = nlohmann::json::array();
  for (const auto& r : log.cycles) {
    nlohmann::json jr;
    jr["cycle"] = r.cycle;
    jr["budget"] = r.budget;
    jr["selected"] = r.selected;
    jr["g_c"] = r.g_c;
    jr["epochs"] = r.epochs;
    jr["r_size"] = r.r_size;
    jr["labeled_fraction"] = r.labeled_fraction;
    jr["ap"] = r.ap;
    jr["mean_thc_u"] = r.mean_thc_u;
    jr["mean_wpu_u"] = r.mean_wpu_u;
    jr["q_mean_oks"] = r.q_mean_oks;
    jr["labeled_min_oks"] = r.labeled_min_oks;
    jr["all_min_oks"] = r.all_min_oks;
    jr["sc_min_fired"] = r.sc_min_fired;
    jr["sc_all_fired"] = r.sc_all_fired;
    jr["sc_fired"] = r.sc_fired;
    cycles.push_back(std::move(jr));
  }
  j["initial_ap"] = log.initial_ap;
  j["cycles"] = std::move(cycles);
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& [f, ap] : log.curve.points) curve.push_back({f, ap});
  j["curve"] = std::move(curve);
  j["alc"] = log.alc_value;
  j["stopped_by_sc"] = log.stopped_by_sc;
  return j;
}

inline void save_runlog(const RunLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << runlog_to_json(log).dump(2) << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

// ---------------------------------------------------------------------------
// The loop.
// ---------------------------------------------------------------------------

// Natural poses for autoencoder pre-training, drawn from the same motion
// model as the synthetic videos.
inline std::vector<PoseWithBox> generate_natural_poses(int count, int K, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("generate_natural_poses: count must be >= 1");
  SynthSpec spec;
  spec.K = K;
  std::vector<PoseWithBox> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    Rng rng{seed, stream_key("pose-bank"), static_cast<std::uint64_t>(i)};
    const auto model = detail::TrackModel::make(rng, spec);
    const int frame = static_cast<int>(rng.below(200));
    Pose pose = K == 15 ? model.pose_at(frame)
                        : detail::generic_pose_at(K, frame, model.cx0, model.cy0, model.scale);
    BBox box = detail::tight_bbox(pose);
    out.push_back({std::move(pose), box});
  }
  return out;
}

inline MlpAutoEncoder pretrain_autoencoder(int K, const AeSetup& setup, const KeypointSchema& schema) {
  MlpAutoEncoder ae = MlpAutoEncoder::for_pose_feature(K, setup.seed);
  const auto bank = generate_natural_poses(setup.pretrain_count, K, setup.seed);
  AeTrainConfig cfg;
  cfg.epochs = setup.pretrain_epochs;
  cfg.lr = setup.pretrain_lr;
  cfg.seed = setup.seed;
  ae.train(hybrid_features_of(bank, schema), cfg);
  return ae;
}

namespace detail {

struct CyclePredictions {
  std::map<int, Prediction> preds;
  std::map<int, NormalizedHeatmap> normalized;
  std::map<int, double> oks_by_id;
  std::map<int, double> thc_by_id;
  std::map<int, double> tpc_by_id;
};

inline CyclePredictions predict_all(const VideoDataset& dataset, const EstimatorBackend& backend,
                                    bool need_thc, bool need_tpc) {
  CyclePredictions out;
  for (const auto& s : dataset.samples) {
    Prediction p = backend.predict(s);
    out.oks_by_id[s.sample_id] = oks(p.pose, s.gt_pose, s.bbox, dataset.keypoint_schema.kappas);
    out.preds[s.sample_id] = std::move(p);
  }
  if (need_thc) {
    for (const auto& s : dataset.samples)
      out.normalized[s.sample_id] = normalize_heatmap(out.preds[s.sample_id].heatmap);
  }
  if (need_thc || need_tpc) {
    // index samples by (track, frame); adjacency means consecutive frames
    std::map<int, std::map<int, const PoseSample*>> tracks;
    for (const auto& s : dataset.samples) tracks[s.track_id][s.frame_index] = &s;
    for (const auto& [track_id, frames] : tracks) {
      // pairwise edge SADs, each computed once
      std::map<int, double> edge_sad;  // keyed by the earlier frame
      if (need_thc) {
        for (auto it = frames.begin(); it != frames.end(); ++it) {
          auto next = std::next(it);
          if (next == frames.end() || next->first != it->first + 1) continue;
          edge_sad[it->first] = heatmap_sad(out.normalized[it->second->sample_id].heatmap,
                                            out.normalized[next->second->sample_id].heatmap);
        }
      }
      for (auto it = frames.begin(); it != frames.end(); ++it) {
        const int f = it->first;
        const PoseSample& s = *it->second;
        const bool has_prev = frames.count(f - 1) > 0;
        const bool has_next = frames.count(f + 1) > 0;
        if (need_thc) {
          double sum = 0.0;
          if (has_prev) sum += edge_sad.at(f - 1);
          if (has_next) sum += edge_sad.at(f);
          if (has_prev != has_next) sum *= 2.0;
          out.thc_by_id[s.sample_id] = sum;
        }
        if (need_tpc) {
          std::optional<Pose> prev, next;
          if (has_prev) prev = out.preds[frames.at(f - 1)->sample_id].pose;
          if (has_next) next = out.preds[frames.at(f + 1)->sample_id].pose;
          out.tpc_by_id[s.sample_id] = tpc_score(prev, out.preds[s.sample_id].pose, next, s.bbox).value;
        }
      }
    }
  }
  return out;
}

inline double mean_over(const std::set<int>& ids, const std::map<int, double>& values) {
  if (ids.empty()) return 0.0;
  double sum = 0.0;
  for (int id : ids) sum += values.at(id);
  return sum / ids.size();
}

}  // namespace detail

// One full active-transfer-learning run over a video. Deterministic given
// the config seeds. `pretrained_ae` lets sweeps share the expensive
// pre-training; when null it is trained here from config.ae.
inline RunLog run_atl(const VideoDataset& dataset, EstimatorBackend& backend, const AtlConfig& config,
                      const MlpAutoEncoder* pretrained_ae = nullptr) {
  config.validate();
  dataset.validate();
  const CriterionSpec crit = parse_criterion(config.criterion);
  const int N = dataset.sample_count();
  const int K = dataset.keypoint_schema.keypoint_count();

  RunLog log;
  log.video_id = dataset.video_id;
  log.config = config;

  MlpAutoEncoder ae = pretrained_ae
                          ? *pretrained_ae
                          : pretrain_autoencoder(K, config.ae, dataset.keypoint_schema);
  if (ae.input_dim() != HybridFeature::dim_for(K))
    throw std::invalid_argument("pretrained autoencoder does not match the dataset keypoint count");

  LabelState labels;
  for (const auto& s : dataset.samples) labels.unlabeled.insert(s.sample_id);

  auto eval_ap = [&](const detail::CyclePredictions& cp, double tau) {
    std::vector<EvalSample> state;
    state.reserve(N);
    for (const auto& s : dataset.samples) {
      const auto& p = cp.preds.at(s.sample_id);
      double conf = 0.0;
      for (double c : p.confidences) conf += c;
      conf /= p.confidences.size();
      state.push_back({s.sample_id, cp.oks_by_id.at(s.sample_id), conf,
                       labels.labeled.count(s.sample_id) > 0});
    }
    return ap_at(std::move(state), tau);
  };

  auto wpu_map = [&](const detail::CyclePredictions& cp) {
    std::map<int, double> m;
    for (const auto& s : dataset.samples)
      m[s.sample_id] = wpu_score(ae, cp.preds.at(s.sample_id).pose, s.bbox, dataset.keypoint_schema);
    return m;
  };

  // initial estimate with the pre-trained model only
  detail::CyclePredictions current = detail::predict_all(dataset, backend, true, true);
  log.initial_ap = eval_ap(current, 0.60);
  log.curve.add(0.0, log.initial_ap);

  double g_prev = 0.0;  // estimate available at selection time
  int labeled_total = 0;

  for (std::size_t cycle = 0; cycle < config.schedule.size(); ++cycle) {
    if (labels.unlabeled.empty()) break;
    const auto t0 = std::chrono::steady_clock::now();
    CycleRecord rec;
    rec.cycle = static_cast<int>(cycle);

    std::map<int, double> wpu_all = wpu_map(current);
    rec.mean_thc_u = detail::mean_over(labels.unlabeled, current.thc_by_id);
    rec.mean_wpu_u = detail::mean_over(labels.unlabeled, wpu_all);

    // budget: rounded fraction of N, final cycle takes the remainder
    int budget;
    if (cycle + 1 == config.schedule.size()) {
      budget = N - labeled_total;
    } else {
      budget = static_cast<int>(std::llround(config.schedule[cycle] * N));
    }
    budget = std::max(budget, 1);
    if (budget > static_cast<int>(labels.unlabeled.size())) {
      std::cerr << "warning: cycle " << cycle << " budget " << budget << " clamped to remaining "
                << labels.unlabeled.size() << " unlabeled samples\n";
      budget = static_cast<int>(labels.unlabeled.size());
    }
    rec.budget = budget;

    // criterion scores over U
    const double labeled_fraction_before = static_cast<double>(labeled_total) / N;
    std::map<int, double> scores;
    switch (crit.uncertainty) {
      case UncertaintyKind::None:
        break;
      case UncertaintyKind::LC:
        for (int id : labels.unlabeled) scores[id] = lc_score(current.preds.at(id).confidences);
        break;
      case UncertaintyKind::MPE:
        for (int id : labels.unlabeled)
          scores[id] = mpe_score(current.normalized.at(id).heatmap, config.mpe_rho);
        break;
      case UncertaintyKind::TPC:
        for (int id : labels.unlabeled) scores[id] = current.tpc_by_id.at(id);
        break;
      case UncertaintyKind::THC:
        for (int id : labels.unlabeled) scores[id] = current.thc_by_id.at(id);
        break;
      case UncertaintyKind::WPU:
        for (int id : labels.unlabeled) scores[id] = wpu_all.at(id);
        break;
      case UncertaintyKind::ThcWpu: {
        std::map<int, double> thc_u, wpu_u;
        for (int id : labels.unlabeled) {
          thc_u[id] = current.thc_by_id.at(id);
          wpu_u[id] = wpu_all.at(id);
        }
        scores = combine_uncertainty(thc_u, wpu_u, labeled_fraction_before, config.weighting,
                                     config.weighting_fixed_w);
        break;
      }
    }

    SelectionRequest req;
    req.unlabeled.assign(labels.unlabeled.begin(), labels.unlabeled.end());
    req.labeled.assign(labels.labeled.begin(), labels.labeled.end());
    req.budget = budget;
    req.g_c = g_prev;
    req.lambda = config.lambda;
    req.seed = mix64(config.seed ^ stream_key("select-cycle") ^ static_cast<std::uint64_t>(cycle));
    if (crit.selector != SelectorKind::Random && crit.selector != SelectorKind::TopK) {
      for (const auto& s : dataset.samples)
        req.embeddings[s.sample_id] = current.preds.at(s.sample_id).embedding;
    }
    // lambda = 0 reduces DUW to plain Core-Set; keep the request identical
    // so the pick sequences match exactly
    if (crit.selector == SelectorKind::Duw && config.lambda > 0.0)
      req.uncertainties.insert(scores.begin(), scores.end());

    std::vector<int> selected;
    switch (crit.selector) {
      case SelectorKind::Random: selected = select_random(req); break;
      case SelectorKind::TopK:
        req.uncertainties.insert(scores.begin(), scores.end());
        selected = select_topk(req);
        break;
      case SelectorKind::KMeans: selected = select_kmeans(req); break;
      case SelectorKind::CoreSet: selected = select_coreset(req); break;
      case SelectorKind::Duw: selected = select_duw(req); break;
    }
    rec.selected = selected;

    // simulated annotation: the oracle hands over ground truth
    labels.newly_selected.clear();
    for (int id : selected) {
      labels.unlabeled.erase(id);
      labels.labeled.insert(id);
      labels.newly_selected.insert(id);
    }
    labeled_total += static_cast<int>(selected.size());
    rec.labeled_fraction = static_cast<double>(labeled_total) / N;

    // generalization estimate on the fresh annotations, pre-retraining model
    std::vector<double> q_oks;
    for (int id : labels.newly_selected) q_oks.push_back(current.oks_by_id.at(id));
    rec.g_c = estimate_generalization(q_oks);
    rec.epochs = compute_epochs(rec.g_c, config.alpha);

    std::map<int, double> labeled_oks;
    for (int id : labels.labeled) labeled_oks[id] = current.oks_by_id.at(id);
    labels.misestimated = misestimated_set(labeled_oks, config.theta, config.margin);
    rec.r_size = static_cast<int>(labels.misestimated.size());
    labels.check_invariants(dataset.samples.size());

    std::set<int> train_set = labels.newly_selected;
    train_set.insert(labels.misestimated.begin(), labels.misestimated.end());
    backend.retrain(train_set, rec.epochs);

    if (criterion_uses_wpu(crit)) {
      std::vector<PoseWithBox> labeled_poses;
      for (int id : labels.labeled) {
        const auto& s = dataset.sample_by_id(id);
        labeled_poses.push_back({s.gt_pose, s.bbox});
      }
      AeTrainConfig rcfg;
      rcfg.epochs = config.ae.retrain_epochs;
      rcfg.lr = config.ae.retrain_lr;
      rcfg.seed = mix64(config.ae.seed ^ stream_key("ae-cycle") ^ static_cast<std::uint64_t>(cycle));
      ae_retrain_cycle(ae, labeled_poses, dataset.keypoint_schema, rcfg);
    }

    // post-retraining estimates drive the evaluation and the stop decision
    current = detail::predict_all(dataset, backend, true, true);
    for (double tau : config.tau_values()) rec.ap[tau_key(tau)] = eval_ap(current, tau);

    std::vector<double> q_oks_post, labeled_oks_post;
    double all_min = 1.0, q_sum = 0.0, labeled_min = 1.0;
    for (int id : labels.newly_selected) {
      q_oks_post.push_back(current.oks_by_id.at(id));
      q_sum += q_oks_post.back();
    }
    for (int id : labels.labeled) {
      labeled_oks_post.push_back(current.oks_by_id.at(id));
      labeled_min = std::min(labeled_min, labeled_oks_post.back());
    }
    for (const auto& [id, v] : current.oks_by_id) all_min = std::min(all_min, v);
    rec.q_mean_oks = q_oks_post.empty() ? 0.0 : q_sum / q_oks_post.size();
    rec.labeled_min_oks = labeled_min;
    rec.all_min_oks = all_min;
    rec.sc_min_fired = sc_min(q_oks_post, config.theta);
    rec.sc_all_fired = sc_all(labeled_oks_post, config.theta);
    rec.sc_fired = config.sc == StopRule::Min   ? rec.sc_min_fired
                   : config.sc == StopRule::All ? rec.sc_all_fired
                                                : false;

    log.curve.add(rec.labeled_fraction, rec.ap.at(tau_key(0.60)));
    rec.wall_time_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log.cycles.push_back(std::move(rec));

    g_prev = log.cycles.back().g_c;
    if (log.cycles.back().sc_fired) {
      log.stopped_by_sc = true;
      break;
    }
  }

  log.alc_value = alc(log.curve);
  return log;
}

// Convenience wrapper for the common case: simulated estimator on a dataset.
inline RunLog run_atl_simulated(const VideoDataset& dataset, const AtlConfig& config,
                                const MlpAutoEncoder* pretrained_ae = nullptr) {
  SimulatedBackend backend(dataset, config.sim, config.seed);
  return run_atl(dataset, backend, config, pretrained_ae);
}

}  // namespace poseatl
