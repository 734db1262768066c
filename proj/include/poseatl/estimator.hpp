#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "poseatl/common.hpp"
#include "poseatl/pose_data.hpp"
#include "poseatl/wpu.hpp"

namespace poseatl {

// Stands in for the weights of a pose network: accumulated training effect
// per sample, plus the noise model parameters.
struct EstimatorState {
  std::map<int, double> skill;  // sample_id -> accumulated training effect
  std::uint64_t rng_seed = 0;
  double noise_floor = 0.012;  // fraction of the bbox diagonal
};

struct Prediction {
  Heatmap heatmap;
  Pose pose;                        // decode_pose(heatmap)
  std::vector<double> confidences;  // per keypoint, in [0, 1]
  std::vector<double> embedding;    // hybrid(pose) + frame fraction + bbox center
};

// Error model of the simulated estimator. Displacement fraction
// e = difficulty * d_max * exp(-eta * effect) + noise_floor, where effect
// pools accumulated skill over hidden-feature neighbors. Rendering quality
// (spurious peaks, blur, confidence) degrades with e, so every uncertainty
// criterion has signal by construction.
struct SimConfig {
  int heatmap_h = 64;
  int heatmap_w = 48;
  double sigma0 = 1.6;          // base Gaussian sigma, in cells
  double d_max = 0.18;          // displacement fraction at difficulty 1, zero skill
  double eta = 0.03;            // decay of error per unit training effect
  double gain = 1.0;            // skill added per retraining epoch
  double pool_strength = 0.6;   // weight of the neighbor-averaged skill
  double kernel_scale = 0.22;   // kernel bandwidth as a fraction of the median distance
  double sigma_growth = 3.0;    // c1: sigma multiplier slope in e
  double spurious_rate = 2.0;   // c2: spurious peaks per unit e per keypoint
  double conf_decay = 4.0;      // c3: confidence attenuation slope in e
  double noise_floor = 0.008;
};

class SimulatedEstimator {
 public:
  SimulatedEstimator(const VideoDataset& dataset, SimConfig cfg = {})
      : dataset_(&dataset), cfg_(cfg) {
    dataset.validate();
    double ext_x = 1.0, ext_y = 1.0;
    for (const auto& s : dataset.samples) {
      ext_x = std::max(ext_x, s.bbox.x + s.bbox.w);
      ext_y = std::max(ext_y, s.bbox.y + s.bbox.h);
    }
    ext_x_ = ext_x;
    ext_y_ = ext_y;
    for (const auto& s : dataset.samples) {
      std::vector<double> f = hybrid_feature(s.gt_pose, s.bbox, dataset.keypoint_schema).flat();
      f.push_back(static_cast<double>(s.frame_index) / dataset.frame_count);
      f.push_back(s.bbox.cx() / ext_x_);
      f.push_back(s.bbox.cy() / ext_y_);
      hidden_features_[s.sample_id] = std::move(f);
    }
    bandwidth_ = cfg_.kernel_scale * median_pairwise_distance();
    if (!(bandwidth_ > 0.0)) bandwidth_ = 1.0;
  }

  EstimatorState initial_state(std::uint64_t seed) const {
    EstimatorState st;
    st.rng_seed = seed;
    st.noise_floor = cfg_.noise_floor;
    return st;
  }

  const SimConfig& config() const { return cfg_; }
  double bandwidth() const { return bandwidth_; }
  int embedding_dim() const {
    return HybridFeature::dim_for(dataset_->keypoint_schema.keypoint_count()) + 3;
  }

  // Kernel-weighted pooling of skill over hidden-feature neighbors: the best
  // trained exemplar nearby carries the transfer. Training one sample helps
  // the ones that look like it; training five near-duplicates helps little
  // more than training one.
  double training_effect(const EstimatorState& state, const PoseSample& sample) const {
    double own = 0.0;
    if (const auto it = state.skill.find(sample.sample_id); it != state.skill.end()) own = it->second;
    double neighbor = 0.0;
    const auto& f = hidden_features_.at(sample.sample_id);
    const double inv = 1.0 / (2.0 * bandwidth_ * bandwidth_);
    for (const auto& [id, skill] : state.skill) {
      if (id == sample.sample_id || skill <= 0.0) continue;
      const auto& feat = hidden_features_.at(id);
      double d2 = 0.0;
      for (std::size_t i = 0; i < f.size(); ++i) {
        const double d = f[i] - feat[i];
        d2 += d * d;
      }
      neighbor = std::max(neighbor, skill * std::exp(-d2 * inv));
    }
    return own + cfg_.pool_strength * neighbor;
  }

  // Closed-form error magnitude as a fraction of the bbox diagonal.
  double displacement_fraction(const EstimatorState& state, const PoseSample& sample) const {
    const double effect = training_effect(state, sample);
    return sample.difficulty * cfg_.d_max * std::exp(-cfg_.eta * effect) + state.noise_floor;
  }

  Prediction predict(const EstimatorState& state, const PoseSample& sample) const {
    if (!hidden_features_.count(sample.sample_id))
      throw std::invalid_argument("predict: sample " + std::to_string(sample.sample_id) +
                                  " does not belong to the bound dataset");
    const double effect = training_effect(state, sample);
    const double e = sample.difficulty * cfg_.d_max * std::exp(-cfg_.eta * effect) + state.noise_floor;
    const double diag = sample.bbox.diagonal();
    const int K = sample.gt_pose.keypoint_count();

    // counter rng keyed so retraining (which moves the pooled effect)
    // deterministically re-draws the noise
    const std::uint64_t skill_q = static_cast<std::uint64_t>(std::llround(effect * 1e6));
    Rng rng{state.rng_seed, stream_key("predict"), static_cast<std::uint64_t>(sample.sample_id), skill_q};

    Pose noisy;
    noisy.keypoints.resize(K);
    for (int k = 0; k < K; ++k) {
      const auto& kp = sample.gt_pose.keypoints[k];
      const double ang = rng.uniform(0.0, 6.283185307179586);
      noisy.keypoints[k] = {kp.x + e * diag * std::cos(ang), kp.y + e * diag * std::sin(ang), kp.v};
    }

    const double sigma = cfg_.sigma0 * (1.0 + cfg_.sigma_growth * e);
    const int n_spurious = std::min<int>(3 * K, std::lround(cfg_.spurious_rate * e * K));
    std::vector<SpuriousPeak> spurious;
    spurious.reserve(n_spurious);
    const int H = cfg_.heatmap_h, W = cfg_.heatmap_w;
    for (int i = 0; i < n_spurious; ++i) {
      SpuriousPeak sp;
      sp.k = static_cast<int>(rng.below(static_cast<std::uint64_t>(K)));
      sp.col = rng.uniform(0.5, W - 0.5);
      sp.row = rng.uniform(0.5, H - 0.5);
      sp.weight = rng.uniform(0.25, 0.45);
      spurious.push_back(sp);
    }

    Prediction pred;
    pred.heatmap = render_heatmap(noisy, sample.bbox, H, W, sigma, spurious).heatmap;
    // poor estimates are also less confident: attenuate the whole map
    const double atten = 1.0 / (1.0 + cfg_.conf_decay * e);
    for (double& v : pred.heatmap.values) v *= atten;

    auto decoded = decode_pose(pred.heatmap, sample.bbox);
    pred.pose = std::move(decoded.pose);
    pred.confidences = std::move(decoded.confidences);

    pred.embedding = hybrid_feature(pred.pose, sample.bbox, dataset_->keypoint_schema).flat();
    pred.embedding.push_back(static_cast<double>(sample.frame_index) / dataset_->frame_count);
    pred.embedding.push_back(sample.bbox.cx() / ext_x_);
    pred.embedding.push_back(sample.bbox.cy() / ext_y_);
    return pred;
  }

  // Adds epochs * gain to each trained sample's skill. epochs = 0 is the
  // identity; calls with disjoint sets commute.
  EstimatorState retrain(EstimatorState state, const std::set<int>& train_set, int epochs) const {
    if (epochs < 0) throw std::invalid_argument("retrain: epochs must be >= 0");
    for (int id : train_set)
      if (!hidden_features_.count(id))
        throw std::invalid_argument("retrain: sample " + std::to_string(id) +
                                    " does not belong to the bound dataset");
    if (epochs == 0) return state;  // identity
    for (int id : train_set) state.skill[id] += static_cast<double>(epochs) * cfg_.gain;
    return state;
  }

 private:
  double median_pairwise_distance() const {
    std::vector<const std::vector<double>*> feats;
    feats.reserve(hidden_features_.size());
    for (const auto& [id, f] : hidden_features_) feats.push_back(&f);
    const std::size_t n = feats.size();
    if (n < 2) return 1.0;
    std::vector<double> dists;
    if (n <= 512) {
      dists.reserve(n * (n - 1) / 2);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
          double d2 = 0.0;
          for (std::size_t k = 0; k < feats[i]->size(); ++k) {
            const double d = (*feats[i])[k] - (*feats[j])[k];
            d2 += d * d;
          }
          dists.push_back(std::sqrt(d2));
        }
    } else {
      Rng rng{stream_key("bandwidth"), n};
      for (int trial = 0; trial < 20000; ++trial) {
        const std::size_t i = rng.below(n), j = rng.below(n);
        if (i == j) continue;
        double d2 = 0.0;
        for (std::size_t k = 0; k < feats[i]->size(); ++k) {
          const double d = (*feats[i])[k] - (*feats[j])[k];
          d2 += d * d;
        }
        dists.push_back(std::sqrt(d2));
      }
    }
    std::sort(dists.begin(), dists.end());
    const double med = dists[dists.size() / 2];
    return med > 1e-9 ? med : 1.0;
  }

  const VideoDataset* dataset_;
  SimConfig cfg_;
  double ext_x_ = 1.0, ext_y_ = 1.0;
  std::map<int, std::vector<double>> hidden_features_;
  double bandwidth_ = 1.0;
};

// ---------------------------------------------------------------------------
// Replay store: per-sample binary heatmap + embedding records with a plain
// text index, for running the loop on externally computed estimates.
// ---------------------------------------------------------------------------

namespace replay {

inline std::string record_path(const std::string& dir, int sample_id) {
  return dir + "/sample_" + std::to_string(sample_id) + ".bin";
}

inline std::string index_path(const std::string& dir) { return dir + "/index.txt"; }

inline void write_record(const std::string& dir, int sample_id, const Heatmap& hm,
                         const std::vector<double>& embedding) {
  std::ofstream out(record_path(dir, sample_id), std::ios::binary);
  if (!out) throw std::runtime_error("cannot write replay record for sample " + std::to_string(sample_id));
  const char magic[4] = {'P', 'R', 'R', 'S'};
  out.write(magic, 4);
  auto put_u32 = [&out](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
  put_u32(1);
  put_u32(static_cast<std::uint32_t>(sample_id));
  put_u32(static_cast<std::uint32_t>(hm.K));
  put_u32(static_cast<std::uint32_t>(hm.H));
  put_u32(static_cast<std::uint32_t>(hm.W));
  put_u32(static_cast<std::uint32_t>(embedding.size()));
  std::vector<float> hm32(hm.values.begin(), hm.values.end());
  out.write(reinterpret_cast<const char*>(hm32.data()),
            static_cast<std::streamsize>(hm32.size() * 4));
  std::vector<float> emb(embedding.begin(), embedding.end());
  out.write(reinterpret_cast<const char*>(emb.data()), static_cast<std::streamsize>(emb.size() * 4));
  if (!out) throw std::runtime_error("write failed for replay record " + std::to_string(sample_id));
}

inline void write_index(const std::string& dir, const std::vector<int>& ids) {
  std::ofstream out(index_path(dir));
  if (!out) throw std::runtime_error("cannot write replay index in " + dir);
  std::vector<int> sorted = ids;
  std::sort(sorted.begin(), sorted.end());
  for (int id : sorted) out << id << "\n";
}

inline std::vector<int> read_index(const std::string& dir) {
  std::ifstream in(index_path(dir));
  if (!in) throw std::runtime_error("cannot open replay index in " + dir);
  std::vector<int> ids;
  int id;
  while (in >> id) ids.push_back(id);
  return ids;
}

}  // namespace replay

class ReplayStore {
 public:
  ReplayStore(std::string dir, const VideoDataset& dataset) : dir_(std::move(dir)), dataset_(&dataset) {
    ids_ = replay::read_index(dir_);
  }

  const std::vector<int>& ids() const { return ids_; }

  Prediction predict(int sample_id) const {
    if (!std::binary_search(ids_.begin(), ids_.end(), sample_id))
      throw std::runtime_error("replay: record not found for sample " + std::to_string(sample_id));
    std::ifstream in(replay::record_path(dir_, sample_id), std::ios::binary);
    if (!in) throw std::runtime_error("replay: record not found for sample " + std::to_string(sample_id));
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "PRRS", 4) != 0)
      throw std::runtime_error("replay: bad record magic for sample " + std::to_string(sample_id));
    auto get_u32 = [&in, sample_id]() {
      std::uint32_t v = 0;
      in.read(reinterpret_cast<char*>(&v), 4);
      if (!in) throw std::runtime_error("replay: truncated record for sample " + std::to_string(sample_id));
      return v;
    };
    if (get_u32() != 1) throw std::runtime_error("replay: unsupported record version");
    const int stored_id = static_cast<int>(get_u32());
    if (stored_id != sample_id)
      throw std::runtime_error("replay: record id " + std::to_string(stored_id) +
                               " does not match requested " + std::to_string(sample_id));
    const int K = static_cast<int>(get_u32());
    const int H = static_cast<int>(get_u32());
    const int W = static_cast<int>(get_u32());
    const int D = static_cast<int>(get_u32());
    const int schema_k = dataset_->keypoint_schema.keypoint_count();
    if (K != schema_k)
      throw std::runtime_error("replay: record has K=" + std::to_string(K) +
                               " but the dataset schema has K=" + std::to_string(schema_k));
    Prediction pred;
    pred.heatmap = Heatmap(K, H, W);
    std::vector<float> hm32(pred.heatmap.values.size());
    in.read(reinterpret_cast<char*>(hm32.data()), static_cast<std::streamsize>(hm32.size()) * 4);
    pred.heatmap.values.assign(hm32.begin(), hm32.end());
    std::vector<float> emb(D);
    in.read(reinterpret_cast<char*>(emb.data()), static_cast<std::streamsize>(D) * 4);
    if (!in) throw std::runtime_error("replay: truncated record for sample " + std::to_string(sample_id));
    pred.embedding.assign(emb.begin(), emb.end());

    auto decoded = decode_pose(pred.heatmap, dataset_->sample_by_id(sample_id).bbox);
    pred.pose = std::move(decoded.pose);
    pred.confidences = std::move(decoded.confidences);
    return pred;
  }

 private:
  std::string dir_;
  const VideoDataset* dataset_;
  std::vector<int> ids_;
};

inline Prediction replay_predict(const ReplayStore& store, int sample_id) {
  return store.predict(sample_id);
}

// ---------------------------------------------------------------------------
// The pluggable contract consumed by the ATL loop.
// ---------------------------------------------------------------------------

class EstimatorBackend {
 public:
  virtual ~EstimatorBackend() = default;
  virtual Prediction predict(const PoseSample& sample) const = 0;
  virtual void retrain(const std::set<int>& train_set, int epochs) = 0;
};

class SimulatedBackend final : public EstimatorBackend {
 public:
  SimulatedBackend(const VideoDataset& dataset, SimConfig cfg, std::uint64_t seed)
      : estimator_(dataset, cfg), state_(estimator_.initial_state(seed)) {}

  Prediction predict(const PoseSample& sample) const override { return estimator_.predict(state_, sample); }

  void retrain(const std::set<int>& train_set, int epochs) override {
    state_ = estimator_.retrain(std::move(state_), train_set, epochs);
  }

  const SimulatedEstimator& estimator() const { return estimator_; }
  const EstimatorState& state() const { return state_; }

 private:
  SimulatedEstimator estimator_;
  EstimatorState state_;
};

// Serves stored estimates; retraining does not change them.
class ReplayBackend final : public EstimatorBackend {
 public:
  ReplayBackend(const std::string& dir, const VideoDataset& dataset) : store_(dir, dataset) {}

  Prediction predict(const PoseSample& sample) const override { return store_.predict(sample.sample_id); }
  void retrain(const std::set<int>&, int) override {}

 private:
  ReplayStore store_;
};

}  // namespace poseatl
