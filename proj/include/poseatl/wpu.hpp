#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "poseatl/common.hpp"
#include "poseatl/pose_data.hpp"

namespace poseatl {

// Scale- and rotation-robust pose descriptor: per-keypoint distance to the
// pose center of gravity (normalized by the bbox diagonal) plus cos/sin of
// eight joint angles.
struct HybridFeature {
  std::vector<double> cg;      // K entries, >= 0
  std::vector<double> angles;  // 16 entries: (cos, sin) x 8

  std::vector<double> flat() const {
    std::vector<double> v = cg;
    v.insert(v.end(), angles.begin(), angles.end());
    return v;
  }
  static int dim_for(int K) { return K + 16; }
};

namespace detail {

// The eight angle joints and the far ends of their adjacent bone pair,
// by schema name. Angle at `joint` between joint->a and joint->b.
struct AngleSpec {
  const char* joint;
  const char* a;
  const char* b;
};

inline const AngleSpec kAngleSpecs[8] = {
    {"left_shoulder", "left_elbow", "left_hip"},
    {"right_shoulder", "right_elbow", "right_hip"},
    {"left_elbow", "left_shoulder", "left_wrist"},
    {"right_elbow", "right_shoulder", "right_wrist"},
    {"left_hip", "left_shoulder", "left_knee"},
    {"right_hip", "right_shoulder", "right_knee"},
    {"left_knee", "left_hip", "left_ankle"},
    {"right_knee", "right_hip", "right_ankle"},
};

}  // namespace detail

inline HybridFeature hybrid_feature(const Pose& pose, const BBox& bbox, const KeypointSchema& schema) {
  const int K = pose.keypoint_count();
  if (K != schema.keypoint_count())
    throw std::invalid_argument("hybrid_feature: pose/schema keypoint count mismatch");
  const double diag = bbox.diagonal();
  if (!(diag > 0.0)) throw std::invalid_argument("hybrid_feature: bbox diagonal must be > 0");

  double cgx = 0.0, cgy = 0.0;
  int visible = 0;
  for (const auto& kp : pose.keypoints) {
    if (kp.v <= 0) continue;
    cgx += kp.x;
    cgy += kp.y;
    ++visible;
  }
  if (visible == 0) throw std::invalid_argument("hybrid_feature: no visible keypoints");
  cgx /= visible;
  cgy /= visible;

  HybridFeature f;
  f.cg.assign(K, 0.0);
  for (int k = 0; k < K; ++k) {
    const auto& kp = pose.keypoints[k];
    if (kp.v <= 0) continue;
    f.cg[k] = std::hypot(kp.x - cgx, kp.y - cgy) / diag;
  }

  f.angles.assign(16, 0.0);
  for (int a = 0; a < 8; ++a) {
    const auto& spec = detail::kAngleSpecs[a];
    double cos_t = 1.0, sin_t = 0.0;  // identity angle when undefined
    const int j = schema.index_of(spec.joint);
    const int ia = schema.index_of(spec.a);
    const int ib = schema.index_of(spec.b);
    if (j >= 0 && ia >= 0 && ib >= 0 && pose.keypoints[j].v > 0 && pose.keypoints[ia].v > 0 &&
        pose.keypoints[ib].v > 0) {
      const double ux = pose.keypoints[ia].x - pose.keypoints[j].x;
      const double uy = pose.keypoints[ia].y - pose.keypoints[j].y;
      const double vx = pose.keypoints[ib].x - pose.keypoints[j].x;
      const double vy = pose.keypoints[ib].y - pose.keypoints[j].y;
      const double nu = std::hypot(ux, uy), nv = std::hypot(vx, vy);
      if (nu > 1e-12 && nv > 1e-12) {
        const double c = std::clamp((ux * vx + uy * vy) / (nu * nv), -1.0, 1.0);
        const double t = std::acos(c);  // interior angle in [0, pi]
        cos_t = std::cos(t);
        sin_t = std::sin(t);
      }
    }
    f.angles[2 * a] = cos_t;
    f.angles[2 * a + 1] = sin_t;
  }
  return f;
}

struct AeTrainConfig {
  int epochs = 20;
  double lr = 8.0e-4;
  int batch = 0;  // <= 0: full batch up to 256 features, else mini-batch 64
  std::uint64_t seed = 0;
};

struct AeTrainStats {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int epochs_run = 0;
};

// Small fully connected autoencoder: tanh on hidden layers, linear output,
// trained with Adam on mean squared reconstruction error.
class MlpAutoEncoder {
 public:
  MlpAutoEncoder(std::vector<int> widths, std::uint64_t seed) : widths_(std::move(widths)), seed_(seed) {
    if (widths_.size() < 2) throw std::invalid_argument("autoencoder needs at least one layer");
    if (widths_.front() != widths_.back())
      throw std::invalid_argument("autoencoder input and output widths must match");
    std::size_t count = 0;
    for (std::size_t l = 1; l < widths_.size(); ++l)
      count += static_cast<std::size_t>(widths_[l]) * widths_[l - 1] + widths_[l];
    params_.assign(count, 0.0);
    Rng rng{seed, stream_key("ae-init")};
    std::size_t off = 0;
    for (std::size_t l = 1; l < widths_.size(); ++l) {
      const int fan_in = widths_[l - 1];
      const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
      const std::size_t wn = static_cast<std::size_t>(widths_[l]) * fan_in;
      for (std::size_t i = 0; i < wn; ++i) params_[off + i] = rng.uniform(-s, s);
      off += wn + widths_[l];  // biases stay zero
    }
  }

  // Canonical pose-feature autoencoder: (K+16) -> 24 -> 12 -> 8 -> 4 and the
  // mirror image back out.
  static MlpAutoEncoder for_pose_feature(int K, std::uint64_t seed) {
    const int in = HybridFeature::dim_for(K);
    MlpAutoEncoder ae({in, 24, 12, 8, 4, 8, 12, 24, in}, seed);
    if (ae.param_count() > 5000)
      throw std::logic_error("autoencoder exceeds the 5000 parameter budget");
    return ae;
  }

  int input_dim() const { return widths_.front(); }
  int latent_dim() const { return widths_[widths_.size() / 2]; }
  std::size_t param_count() const { return params_.size(); }
  const std::vector<double>& params() const { return params_; }
  std::vector<double>& mutable_params() { return params_; }
  const std::vector<int>& widths() const { return widths_; }
  std::uint64_t seed() const { return seed_; }

  std::vector<double> reconstruct(const std::vector<double>& x) const {
    if (static_cast<int>(x.size()) != input_dim())
      throw std::invalid_argument("autoencoder input dimension mismatch: got " +
                                  std::to_string(x.size()) + ", expected " +
                                  std::to_string(input_dim()));
    std::vector<double> a = x;
    std::size_t off = 0;
    for (std::size_t l = 1; l < widths_.size(); ++l) {
      const int out_n = widths_[l], in_n = widths_[l - 1];
      std::vector<double> z(out_n);
      for (int o = 0; o < out_n; ++o) {
        double acc = params_[off + static_cast<std::size_t>(out_n) * in_n + o];  // bias
        const double* wrow = &params_[off + static_cast<std::size_t>(o) * in_n];
        for (int i = 0; i < in_n; ++i) acc += wrow[i] * a[i];
        z[o] = acc;
      }
      if (l + 1 < widths_.size())
        for (double& v : z) v = std::tanh(v);
      a = std::move(z);
      off += static_cast<std::size_t>(out_n) * in_n + out_n;
    }
    return a;
  }

  // Mean squared reconstruction error over dimensions.
  double reconstruction_mse(const std::vector<double>& x) const {
    const auto y = reconstruct(x);
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = y[i] - x[i];
      sum += d * d;
    }
    return sum / x.size();
  }

  double mean_loss(const std::vector<std::vector<double>>& xs) const {
    double sum = 0.0;
    for (const auto& x : xs) sum += reconstruction_mse(x);
    return sum / xs.size();
  }

  // Loss and parameter gradient of the mean reconstruction MSE over a batch.
  double loss_and_gradient(const std::vector<std::vector<double>>& batch,
                           std::vector<double>& grad) const {
    grad.assign(params_.size(), 0.0);
    const std::size_t L = widths_.size() - 1;
    double loss = 0.0;
    std::vector<std::vector<double>> acts(L + 1);
    for (const auto& x : batch) {
      // forward, keeping activations
      acts[0] = x;
      std::size_t off = 0;
      for (std::size_t l = 1; l <= L; ++l) {
        const int out_n = widths_[l], in_n = widths_[l - 1];
        acts[l].assign(out_n, 0.0);
        for (int o = 0; o < out_n; ++o) {
          double acc = params_[off + static_cast<std::size_t>(out_n) * in_n + o];
          const double* wrow = &params_[off + static_cast<std::size_t>(o) * in_n];
          for (int i = 0; i < in_n; ++i) acc += wrow[i] * acts[l - 1][i];
          acts[l][o] = (l < L) ? std::tanh(acc) : acc;
        }
        off += static_cast<std::size_t>(out_n) * in_n + out_n;
      }
      const double inv = 1.0 / (static_cast<double>(batch.size()) * widths_.back());
      std::vector<double> delta(widths_.back());
      for (int o = 0; o < widths_.back(); ++o) {
        const double diff = acts[L][o] - x[o];
        loss += diff * diff * inv;
        delta[o] = 2.0 * diff * inv;  // linear output layer
      }
      // backward
      for (std::size_t l = L; l >= 1; --l) {
        const int out_n = widths_[l], in_n = widths_[l - 1];
        std::size_t off_l = 0;
        for (std::size_t m = 1; m < l; ++m)
          off_l += static_cast<std::size_t>(widths_[m]) * widths_[m - 1] + widths_[m];
        for (int o = 0; o < out_n; ++o) {
          const std::size_t wrow = off_l + static_cast<std::size_t>(o) * in_n;
          for (int i = 0; i < in_n; ++i) grad[wrow + i] += delta[o] * acts[l - 1][i];
          grad[off_l + static_cast<std::size_t>(out_n) * in_n + o] += delta[o];
        }
        if (l == 1) break;
        std::vector<double> prev(in_n, 0.0);
        for (int i = 0; i < in_n; ++i) {
          double acc = 0.0;
          for (int o = 0; o < out_n; ++o)
            acc += params_[off_l + static_cast<std::size_t>(o) * in_n + i] * delta[o];
          prev[i] = acc * (1.0 - acts[l - 1][i] * acts[l - 1][i]);  // tanh'
        }
        delta = std::move(prev);
      }
    }
    return loss;
  }

  AeTrainStats train(const std::vector<std::vector<double>>& features, const AeTrainConfig& cfg) {
    if (features.empty()) throw std::invalid_argument("ae train: need at least one feature");
    if (!(cfg.lr > 0.0)) throw std::invalid_argument("ae train: lr must be > 0");
    if (cfg.epochs < 0) throw std::invalid_argument("ae train: epochs must be >= 0");
    for (const auto& f : features)
      if (static_cast<int>(f.size()) != input_dim())
        throw std::invalid_argument("ae train: feature dimension mismatch");

    AeTrainStats stats;
    stats.initial_loss = mean_loss(features);
    if (cfg.epochs == 0) {
      stats.final_loss = stats.initial_loss;
      return stats;
    }

    const int n = static_cast<int>(features.size());
    const int batch_size = cfg.batch > 0 ? std::min(cfg.batch, n) : (n <= 256 ? n : 64);

    std::vector<double> m(params_.size(), 0.0), v(params_.size(), 0.0), grad;
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long step = 0;
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      if (batch_size < n) {
        Rng rng{cfg.seed, stream_key("ae-shuffle"), static_cast<std::uint64_t>(epoch)};
        rng.shuffle(order);
      }
      for (int start = 0; start < n; start += batch_size) {
        const int end = std::min(start + batch_size, n);
        std::vector<std::vector<double>> batch;
        batch.reserve(end - start);
        for (int i = start; i < end; ++i) batch.push_back(features[order[i]]);
        const double loss = loss_and_gradient(batch, grad);
        if (!std::isfinite(loss))
          throw std::runtime_error("ae train: non-finite loss at epoch " + std::to_string(epoch) +
                                   " (lr " + format_double(cfg.lr) + ", batch " +
                                   std::to_string(batch_size) + ")");
        ++step;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
        for (std::size_t i = 0; i < params_.size(); ++i) {
          m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
          v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
          params_[i] -= cfg.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
        }
      }
    }
    stats.final_loss = mean_loss(features);
    stats.epochs_run = cfg.epochs;
    return stats;
  }

  // Checkpoint: header (widths, seed) + flat float32 parameter array.
  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    const char magic[4] = {'P', 'A', 'A', 'E'};
    out.write(magic, 4);
    auto put_u32 = [&out](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
    put_u32(1);  // version
    put_u32(static_cast<std::uint32_t>(widths_.size()));
    for (int w : widths_) put_u32(static_cast<std::uint32_t>(w));
    out.write(reinterpret_cast<const char*>(&seed_), 8);
    put_u32(static_cast<std::uint32_t>(params_.size()));
    std::vector<float> f32(params_.begin(), params_.end());
    out.write(reinterpret_cast<const char*>(f32.data()), static_cast<std::streamsize>(f32.size() * 4));
    if (!out) throw std::runtime_error("write failed: " + path);
  }

  static MlpAutoEncoder load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "PAAE", 4) != 0)
      throw std::runtime_error("bad checkpoint magic in " + path);
    auto get_u32 = [&in, &path]() {
      std::uint32_t v = 0;
      in.read(reinterpret_cast<char*>(&v), 4);
      if (!in) throw std::runtime_error("truncated checkpoint " + path);
      return v;
    };
    if (get_u32() != 1) throw std::runtime_error("unsupported checkpoint version in " + path);
    const std::uint32_t nw = get_u32();
    std::vector<int> widths(nw);
    for (auto& w : widths) w = static_cast<int>(get_u32());
    std::uint64_t seed = 0;
    in.read(reinterpret_cast<char*>(&seed), 8);
    const std::uint32_t np = get_u32();
    std::vector<float> f32(np);
    in.read(reinterpret_cast<char*>(f32.data()), static_cast<std::streamsize>(np) * 4);
    if (!in) throw std::runtime_error("truncated checkpoint " + path);
    MlpAutoEncoder ae(widths, seed);
    if (ae.param_count() != np) throw std::runtime_error("checkpoint parameter count mismatch");
    std::copy(f32.begin(), f32.end(), ae.params_.begin());
    return ae;
  }

 private:
  std::vector<int> widths_;
  std::uint64_t seed_ = 0;
  std::vector<double> params_;
};

// Reconstruction error of the pose's hybrid feature under the trained
// autoencoder.
inline double wpu_score(const MlpAutoEncoder& ae, const Pose& pose, const BBox& bbox,
                        const KeypointSchema& schema) {
  return ae.reconstruction_mse(hybrid_feature(pose, bbox, schema).flat());
}

struct PoseWithBox {
  Pose pose;
  BBox bbox;
};

inline std::vector<std::vector<double>> hybrid_features_of(const std::vector<PoseWithBox>& poses,
                                                           const KeypointSchema& schema) {
  std::vector<std::vector<double>> out;
  out.reserve(poses.size());
  for (const auto& p : poses) out.push_back(hybrid_feature(p.pose, p.bbox, schema).flat());
  return out;
}

// Per-cycle retraining on the labeled poses of the query video. An empty
// labeled set leaves the autoencoder unchanged.
inline AeTrainStats ae_retrain_cycle(MlpAutoEncoder& ae, const std::vector<PoseWithBox>& labeled,
                                     const KeypointSchema& schema, const AeTrainConfig& cfg = {}) {
  if (labeled.empty()) return {};
  return ae.train(hybrid_features_of(labeled, schema), cfg);
}

}  // namespace poseatl
