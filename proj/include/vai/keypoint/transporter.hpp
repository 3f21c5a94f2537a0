#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vai/core/rng.hpp"
#include "vai/core/tensor.hpp"
#include "vai/data/store.hpp"
#include "vai/nn/layers.hpp"

namespace vai::keypoint {

struct TransporterConfig {
  int input_size = 84;
  int input_channels = 3;
  int num_keypoints = 4;
  float sigma = 0.1f;          // heatmap std, normalized coordinates
  int grid = 21;               // spatial grid shared by keynet, features, decoder
  int feature_channels = 16;
  int base_channels = 16;
  float softmax_temperature = 1.0f;
};

struct TransporterTrainConfig {
  int steps = 2000;
  int batch = 32;
  float lr = 1e-3f;
  double cross_episode_prob = 0.5;
  // > 0 anneals the heatmap std linearly from this value down to the model
  // sigma over the run. Wide early gates suppress the source branch while the
  // decoder forms; narrow late gates force keypoint specificity.
  float sigma_start = -1.0f;
};

// Keypoint detector (keynet), spatial feature extractor, and reconstruction
// decoder sharing one grid. Backward passes refer to the most recent forward
// of the same subnetwork.
class TransporterModel {
 public:
  explicit TransporterModel(TransporterConfig cfg = {});
  void init(Rng& rng);

  Tensor keynet_forward(const Tensor& x);    // {N,C,H,W} -> keypoints {N,K,2}
  Tensor keynet_backward(const Tensor& dkp);
  Tensor features_forward(const Tensor& x);  // {N,C,H,W} -> {N,F,g,g}
  Tensor features_backward(const Tensor& dfeat);
  Tensor decode(const Tensor& feat);         // {N,F,g,g} -> {N,C,H,W}
  Tensor decode_backward(const Tensor& dy);

  // Heatmaps {N,1,g,g} for a keypoint batch; the renderer's backward refers
  // to its most recent forward.
  Tensor render_heatmaps(const Tensor& keypoints);
  Tensor render_heatmaps_backward(const Tensor& dheat);

  // Replaces the heatmap std; config().sigma reflects the new value.
  void set_sigma(float sigma);

  std::vector<nn::Param*> params();
  std::vector<std::pair<std::string, nn::Param*>> named_params();
  const TransporterConfig& config() const { return cfg_; }

 private:
  TransporterConfig cfg_;
  nn::Conv2d psi1_, psi2_, psi3_;
  nn::ReLU psi_r1_, psi_r2_;
  nn::SpatialSoftmax softargmax_;
  nn::Conv2d phi1_, phi2_, phi3_;
  nn::ReLU phi_r1_, phi_r2_;
  nn::Conv2d dec1_, dec2_, dec3_;
  nn::ReLU dec_r1_, dec_r2_;
  nn::HeatmapRenderer heatmap_;
};

// Eq.-style closed forms, independent of any model.

// keypoints {K,2} in [0,1]^2 -> {grid_h, grid_w}; value at each cell center is
// the max over keypoints of exp(-|x-mu|^2 / (2 sigma^2)).
Tensor render_heatmap(const Tensor& keypoints, int grid_h, int grid_w, float sigma);

// All inputs on one grid: features {g,g,F}, heatmaps {g,g}.
// out = feat_s * (1-heat_s)*(1-heat_t) + feat_t * heat_t, per cell and channel.
Tensor transport_features(const Tensor& feat_s, const Tensor& feat_t,
                          const Tensor& heat_s, const Tensor& heat_t);

// Sum of squared differences, accumulated in double.
double reconstruction_loss(const Tensor& target, const Tensor& reconstruction);

// Inference: detected keypoint locations {K,2} for one frame {H,W,C}.
Tensor detect_keypoints(TransporterModel& model, const Frame& frame);

// Target-frame reconstruction training over sampled frame pairs. Source-branch
// activations are treated as constants; gradients flow through the target
// keynet, target features, and the decoder. Appends per-step loss to loss_log
// when given. Throws DivergenceError on a non-finite loss.
TransporterModel train_transporter(const data::EpisodeStore& store, const TransporterConfig& mcfg,
                                   const TransporterTrainConfig& tcfg, std::uint64_t seed,
                                   std::vector<double>* loss_log = nullptr);

void save_transporter(TransporterModel& model, const std::string& path);
TransporterModel load_transporter(const std::string& path);

}  // namespace vai::keypoint
