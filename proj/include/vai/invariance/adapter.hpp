#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vai/core/rng.hpp"
#include "vai/core/tensor.hpp"
#include "vai/data/store.hpp"
#include "vai/invariance/augment.hpp"
#include "vai/nn/layers.hpp"

namespace vai::invariance {

struct AdapterConfig {
  int input_size = 84;
  int input_channels = 3;
  int base_channels = 16;
  int encoder_channels = 32;  // feature-matching site
  float lambda = 1.0f;        // weight of the feature-matching term
};

struct AdapterTrainConfig {
  int steps = 2000;
  int batch = 16;
  float lr = 1e-3f;
};

// Encoder plus sigmoid mask decoder. The decoder consumes the encoder output;
// backward passes refer to the most recent forward of the same subnetwork.
class AdapterModel {
 public:
  explicit AdapterModel(AdapterConfig cfg = {});
  void init(Rng& rng);

  Tensor encode(const Tensor& x);           // {N,C,H,W} -> {N,E,g,g}
  Tensor encode_backward(const Tensor& dfeat);
  Tensor decode_mask(const Tensor& feat);   // {N,E,g,g} -> {N,1,H,W}, in (0,1)
  Tensor decode_mask_backward(const Tensor& dy);

  Tensor predict_mask(const Frame& frame);  // {H,W}

  std::vector<nn::Param*> params();
  std::vector<std::pair<std::string, nn::Param*>> named_params();
  const AdapterConfig& config() const { return cfg_; }

 private:
  AdapterConfig cfg_;
  nn::Conv2d enc1_, enc2_, enc3_;
  nn::ReLU enc_r1_, enc_r2_;
  nn::Conv2d dec1_, dec2_, dec3_;
  nn::ReLU dec_r1_, dec_r2_;
  nn::Sigmoid dec_sig_;
};

// |mask_pred - target|^2 + lambda |feat_s - feat_t|^2, both sums of squares
// accumulated in double. Shapes must match pairwise up to a leading
// singleton batch/channel on the prediction.
double adapter_loss(const Tensor& mask_pred, const Tensor& target_mask,
                    const Tensor& feat_s, const Tensor& feat_t, float lambda);

// Runs the model on pair.noisy and pair.clean and evaluates the loss above.
double adapter_loss(AdapterModel& model, const TrainingPair& pair);

// Trains on augmented pairs drawn uniformly from the dataset. The encoder
// sees noisy and clean concatenated in one batch, so gradients flow through
// both feature branches. Throws DivergenceError on a non-finite loss.
// The optional logs receive, per step, the total loss and its mask and
// feature terms (the latter before the lambda weight).
AdapterModel train_adapter(const data::MaskedDataset& dataset, const AugmentConfig& acfg,
                           const AdapterConfig& mcfg, const AdapterTrainConfig& tcfg,
                           std::uint64_t seed, std::vector<double>* loss_log = nullptr,
                           std::vector<double>* mask_term_log = nullptr,
                           std::vector<double>* feat_term_log = nullptr);

// Deployment: frame gated by its predicted mask, pixelwise.
Frame adapt_observation(AdapterModel& model, const Frame& frame);

void save_adapter(AdapterModel& model, const std::string& path);
AdapterModel load_adapter(const std::string& path);

}  // namespace vai::invariance
