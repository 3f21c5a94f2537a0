#include "vai/attention/cde.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vai/nn/batch.hpp"

namespace vai::attention {

namespace {

// Gated feature for one frame: G(psi(o)) * phi(o), {1,F,g,g}.
Tensor gated_feature(keypoint::TransporterModel& model, const Frame& frame) {
  const Tensor x = nn::to_nchw(frame);
  const Tensor kp = model.keynet_forward(x);
  const Tensor heat = model.render_heatmaps(kp);
  Tensor feat = model.features_forward(x);
  const int f = feat.dim(1), g0 = feat.dim(2), g1 = feat.dim(3);
  for (int c = 0; c < f; ++c)
    for (int i = 0; i < g0; ++i)
      for (int j = 0; j < g1; ++j) feat.at(0, c, i, j) *= heat.at(0, 0, i, j);
  return feat;
}

Tensor zero_feature(const keypoint::TransporterModel& model) {
  const auto& cfg = model.config();
  return Tensor({1, cfg.feature_channels, cfg.grid, cfg.grid});
}

Tensor cde_from_decodes(const Tensor& gated_out, const Tensor& bias_out) {
  const int c = gated_out.dim(1), h = gated_out.dim(2), w = gated_out.dim(3);
  Tensor cde({h, w});
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      float acc = 0.0f;
      for (int ch = 0; ch < c; ++ch) acc += gated_out.at(0, ch, i, j) - bias_out.at(0, ch, i, j);
      cde.at(i, j) = acc / static_cast<float>(c);
    }
  return cde;
}

}  // namespace

Frame masked_decode(keypoint::TransporterModel& model, const Frame& frame) {
  return nn::from_nchw(model.decode(gated_feature(model, frame)), 0);
}

Frame bias_image(keypoint::TransporterModel& model) {
  return nn::from_nchw(model.decode(zero_feature(model)), 0);
}

Tensor compute_cde(keypoint::TransporterModel& model, const Frame& frame) {
  const Tensor gated_out = model.decode(gated_feature(model, frame));
  const Tensor bias_out = model.decode(zero_feature(model));
  return cde_from_decodes(gated_out, bias_out);
}

BinaryMask threshold_mask(const Tensor& cde, float epsilon) {
  BinaryMask mask;
  mask.threshold_used = epsilon;
  mask.values = Tensor(cde.shape);
  for (std::size_t i = 0; i < cde.numel(); ++i)
    mask.values[i] = cde[i] >= epsilon ? 1.0f : 0.0f;
  return mask;
}

Tensor channel_mean(const Frame& frame) {
  if (frame.rank() != 3)
    throw std::invalid_argument("channel_mean: expected {H,W,C}, got " + frame.shape_str());
  const int h = frame.dim(0), w = frame.dim(1), c = frame.dim(2);
  Tensor out({h, w});
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      float acc = 0.0f;
      for (int ch = 0; ch < c; ++ch) acc += frame.at(i, j, ch);
      out.at(i, j) = acc / static_cast<float>(c);
    }
  return out;
}

float quantile_value(const std::vector<const Tensor*>& maps, double quantile) {
  if (maps.empty()) throw std::invalid_argument("quantile_value: no maps");
  if (quantile < 0.0 || quantile > 1.0)
    throw std::invalid_argument("quantile_value: quantile must be in [0,1]");
  std::vector<float> pool;
  for (const Tensor* m : maps) pool.insert(pool.end(), m->v.begin(), m->v.end());
  const auto k = static_cast<std::size_t>(
      std::llround(quantile * static_cast<double>(pool.size() - 1)));
  std::nth_element(pool.begin(), pool.begin() + static_cast<long>(k), pool.end());
  return pool[k];
}

float calibrate_epsilon(keypoint::TransporterModel& model,
                        const std::vector<const Frame*>& frames, double quantile) {
  std::vector<Tensor> maps;
  maps.reserve(frames.size());
  const Tensor bias_out = model.decode(zero_feature(model));
  for (const Frame* f : frames)
    maps.push_back(cde_from_decodes(model.decode(gated_feature(model, *f)), bias_out));
  std::vector<const Tensor*> ptrs;
  for (const Tensor& m : maps) ptrs.push_back(&m);
  return quantile_value(ptrs, quantile);
}

data::MaskedDataset extract_masked_dataset(keypoint::TransporterModel& model,
                                           const data::EpisodeStore& store, float epsilon) {
  if (store.num_episodes() == 0)
    throw std::invalid_argument("extract_masked_dataset: empty store");
  data::MaskedDataset ds;
  ds.store = store;
  ds.threshold_used = epsilon;
  ds.masks.resize(store.episodes.size());
  const Tensor bias_out = model.decode(zero_feature(model));
  int index = 0;
  for (std::size_t e = 0; e < store.episodes.size(); ++e) {
    for (const Frame& frame : store.episodes[e]) {
      try {
        const Tensor cde = cde_from_decodes(model.decode(gated_feature(model, frame)), bias_out);
        ds.masks[e].push_back(threshold_mask(cde, epsilon).values);
      } catch (const std::exception& ex) {
        throw std::runtime_error("extract_masked_dataset: frame " + std::to_string(index) +
                                 ": " + ex.what());
      }
      ++index;
    }
  }
  return ds;
}

double iou(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "iou");
  long inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const bool pa = a[i] > 0.5f, pb = b[i] > 0.5f;
    inter += pa && pb ? 1 : 0;
    uni += pa || pb ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace vai::attention
