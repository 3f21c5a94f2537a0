#pragma once

#include <vector>

#include "vai/core/tensor.hpp"
#include "vai/data/store.hpp"
#include "vai/keypoint/transporter.hpp"

namespace vai::attention {

struct BinaryMask {
  Tensor values;  // {H,W}, strictly 0 or 1
  float threshold_used = 0.0f;
};

// Decoder output of the heatmap-gated feature, G(psi(o)) * phi(o).
Frame masked_decode(keypoint::TransporterModel& model, const Frame& frame);

// Decoder output of the all-zero feature. Frame-independent for a fixed model;
// this is the bias the counterfactual difference removes.
Frame bias_image(keypoint::TransporterModel& model);

// decode(gated feature) - decode(zero feature), reduced to {H,W} by channel
// mean. Signed; not clipped.
Tensor compute_cde(keypoint::TransporterModel& model, const Frame& frame);

// mask = 1 where cde >= epsilon (inclusive), else 0.
BinaryMask threshold_mask(const Tensor& cde, float epsilon);

Tensor channel_mean(const Frame& frame);  // {H,W,C} -> {H,W}

// Value below which the given fraction of all pooled map entries falls
// (nearest-rank over the sorted pool).
float quantile_value(const std::vector<const Tensor*>& maps, double quantile);

// Pools compute_cde over the given frames and returns the quantile value,
// the default epsilon when none is configured.
float calibrate_epsilon(keypoint::TransporterModel& model,
                        const std::vector<const Frame*>& frames, double quantile);

// Pairs every store frame, in order, with its thresholded CDE mask.
data::MaskedDataset extract_masked_dataset(keypoint::TransporterModel& model,
                                           const data::EpisodeStore& store, float epsilon);

// Intersection over union of two binary {H,W} masks; 1 when both are empty.
double iou(const Tensor& a, const Tensor& b);

}  // namespace vai::attention
