#pragma once

#include <string>

#include "vai/core/config.hpp"
#include "vai/core/rng.hpp"
#include "vai/core/tensor.hpp"
#include "vai/data/store.hpp"

namespace vai::invariance {

struct AugmentConfig {
  bool enabled = true;   // false: pairs carry the raw crop, no synthesis
  int crop = 84;         // output size
  int pad = 8;           // zero padding before the synchronized crop

  // foreground transform: per-channel multiplicative jitter and brightness
  float fg_color_jitter = 0.2f;
  float fg_brightness = 0.1f;

  // background replacement op weights; exactly one op is chosen per call,
  // proportional to weight. All zero: the background region is left empty.
  float w_train_background = 1.0f;
  float w_random_color = 1.0f;
  float w_fg_mean = 1.0f;
  float fg_mean_perturb = 0.05f;

  float bg_noise_std = 0.05f;
  int mco_min_boxes = 2, mco_max_boxes = 6;
  int mco_min_size = 6, mco_max_size = 24;

  float p_dark_copy = 0.5f;
  float dark_copy_scale = 0.3f;

  float p_overlay = 0.0f;
  std::string overlay_dir;
  float overlay_alpha = 0.5f;

  static AugmentConfig from_config(const Config& cfg);  // augmentation.* keys
};

struct TrainingPair {
  Frame noisy;         // distractor-augmented input
  Frame clean;         // cropped frame gated by its mask
  Tensor target_mask;  // cropped mask, {h,w}
};

// Which branches fired, for frequency tests.
struct AugmentTrace {
  int replacement_op = -1;  // 0 train_background, 1 random_color, 2 fg_mean
  bool dark_copy = false;
  bool overlay = false;
};

// Pastes n random boxes (uniform count, size, color, position); pixels outside
// all boxes are unchanged.
Frame multicolorout(const Frame& frame, Rng& rng, int min_boxes, int max_boxes,
                    int min_size, int max_size);

// Synthesizes the background region (fg_mask == 0): one replacement op, then
// Gaussian noise and random boxes, then optional darkened-foreground copies
// and image overlays. Pixels with fg_mask == 1 are never modified.
// fg_reference supplies foreground pixel values for the fg-mean and
// dark-copy ops; pass the unmasked frame aligned with fg_mask.
Frame augment_background(const Frame& background, const Tensor& fg_mask, const Frame& train_bg,
                         const AugmentConfig& cfg, Rng& rng,
                         const Frame* fg_reference = nullptr, AugmentTrace* trace = nullptr);

// Synchronized pad-and-crop of frame and mask, then clean = crop * mask and
// noisy = jittered foreground + synthesized background. train_bg is cropped
// with the same offsets before use.
TrainingPair make_training_pair(const Frame& frame, const Tensor& mask, const Frame& train_bg,
                                const AugmentConfig& cfg, Rng& rng);

// Per-pixel median over evenly spaced store frames; approximates the clean
// background plate when the foreground keeps moving.
Frame estimate_background(const data::EpisodeStore& store, int sample_count = 64);

}  // namespace vai::invariance
