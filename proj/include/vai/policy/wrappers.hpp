#pragma once

#include <deque>

#include "vai/core/rng.hpp"
#include "vai/core/tensor.hpp"

namespace vai::policy {

struct WeakAugmentConfig {
  float noise_std = 0.01f;
  int mco_min_boxes = 0, mco_max_boxes = 2;
  int mco_min_size = 2, mco_max_size = 8;
};

// Light Gaussian pixel noise plus a few small random boxes; training-time only.
Frame weak_augment(const Frame& frame, const WeakAugmentConfig& cfg, Rng& rng);

struct DenoiseState {
  Frame running_average;  // empty until the first frame initializes it
  float alpha = 0.5f;     // subtraction strength; 0 disables the wrapper
  float beta = 0.05f;     // running-average update rate
};

// out = clamp(frame - alpha * avg + mean_color(avg)); avg then moves toward
// the frame at rate beta. alpha == 0 returns the frame untouched.
Frame denoise_moving_average(const Frame& frame, DenoiseState& state);

// Sliding window of the last k frames, channel-concatenated earliest-first.
// Episode starts pad by repeating the first frame.
class FrameStack {
 public:
  explicit FrameStack(int k);

  void reset(const Frame& first);
  Tensor push(const Frame& frame);  // returns the new stack
  Tensor current() const;           // {H,W,C*k}
  int k() const { return k_; }

 private:
  int k_;
  std::deque<Frame> window_;
};

}  // namespace vai::policy
