#include "vai/policy/wrappers.hpp"

#include <stdexcept>

#include "vai/invariance/augment.hpp"

namespace vai::policy {

Frame weak_augment(const Frame& frame, const WeakAugmentConfig& cfg, Rng& rng) {
  Frame out = frame;
  if (cfg.noise_std > 0.0f)
    for (auto& v : out.v) v = clamp01(v + gaussian(rng, 0.0f, cfg.noise_std));
  if (cfg.mco_max_boxes > 0)
    out = invariance::multicolorout(out, rng, cfg.mco_min_boxes, cfg.mco_max_boxes,
                                    cfg.mco_min_size, cfg.mco_max_size);
  return out;
}

Frame denoise_moving_average(const Frame& frame, DenoiseState& state) {
  if (state.alpha == 0.0f) return frame;
  if (state.running_average.empty()) state.running_average = frame;
  const Frame& avg = state.running_average;
  const int h = frame.dim(0), w = frame.dim(1), c = frame.dim(2);

  std::vector<double> mean(static_cast<std::size_t>(c), 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch) mean[static_cast<std::size_t>(ch)] += avg.at(y, x, ch);
  for (auto& m : mean) m /= static_cast<double>(h) * w;

  Frame out({h, w, c});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch)
        out.at(y, x, ch) = clamp01(frame.at(y, x, ch) - state.alpha * avg.at(y, x, ch) +
                                   static_cast<float>(mean[static_cast<std::size_t>(ch)]));

  for (std::size_t i = 0; i < state.running_average.numel(); ++i)
    state.running_average[i] =
        (1.0f - state.beta) * state.running_average[i] + state.beta * frame[i];
  return out;
}

FrameStack::FrameStack(int k) : k_(k) {
  if (k < 1) throw std::invalid_argument("FrameStack: k must be >= 1");
}

void FrameStack::reset(const Frame& first) {
  window_.clear();
  for (int i = 0; i < k_; ++i) window_.push_back(first);
}

Tensor FrameStack::push(const Frame& frame) {
  if (window_.empty()) {
    reset(frame);
  } else {
    window_.pop_front();
    window_.push_back(frame);
  }
  return current();
}

Tensor FrameStack::current() const {
  if (window_.empty()) throw std::logic_error("FrameStack: no frames pushed");
  const Frame& f0 = window_.front();
  const int h = f0.dim(0), w = f0.dim(1), c = f0.dim(2);
  Tensor out({h, w, c * k_});
  for (int i = 0; i < k_; ++i) {
    const Frame& f = window_[static_cast<std::size_t>(i)];
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int ch = 0; ch < c; ++ch) out.at(y, x, i * c + ch) = f.at(y, x, ch);
  }
  return out;
}

}  // namespace vai::policy
