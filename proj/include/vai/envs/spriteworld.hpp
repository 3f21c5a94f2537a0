#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>

#include "vai/core/rng.hpp"
#include "vai/core/tensor.hpp"

namespace vai::envs {

// Two-link articulated sprite anchored at the arena center, reaching for a
// per-episode target. Deterministic dynamics, exact (non-antialiased)
// rendering, and an exact foreground mask oracle.
struct SpriteWorldConfig {
  int size = 84;
  int episode_len = 100;       // env ticks per episode
  std::string texture = "grid";
  float link1_len = 0.26f;     // normalized units; anchor at (0.5, 0.5)
  float link2_len = 0.20f;
  float link1_width_px = 9.0f;
  float link2_width_px = 7.0f;
  float tip_radius_px = 4.5f;
  float target_radius_px = 5.0f;
  float omega_max = 0.2f;      // rad per tick at |action| = 1
  float damping = 0.5f;        // velocity smoothing factor
  float target_radius_lo = 0.18f;  // target distance range from the anchor
  float target_radius_hi = 0.42f;
  float success_eps = 0.08f;
  bool render_foreground = true;   // false: empty arena (background only)
};

struct SpriteWorldState {
  float theta1 = 0.0f;   // absolute angle of link 1
  float theta2 = 0.0f;   // angle of link 2 relative to link 1
  float vel1 = 0.0f;
  float vel2 = 0.0f;
  float target_x = 0.5f;
  float target_y = 0.5f;
  int step = 0;
};

using Action = std::array<float, 2>;

class SpriteWorld {
 public:
  explicit SpriteWorld(SpriteWorldConfig cfg = {});

  std::pair<SpriteWorldState, Frame> reset(std::uint64_t seed);

  struct StepResult {
    SpriteWorldState state;
    Frame frame;
    double reward = 0.0;
    bool done = false;
  };
  StepResult step(const SpriteWorldState& state, const Action& action);

  Frame render(const SpriteWorldState& state) const;
  // Exact binary mask {H,W} of every rendered foreground pixel.
  Tensor ground_truth_mask(const SpriteWorldState& state) const;

  // Named built-in ("grid", "black", "white", "noise", "stripes", "checker",
  // "solid:R,G,B") or a path to a PPM image (tiled if smaller than the arena).
  void set_texture(const std::string& name_or_path);
  void set_texture_image(const Frame& image, const std::string& id);
  const std::string& texture_id() const { return texture_id_; }

  Frame background() const { return background_; }

  std::pair<float, float> tip_position(const SpriteWorldState& state) const;
  double tip_target_distance(const SpriteWorldState& state) const;
  bool success(const SpriteWorldState& state) const;

  int action_dim() const { return 2; }
  const SpriteWorldConfig& config() const { return cfg_; }

  // instrumentation
  int last_render_foreground_pixels() const { return last_fg_pixels_; }
  long action_clamp_count() const { return clamp_count_; }

  static constexpr const char* kEnvironmentId = "spriteworld";

 private:
  void render_into(const SpriteWorldState& state, Frame& frame, Tensor* mask) const;

  SpriteWorldConfig cfg_;
  Frame background_;
  std::string texture_id_;
  mutable int last_fg_pixels_ = 0;
  long clamp_count_ = 0;
};

}  // namespace vai::envs
