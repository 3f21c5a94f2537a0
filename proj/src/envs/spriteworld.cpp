#include "vai/envs/spriteworld.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

#include "vai/core/image_io.hpp"

namespace vai::envs {

namespace {

constexpr float kPi = 3.14159265358979323846f;

struct Rgb {
  int r, g, b;
  float rf() const { return static_cast<float>(r) / 255.0f; }
  float gf() const { return static_cast<float>(g) / 255.0f; }
  float bf() const { return static_cast<float>(b) / 255.0f; }
};

constexpr Rgb kLink1{230, 120, 30};
constexpr Rgb kLink2{40, 200, 220};
constexpr Rgb kTip{250, 250, 250};
constexpr Rgb kTarget{220, 40, 50};

void put_pixel(Frame& frame, Tensor* mask, int x, int y, const Rgb& c) {
  frame.at(y, x, 0) = c.rf();
  frame.at(y, x, 1) = c.gf();
  frame.at(y, x, 2) = c.bf();
  if (mask) mask->at(y, x) = 1.0f;
}

// Thick segment rasterizer: a pixel is inside when its center lies within
// half_width of the segment. Endcaps are round.
void draw_segment(Frame& frame, Tensor* mask, float x0, float y0, float x1, float y1,
                  float half_width, const Rgb& c) {
  const int size = frame.dim(0);
  const int lo_x = std::max(0, static_cast<int>(std::floor(std::min(x0, x1) - half_width - 1)));
  const int hi_x = std::min(size - 1, static_cast<int>(std::ceil(std::max(x0, x1) + half_width + 1)));
  const int lo_y = std::max(0, static_cast<int>(std::floor(std::min(y0, y1) - half_width - 1)));
  const int hi_y = std::min(size - 1, static_cast<int>(std::ceil(std::max(y0, y1) + half_width + 1)));
  const float dx = x1 - x0, dy = y1 - y0;
  const float len2 = dx * dx + dy * dy;
  for (int y = lo_y; y <= hi_y; ++y) {
    for (int x = lo_x; x <= hi_x; ++x) {
      const float px = static_cast<float>(x) + 0.5f;
      const float py = static_cast<float>(y) + 0.5f;
      float t = len2 > 0.0f ? ((px - x0) * dx + (py - y0) * dy) / len2 : 0.0f;
      t = std::max(0.0f, std::min(1.0f, t));
      const float cx = x0 + t * dx, cy = y0 + t * dy;
      const float d2 = (px - cx) * (px - cx) + (py - cy) * (py - cy);
      if (d2 <= half_width * half_width) put_pixel(frame, mask, x, y, c);
    }
  }
}

void draw_circle(Frame& frame, Tensor* mask, float cx, float cy, float radius, const Rgb& c) {
  draw_segment(frame, mask, cx, cy, cx, cy, radius, c);
}

Frame make_grid_texture(int size) {
  Frame f({size, size, 3});
  const Rgb base{210, 210, 210}, line{120, 120, 130};
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const bool on_line = (x % 12 < 2) || (y % 12 < 2);
      const Rgb& c = on_line ? line : base;
      f.at(y, x, 0) = c.rf();
      f.at(y, x, 1) = c.gf();
      f.at(y, x, 2) = c.bf();
    }
  return f;
}

Frame make_solid_texture(int size, const Rgb& c) {
  Frame f({size, size, 3});
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      f.at(y, x, 0) = c.rf();
      f.at(y, x, 1) = c.gf();
      f.at(y, x, 2) = c.bf();
    }
  return f;
}

Frame make_noise_texture(int size) {
  // Static texture: fixed stream, same image every episode.
  Rng rng = make_rng(0x5eedf00dULL, 17);
  Frame f({size, size, 3});
  for (auto& v : f.v) v = static_cast<float>(uniform_int(rng, 0, 255)) / 255.0f;
  return f;
}

Frame make_stripes_texture(int size) {
  Frame f({size, size, 3});
  const Rgb a{60, 80, 160}, b{200, 200, 90};
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const Rgb& c = ((x + y) / 6) % 2 == 0 ? a : b;
      f.at(y, x, 0) = c.rf();
      f.at(y, x, 1) = c.gf();
      f.at(y, x, 2) = c.bf();
    }
  return f;
}

Frame make_checker_texture(int size) {
  Frame f({size, size, 3});
  const Rgb a{90, 60, 110}, b{170, 190, 80};
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const Rgb& c = ((x / 8) + (y / 8)) % 2 == 0 ? a : b;
      f.at(y, x, 0) = c.rf();
      f.at(y, x, 1) = c.gf();
      f.at(y, x, 2) = c.bf();
    }
  return f;
}

Frame tile_to_size(const Frame& src, int size) {
  Frame f({size, size, 3});
  const int sh = src.dim(0), sw = src.dim(1);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      for (int c = 0; c < 3; ++c) f.at(y, x, c) = src.at(y % sh, x % sw, c);
  return f;
}

}  // namespace

SpriteWorld::SpriteWorld(SpriteWorldConfig cfg) : cfg_(std::move(cfg)) {
  set_texture(cfg_.texture);
}

void SpriteWorld::set_texture(const std::string& name_or_path) {
  const int s = cfg_.size;
  if (name_or_path == "grid")
    background_ = make_grid_texture(s);
  else if (name_or_path == "black")
    background_ = make_solid_texture(s, Rgb{0, 0, 0});
  else if (name_or_path == "white")
    background_ = make_solid_texture(s, Rgb{255, 255, 255});
  else if (name_or_path == "noise")
    background_ = make_noise_texture(s);
  else if (name_or_path == "stripes")
    background_ = make_stripes_texture(s);
  else if (name_or_path == "checker")
    background_ = make_checker_texture(s);
  else if (name_or_path.rfind("solid:", 0) == 0) {
    int r = 0, g = 0, b = 0;
    if (std::sscanf(name_or_path.c_str() + 6, "%d,%d,%d", &r, &g, &b) != 3)
      throw std::runtime_error("set_texture: bad solid color spec '" + name_or_path + "'");
    background_ = make_solid_texture(s, Rgb{r, g, b});
  } else if (name_or_path.find('/') != std::string::npos ||
             name_or_path.find(".ppm") != std::string::npos) {
    if (!std::filesystem::exists(name_or_path))
      throw std::runtime_error("set_texture: unreadable image: " + name_or_path);
    background_ = tile_to_size(load_ppm(name_or_path), s);
  } else {
    throw std::runtime_error("set_texture: unknown texture '" + name_or_path + "'");
  }
  texture_id_ = name_or_path;
}

void SpriteWorld::set_texture_image(const Frame& image, const std::string& id) {
  if (image.rank() != 3 || image.dim(2) != 3)
    throw std::invalid_argument("set_texture_image: expected {H,W,3}");
  background_ = tile_to_size(image, cfg_.size);
  texture_id_ = id;
}

std::pair<SpriteWorldState, Frame> SpriteWorld::reset(std::uint64_t seed) {
  Rng rng = make_rng(seed, 3);
  SpriteWorldState st;
  st.theta1 = uniform(rng, -kPi, kPi);
  st.theta2 = uniform(rng, -2.4f, 2.4f);
  st.vel1 = 0.0f;
  st.vel2 = 0.0f;
  const float ang = uniform(rng, -kPi, kPi);
  const float rad = uniform(rng, cfg_.target_radius_lo, cfg_.target_radius_hi);
  st.target_x = 0.5f + rad * std::cos(ang);
  st.target_y = 0.5f + rad * std::sin(ang);
  st.step = 0;
  return {st, render(st)};
}

SpriteWorld::StepResult SpriteWorld::step(const SpriteWorldState& state, const Action& action) {
  Action a = action;
  for (auto& x : a) {
    if (x < -1.0f || x > 1.0f) {
      ++clamp_count_;
      x = std::max(-1.0f, std::min(1.0f, x));
    }
  }
  SpriteWorldState st = state;
  st.vel1 = cfg_.damping * st.vel1 + (1.0f - cfg_.damping) * a[0] * cfg_.omega_max;
  st.vel2 = cfg_.damping * st.vel2 + (1.0f - cfg_.damping) * a[1] * cfg_.omega_max;
  st.theta1 += st.vel1;
  st.theta2 += st.vel2;
  // wrap into (-pi, pi]
  auto wrap = [](float t) {
    while (t > kPi) t -= 2.0f * kPi;
    while (t <= -kPi) t += 2.0f * kPi;
    return t;
  };
  st.theta1 = wrap(st.theta1);
  st.theta2 = wrap(st.theta2);
  st.step = state.step + 1;

  StepResult out;
  out.reward = -tip_target_distance(st);
  out.done = st.step >= cfg_.episode_len;
  out.frame = render(st);
  out.state = st;
  return out;
}

std::pair<float, float> SpriteWorld::tip_position(const SpriteWorldState& state) const {
  const float ex = 0.5f + cfg_.link1_len * std::cos(state.theta1);
  const float ey = 0.5f + cfg_.link1_len * std::sin(state.theta1);
  const float a2 = state.theta1 + state.theta2;
  return {ex + cfg_.link2_len * std::cos(a2), ey + cfg_.link2_len * std::sin(a2)};
}

double SpriteWorld::tip_target_distance(const SpriteWorldState& state) const {
  const auto [tx, ty] = tip_position(state);
  const double dx = tx - state.target_x, dy = ty - state.target_y;
  return std::sqrt(dx * dx + dy * dy);
}

bool SpriteWorld::success(const SpriteWorldState& state) const {
  return tip_target_distance(state) < cfg_.success_eps;
}

void SpriteWorld::render_into(const SpriteWorldState& state, Frame& frame, Tensor* mask) const {
  frame = background_;
  if (mask) *mask = Tensor({cfg_.size, cfg_.size});
  if (!cfg_.render_foreground) {
    last_fg_pixels_ = 0;
    return;
  }
  const float s = static_cast<float>(cfg_.size);
  const float ax = 0.5f * s, ay = 0.5f * s;
  const float ex = ax + cfg_.link1_len * s * std::cos(state.theta1);
  const float ey = ay + cfg_.link1_len * s * std::sin(state.theta1);
  const float a2 = state.theta1 + state.theta2;
  const float tx = ex + cfg_.link2_len * s * std::cos(a2);
  const float ty = ey + cfg_.link2_len * s * std::sin(a2);

  draw_circle(frame, mask, state.target_x * s, state.target_y * s, cfg_.target_radius_px, kTarget);
  draw_segment(frame, mask, ax, ay, ex, ey, cfg_.link1_width_px * 0.5f, kLink1);
  draw_segment(frame, mask, ex, ey, tx, ty, cfg_.link2_width_px * 0.5f, kLink2);
  draw_circle(frame, mask, tx, ty, cfg_.tip_radius_px, kTip);

  if (mask) {
    int count = 0;
    for (float m : mask->v) count += m > 0.5f ? 1 : 0;
    last_fg_pixels_ = count;
  }
}

Frame SpriteWorld::render(const SpriteWorldState& state) const {
  Frame frame;
  Tensor mask;
  render_into(state, frame, &mask);
  return frame;
}

Tensor SpriteWorld::ground_truth_mask(const SpriteWorldState& state) const {
  Frame frame;
  Tensor mask;
  render_into(state, frame, &mask);
  return mask;
}

}  // namespace vai::envs
