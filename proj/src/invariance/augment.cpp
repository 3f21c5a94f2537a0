#include "vai/invariance/augment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "vai/core/image_io.hpp"

namespace fs = std::filesystem;

namespace vai::invariance {

namespace {

struct Box {
  int x0, y0, w, h;
  float r, g, b;
};

// Shared box generator so multicolorout and the background-restricted variant
// consume the random stream identically.
std::vector<Box> draw_boxes(Rng& rng, int fw, int fh, int min_boxes, int max_boxes,
                            int min_size, int max_size) {
  if (min_boxes < 0 || max_boxes < min_boxes || min_size < 1 || max_size < min_size)
    throw std::invalid_argument("multicolorout: invalid box count or size range");
  std::vector<Box> boxes;
  const int n = uniform_int(rng, min_boxes, max_boxes);
  for (int i = 0; i < n; ++i) {
    Box box;
    box.w = std::min(uniform_int(rng, min_size, max_size), fw);
    box.h = std::min(uniform_int(rng, min_size, max_size), fh);
    box.x0 = uniform_int(rng, 0, fw - box.w);
    box.y0 = uniform_int(rng, 0, fh - box.h);
    box.r = uniform(rng);
    box.g = uniform(rng);
    box.b = uniform(rng);
    boxes.push_back(box);
  }
  return boxes;
}

void paint_boxes(Frame& frame, const std::vector<Box>& boxes, const Tensor* only_where_zero) {
  for (const Box& box : boxes)
    for (int y = box.y0; y < box.y0 + box.h; ++y)
      for (int x = box.x0; x < box.x0 + box.w; ++x) {
        if (only_where_zero && only_where_zero->at(y, x) > 0.5f) continue;
        frame.at(y, x, 0) = box.r;
        frame.at(y, x, 1) = box.g;
        frame.at(y, x, 2) = box.b;
      }
}

std::vector<std::string> list_overlay_images(const std::string& dir) {
  std::vector<std::string> files;
  if (fs::is_directory(dir))
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.path().extension() == ".ppm") files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());
  return files;
}

Frame tile_to(const Frame& src, int h, int w) {
  Frame out({h, w, 3});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = src.at(y % src.dim(0), x % src.dim(1), c);
  return out;
}

}  // namespace

AugmentConfig AugmentConfig::from_config(const Config& cfg) {
  AugmentConfig a;
  a.enabled = cfg.get_bool("augmentation.enabled");
  a.crop = static_cast<int>(cfg.get_int("augmentation.crop"));
  a.pad = static_cast<int>(cfg.get_int("augmentation.pad"));
  a.fg_color_jitter = static_cast<float>(cfg.get_real("augmentation.fg_color_jitter"));
  a.fg_brightness = static_cast<float>(cfg.get_real("augmentation.fg_brightness"));
  a.w_train_background = static_cast<float>(cfg.get_real("augmentation.w_train_background"));
  a.w_random_color = static_cast<float>(cfg.get_real("augmentation.w_random_color"));
  a.w_fg_mean = static_cast<float>(cfg.get_real("augmentation.w_fg_mean"));
  a.bg_noise_std = static_cast<float>(cfg.get_real("augmentation.bg_noise_std"));
  a.mco_min_boxes = static_cast<int>(cfg.get_int("augmentation.mco_min_boxes"));
  a.mco_max_boxes = static_cast<int>(cfg.get_int("augmentation.mco_max_boxes"));
  a.mco_min_size = static_cast<int>(cfg.get_int("augmentation.mco_min_size"));
  a.mco_max_size = static_cast<int>(cfg.get_int("augmentation.mco_max_size"));
  a.p_dark_copy = static_cast<float>(cfg.get_real("augmentation.p_dark_copy"));
  a.dark_copy_scale = static_cast<float>(cfg.get_real("augmentation.dark_copy_scale"));
  a.p_overlay = static_cast<float>(cfg.get_real("augmentation.p_overlay"));
  a.overlay_dir = cfg.get_string("augmentation.overlay_dir");
  a.overlay_alpha = static_cast<float>(cfg.get_real("augmentation.overlay_alpha"));
  return a;
}

Frame multicolorout(const Frame& frame, Rng& rng, int min_boxes, int max_boxes,
                    int min_size, int max_size) {
  Frame out = frame;
  const auto boxes = draw_boxes(rng, frame.dim(1), frame.dim(0), min_boxes, max_boxes,
                                min_size, max_size);
  paint_boxes(out, boxes, nullptr);
  return out;
}

Frame augment_background(const Frame& background, const Tensor& fg_mask, const Frame& train_bg,
                         const AugmentConfig& cfg, Rng& rng,
                         const Frame* fg_reference, AugmentTrace* trace) {
  const int h = background.dim(0), w = background.dim(1);
  if (fg_mask.dim(0) != h || fg_mask.dim(1) != w)
    throw std::invalid_argument("augment_background: mask " + fg_mask.shape_str() +
                                " does not match frame " + background.shape_str());
  Frame out = background;

  // 1. replacement: exactly one op, weight-proportional; all-zero weights
  //    leave the background region empty.
  const float wsum = cfg.w_train_background + cfg.w_random_color + cfg.w_fg_mean;
  int op = -1;
  if (wsum > 0.0f) {
    const float r = uniform(rng, 0.0f, wsum);
    op = r < cfg.w_train_background ? 0 : (r < cfg.w_train_background + cfg.w_random_color ? 1 : 2);
  }
  float fill[3] = {0.0f, 0.0f, 0.0f};
  if (op == 1) {
    for (float& c : fill) c = uniform(rng);
  } else if (op == 2) {
    // mean foreground color with a small per-channel perturbation
    const Frame& ref = fg_reference ? *fg_reference : background;
    double sum[3] = {0, 0, 0};
    long count = 0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (fg_mask.at(y, x) > 0.5f) {
          for (int c = 0; c < 3; ++c) sum[c] += ref.at(y, x, c);
          ++count;
        }
    for (int c = 0; c < 3; ++c) {
      const float mean = count > 0 ? static_cast<float>(sum[c] / count) : 0.5f;
      fill[c] = clamp01(mean + uniform(rng, -cfg.fg_mean_perturb, cfg.fg_mean_perturb));
    }
  }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (fg_mask.at(y, x) > 0.5f) continue;
      for (int c = 0; c < 3; ++c)
        out.at(y, x, c) = op == 0 ? train_bg.at(y, x, c) : fill[c];
    }

  // 2. pixel noise and random boxes, background only
  if (cfg.bg_noise_std > 0.0f)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (fg_mask.at(y, x) > 0.5f) continue;
        for (int c = 0; c < 3; ++c)
          out.at(y, x, c) = clamp01(out.at(y, x, c) + gaussian(rng, 0.0f, cfg.bg_noise_std));
      }
  if (cfg.mco_max_boxes > 0) {
    const auto boxes = draw_boxes(rng, w, h, cfg.mco_min_boxes, cfg.mco_max_boxes,
                                  cfg.mco_min_size, cfg.mco_max_size);
    paint_boxes(out, boxes, &fg_mask);
  }

  // 3. darkened foreground copy at a random offset, background only
  bool dark = false;
  if (cfg.p_dark_copy > 0.0f && bernoulli(rng, cfg.p_dark_copy)) {
    dark = true;
    const Frame& ref = fg_reference ? *fg_reference : background;
    const int dx = uniform_int(rng, -w / 2, w / 2);
    const int dy = uniform_int(rng, -h / 2, h / 2);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (fg_mask.at(y, x) < 0.5f) continue;
        const int ny = y + dy, nx = x + dx;
        if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
        if (fg_mask.at(ny, nx) > 0.5f) continue;
        for (int c = 0; c < 3; ++c)
          out.at(ny, nx, c) = clamp01(ref.at(y, x, c) * cfg.dark_copy_scale);
      }
  }

  // 4. image overlay, background only
  bool overlayed = false;
  if (cfg.p_overlay > 0.0f && bernoulli(rng, cfg.p_overlay)) {
    overlayed = true;
    const auto files = list_overlay_images(cfg.overlay_dir);
    if (files.empty())
      throw std::runtime_error("augment_background: overlay enabled but no .ppm images in '" +
                               cfg.overlay_dir + "'");
    const Frame img = tile_to(load_ppm(files[static_cast<std::size_t>(
                                  uniform_int(rng, 0, static_cast<int>(files.size()) - 1))]),
                              h, w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (fg_mask.at(y, x) > 0.5f) continue;
        for (int c = 0; c < 3; ++c)
          out.at(y, x, c) = clamp01((1.0f - cfg.overlay_alpha) * out.at(y, x, c) +
                                    cfg.overlay_alpha * img.at(y, x, c));
      }
  }

  if (trace) {
    trace->replacement_op = op;
    trace->dark_copy = dark;
    trace->overlay = overlayed;
  }
  return out;
}

TrainingPair make_training_pair(const Frame& frame, const Tensor& mask, const Frame& train_bg,
                                const AugmentConfig& cfg, Rng& rng) {
  const int h = frame.dim(0), w = frame.dim(1), c = frame.dim(2);
  if (mask.dim(0) != h || mask.dim(1) != w)
    throw std::invalid_argument("make_training_pair: mask " + mask.shape_str() +
                                " does not match frame " + frame.shape_str());
  const int ph = h + 2 * cfg.pad, pw = w + 2 * cfg.pad;
  if (cfg.crop > ph || cfg.crop > pw)
    throw std::invalid_argument("make_training_pair: crop " + std::to_string(cfg.crop) +
                                " larger than padded frame " + std::to_string(ph) + "x" +
                                std::to_string(pw));

  // synchronized offsets into the zero-padded frame
  const int oy = uniform_int(rng, 0, ph - cfg.crop);
  const int ox = uniform_int(rng, 0, pw - cfg.crop);
  auto crop_at = [&](const Tensor& src, int channels) {
    Tensor dst(channels > 0 ? std::vector<int>{cfg.crop, cfg.crop, channels}
                            : std::vector<int>{cfg.crop, cfg.crop});
    for (int y = 0; y < cfg.crop; ++y)
      for (int x = 0; x < cfg.crop; ++x) {
        const int sy = y + oy - cfg.pad, sx = x + ox - cfg.pad;
        const bool in = sy >= 0 && sy < h && sx >= 0 && sx < w;
        if (channels > 0)
          for (int ch = 0; ch < channels; ++ch)
            dst.at(y, x, ch) = in ? src.at(sy, sx, ch) : 0.0f;
        else
          dst.at(y, x) = in ? src.at(sy, sx) : 0.0f;
      }
    return dst;
  };

  const Frame cropped = crop_at(frame, c);
  const Tensor cropped_mask = crop_at(mask, 0);

  TrainingPair pair;
  pair.target_mask = cropped_mask;
  pair.clean = Frame({cfg.crop, cfg.crop, c});
  for (int y = 0; y < cfg.crop; ++y)
    for (int x = 0; x < cfg.crop; ++x)
      for (int ch = 0; ch < c; ++ch)
        pair.clean.at(y, x, ch) = cropped.at(y, x, ch) * cropped_mask.at(y, x);

  if (!cfg.enabled) {
    pair.noisy = cropped;  // raw crop: the no-augmentation ablation
    return pair;
  }

  // foreground: color jitter + brightness, re-gated by the mask
  float scale[3], bright;
  for (float& s : scale) s = 1.0f + uniform(rng, -cfg.fg_color_jitter, cfg.fg_color_jitter);
  bright = uniform(rng, -cfg.fg_brightness, cfg.fg_brightness);

  // background: synthesized over the masked-out crop
  Frame bg_in({cfg.crop, cfg.crop, c});
  for (int y = 0; y < cfg.crop; ++y)
    for (int x = 0; x < cfg.crop; ++x)
      for (int ch = 0; ch < c; ++ch)
        bg_in.at(y, x, ch) = cropped.at(y, x, ch) * (1.0f - cropped_mask.at(y, x));
  const Frame bg_plate = crop_at(train_bg, c);
  const Frame bg_out = augment_background(bg_in, cropped_mask, bg_plate, cfg, rng, &cropped);

  pair.noisy = Frame({cfg.crop, cfg.crop, c});
  for (int y = 0; y < cfg.crop; ++y)
    for (int x = 0; x < cfg.crop; ++x) {
      const bool fg = cropped_mask.at(y, x) > 0.5f;
      for (int ch = 0; ch < c; ++ch)
        pair.noisy.at(y, x, ch) = fg ? clamp01(pair.clean.at(y, x, ch) * scale[ch] + bright)
                                     : bg_out.at(y, x, ch);
    }
  return pair;
}

Frame estimate_background(const data::EpisodeStore& store, int sample_count) {
  std::vector<const Frame*> all;
  for (const auto& ep : store.episodes)
    for (const Frame& f : ep) all.push_back(&f);
  if (all.empty()) throw std::invalid_argument("estimate_background: empty store");
  const int n = std::min<int>(sample_count, static_cast<int>(all.size()));
  std::vector<const Frame*> picks;
  for (int i = 0; i < n; ++i)
    picks.push_back(all[static_cast<std::size_t>(i) * all.size() / static_cast<std::size_t>(n)]);

  const Frame& first = *picks[0];
  const int h = first.dim(0), w = first.dim(1), c = first.dim(2);
  Frame plate({h, w, c});
  std::vector<float> vals(picks.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch) {
        for (std::size_t i = 0; i < picks.size(); ++i) vals[i] = picks[i]->at(y, x, ch);
        const auto mid = vals.begin() + static_cast<long>(vals.size() / 2);
        std::nth_element(vals.begin(), mid, vals.end());
        plate.at(y, x, ch) = *mid;
      }
  return plate;
}

}  // namespace vai::invariance
