#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "doctest.h"
#include "test_util.hpp"
#include "vai/core/hash.hpp"
#include "vai/core/image_io.hpp"
#include "vai/invariance/augment.hpp"

using namespace vai;
using namespace vai::invariance;

namespace {

Frame constant_frame(int h, int w, float r, float g, float b) {
  Frame f({h, w, 3});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      f.at(y, x, 0) = r;
      f.at(y, x, 1) = g;
      f.at(y, x, 2) = b;
    }
  return f;
}

// config with every stochastic branch disabled
AugmentConfig quiet_config(int crop, int pad = 0) {
  AugmentConfig cfg;
  cfg.crop = crop;
  cfg.pad = pad;
  cfg.fg_color_jitter = 0.0f;
  cfg.fg_brightness = 0.0f;
  cfg.w_train_background = 0.0f;
  cfg.w_random_color = 0.0f;
  cfg.w_fg_mean = 0.0f;
  cfg.bg_noise_std = 0.0f;
  cfg.mco_min_boxes = 0;
  cfg.mco_max_boxes = 0;
  cfg.p_dark_copy = 0.0f;
  cfg.p_overlay = 0.0f;
  return cfg;
}

struct Rgb {
  float r, g, b;
  bool operator<(const Rgb& o) const {
    return std::tie(r, g, b) < std::tie(o.r, o.g, o.b);
  }
};

}  // namespace

TEST_CASE("multicolorout paints axis-aligned constant boxes") {
  Rng rng = make_rng(2);
  const Frame base = constant_frame(24, 24, -1.0f, -1.0f, -1.0f);

  SUBCASE("zero boxes is the identity") {
    const Frame out = multicolorout(base, rng, 0, 0, 4, 8);
    CHECK(hash_tensor(out) == hash_tensor(base));
  }

  SUBCASE("one full-frame box paints a single constant color") {
    const Frame out = multicolorout(base, rng, 1, 1, 24, 24);
    for (int y = 0; y < 24; ++y)
      for (int x = 0; x < 24; ++x)
        for (int c = 0; c < 3; ++c) CHECK(out.at(y, x, c) == out.at(0, 0, c));
    CHECK(out.at(0, 0, 0) >= 0.0f);
  }

  SUBCASE("a single box is exactly one filled rectangle") {
    for (int trial = 0; trial < 20; ++trial) {
      const Frame out = multicolorout(base, rng, 1, 1, 3, 10);
      int x0 = 24, x1 = -1, y0 = 24, y1 = -1;
      for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 24; ++x)
          if (out.at(y, x, 0) != -1.0f) {
            x0 = std::min(x0, x);
            x1 = std::max(x1, x);
            y0 = std::min(y0, y);
            y1 = std::max(y1, y);
          }
      REQUIRE(x1 >= x0);
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x)
          for (int c = 0; c < 3; ++c) CHECK(out.at(y, x, c) == out.at(y0, x0, c));
      CHECK(x1 - x0 + 1 >= 3);
      CHECK(x1 - x0 + 1 <= 10);
      CHECK(y1 - y0 + 1 <= 10);
    }
  }

  SUBCASE("three boxes: at most three colors covering all changed pixels") {
    for (int trial = 0; trial < 20; ++trial) {
      const Frame out = multicolorout(base, rng, 3, 3, 4, 12);
      std::map<Rgb, std::array<int, 4>> bbox;  // color -> x0,x1,y0,y1
      for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 24; ++x) {
          if (out.at(y, x, 0) == -1.0f) continue;
          const Rgb key{out.at(y, x, 0), out.at(y, x, 1), out.at(y, x, 2)};
          auto it = bbox.find(key);
          if (it == bbox.end()) {
            bbox[key] = {x, x, y, y};
          } else {
            it->second[0] = std::min(it->second[0], x);
            it->second[1] = std::max(it->second[1], x);
            it->second[2] = std::min(it->second[2], y);
            it->second[3] = std::max(it->second[3], y);
          }
        }
      CHECK(bbox.size() >= 1);
      CHECK(bbox.size() <= 3);
      // the last-painted box survives occlusion intact: at least one color's
      // bounding box must be entirely that color
      bool witness = false;
      for (const auto& [color, bb] : bbox) {
        bool solid = true;
        for (int y = bb[2]; y <= bb[3] && solid; ++y)
          for (int x = bb[0]; x <= bb[1] && solid; ++x)
            solid = out.at(y, x, 0) == color.r && out.at(y, x, 1) == color.g &&
                    out.at(y, x, 2) == color.b;
        witness = witness || solid;
      }
      CHECK(witness);
    }
  }

  SUBCASE("invalid ranges are rejected") {
    CHECK_THROWS_AS(multicolorout(base, rng, 2, 1, 4, 8), std::invalid_argument);
    CHECK_THROWS_AS(multicolorout(base, rng, 1, 1, 0, 8), std::invalid_argument);
    CHECK_THROWS_AS(multicolorout(base, rng, 1, 1, 8, 4), std::invalid_argument);
  }
}

TEST_CASE("augment_background never touches foreground pixels") {
  AugmentConfig cfg;  // all defaults active except overlays
  cfg.crop = 32;
  Rng rng = make_rng(5);
  Frame frame({32, 32, 3});
  for (auto& v : frame.v) v = uniform(rng);
  Tensor mask({32, 32});
  for (int y = 10; y < 20; ++y)
    for (int x = 12; x < 22; ++x) mask.at(y, x) = 1.0f;
  const Frame plate = constant_frame(32, 32, 0.2f, 0.3f, 0.4f);

  for (int trial = 0; trial < 50; ++trial) {
    const Frame out = augment_background(frame, mask, plate, cfg, rng, &frame);
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x)
        if (mask.at(y, x) > 0.5f)
          for (int c = 0; c < 3; ++c) REQUIRE(out.at(y, x, c) == frame.at(y, x, c));
  }

  SUBCASE("an all-ones mask forces the identity") {
    const Tensor ones({32, 32}, 1.0f);
    const Frame out = augment_background(frame, ones, plate, cfg, rng, &frame);
    CHECK(hash_tensor(out) == hash_tensor(frame));
  }

  SUBCASE("mismatched mask is rejected") {
    CHECK(throws_containing<std::invalid_argument>(
        [&] { augment_background(frame, Tensor({8, 8}), plate, cfg, rng); }, "mask"));
  }
}

TEST_CASE("replacement op frequencies follow their weights") {
  AugmentConfig cfg = quiet_config(16);
  cfg.w_train_background = 1.0f;
  cfg.w_random_color = 1.0f;
  cfg.w_fg_mean = 1.0f;
  cfg.p_dark_copy = 0.5f;
  Rng rng = make_rng(31);
  const Frame frame = constant_frame(16, 16, 0.5f, 0.5f, 0.5f);
  Tensor mask({16, 16});
  mask.at(8, 8) = 1.0f;  // dark copy needs some foreground
  const Frame plate = constant_frame(16, 16, 0.1f, 0.1f, 0.1f);

  int counts[3] = {0, 0, 0};
  int dark = 0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    AugmentTrace trace;
    augment_background(frame, mask, plate, cfg, rng, &frame, &trace);
    REQUIRE(trace.replacement_op >= 0);
    REQUIRE(trace.replacement_op <= 2);
    counts[trace.replacement_op]++;
    dark += trace.dark_copy ? 1 : 0;
    CHECK_FALSE(trace.overlay);
  }
  for (int op = 0; op < 3; ++op) {
    const double frac = static_cast<double>(counts[op]) / n;
    CHECK(frac > 1.0 / 3.0 - 0.03);
    CHECK(frac < 1.0 / 3.0 + 0.03);
  }
  const double dark_frac = static_cast<double>(dark) / n;
  CHECK(dark_frac > 0.47);
  CHECK(dark_frac < 0.53);
}

TEST_CASE("single replacement ops produce their closed forms") {
  const Frame frame = constant_frame(8, 8, 0.9f, 0.8f, 0.7f);
  const Frame plate = constant_frame(8, 8, 0.25f, 0.5f, 0.75f);
  Tensor mask({8, 8});
  mask.at(0, 0) = 1.0f;
  Rng rng = make_rng(6);

  SUBCASE("train-background fill copies the plate") {
    AugmentConfig cfg = quiet_config(8);
    cfg.w_train_background = 1.0f;
    const Frame out = augment_background(frame, mask, plate, cfg, rng);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        if (mask.at(y, x) > 0.5f) continue;
        CHECK(out.at(y, x, 0) == 0.25f);
        CHECK(out.at(y, x, 1) == 0.5f);
        CHECK(out.at(y, x, 2) == 0.75f);
      }
  }

  SUBCASE("random-color fill is one constant color") {
    AugmentConfig cfg = quiet_config(8);
    cfg.w_random_color = 1.0f;
    const Frame out = augment_background(frame, mask, plate, cfg, rng);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        if (mask.at(y, x) > 0.5f) continue;
        for (int c = 0; c < 3; ++c) {
          CHECK(out.at(y, x, c) == out.at(7, 7, c));
          CHECK(out.at(y, x, c) >= 0.0f);
          CHECK(out.at(y, x, c) <= 1.0f);
        }
      }
  }

  SUBCASE("fg-mean fill tracks the reference foreground color") {
    AugmentConfig cfg = quiet_config(8);
    cfg.w_fg_mean = 1.0f;
    cfg.fg_mean_perturb = 0.0f;
    const Frame out = augment_background(frame, mask, plate, cfg, rng, &frame);
    CHECK(out.at(4, 4, 0) == doctest::Approx(0.9f).epsilon(1e-6));
    CHECK(out.at(4, 4, 1) == doctest::Approx(0.8f).epsilon(1e-6));
    CHECK(out.at(4, 4, 2) == doctest::Approx(0.7f).epsilon(1e-6));
  }

  SUBCASE("all-zero weights empty the background region") {
    AugmentConfig cfg = quiet_config(8);
    AugmentTrace trace;
    const Frame out = augment_background(frame, mask, plate, cfg, rng, nullptr, &trace);
    CHECK(trace.replacement_op == -1);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x)
        if (mask.at(y, x) < 0.5f)
          for (int c = 0; c < 3; ++c) CHECK(out.at(y, x, c) == 0.0f);
    CHECK(out.at(0, 0, 0) == 0.9f);  // foreground untouched
  }
}

TEST_CASE("overlays tile, blend, and fail loudly without images") {
  AugmentConfig cfg = quiet_config(6);
  cfg.p_overlay = 1.0f;
  cfg.overlay_alpha = 0.5f;
  const Frame frame = constant_frame(6, 6, 0.0f, 0.0f, 0.0f);
  const Tensor mask({6, 6});
  Rng rng = make_rng(9);

  cfg.overlay_dir = scratch("vai_test_overlay_empty");
  CHECK(throws_containing<std::runtime_error>(
      [&] { augment_background(frame, mask, frame, cfg, rng); }, "overlay"));

  cfg.overlay_dir = scratch("vai_test_overlay");
  Frame tile({2, 2, 3});
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x)
      for (int c = 0; c < 3; ++c) tile.at(y, x, c) = (y * 2 + x) / 4.0f;
  save_ppm(cfg.overlay_dir + "/tile.ppm", tile);
  const Frame quantized_tile = load_ppm(cfg.overlay_dir + "/tile.ppm");

  AugmentTrace trace;
  const Frame out = augment_background(frame, mask, frame, cfg, rng, nullptr, &trace);
  CHECK(trace.overlay);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x)
      for (int c = 0; c < 3; ++c)
        CHECK(out.at(y, x, c) ==
              doctest::Approx(0.5f * quantized_tile.at(y % 2, x % 2, c)).epsilon(1e-6));
}

TEST_CASE("make_training_pair collapses to the masked crop when quiet") {
  AugmentConfig cfg = quiet_config(10);
  Rng rng = make_rng(14);
  Frame frame({10, 10, 3});
  for (auto& v : frame.v) v = uniform(rng);
  Tensor mask({10, 10});
  for (int y = 2; y < 6; ++y)
    for (int x = 3; x < 7; ++x) mask.at(y, x) = 1.0f;
  const Frame plate = constant_frame(10, 10, 0.1f, 0.1f, 0.1f);

  const TrainingPair pair = make_training_pair(frame, mask, plate, cfg, rng);
  REQUIRE(pair.noisy.shape == std::vector<int>{10, 10, 3});
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x)
      for (int c = 0; c < 3; ++c) {
        const float expect = frame.at(y, x, c) * mask.at(y, x);
        CHECK(pair.clean.at(y, x, c) == expect);
        CHECK(pair.noisy.at(y, x, c) == expect);
      }
  CHECK(hash_tensor(pair.target_mask) == hash_tensor(mask));
}

TEST_CASE("make_training_pair with an empty mask synthesizes pure background") {
  AugmentConfig cfg = quiet_config(10);
  cfg.w_random_color = 1.0f;
  Rng rng = make_rng(15);
  Frame frame({10, 10, 3});
  for (auto& v : frame.v) v = uniform(rng);
  const Tensor mask({10, 10});
  const Frame plate = constant_frame(10, 10, 0.1f, 0.1f, 0.1f);

  const TrainingPair pair = make_training_pair(frame, mask, plate, cfg, rng);
  for (std::size_t i = 0; i < pair.clean.numel(); ++i) CHECK(pair.clean[i] == 0.0f);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x)
      for (int c = 0; c < 3; ++c) CHECK(pair.noisy.at(y, x, c) == pair.noisy.at(0, 0, c));
}

TEST_CASE("pad-and-crop moves frame and mask in lockstep") {
  AugmentConfig cfg = quiet_config(10, 4);
  cfg.enabled = false;
  Rng rng = make_rng(16);
  Frame frame = constant_frame(10, 10, 0.25f, 0.25f, 0.25f);
  Tensor mask({10, 10});
  frame.at(4, 7, 0) = 1.0f;  // marker
  mask.at(4, 7) = 1.0f;
  const Frame plate = constant_frame(10, 10, 0.1f, 0.1f, 0.1f);

  std::set<std::pair<int, int>> seen;
  for (int trial = 0; trial < 60; ++trial) {
    const TrainingPair pair = make_training_pair(frame, mask, plate, cfg, rng);
    int fy = -1, fx = -1, my = -1, mx = -1;
    for (int y = 0; y < 10; ++y)
      for (int x = 0; x < 10; ++x) {
        if (pair.noisy.at(y, x, 0) == 1.0f) {
          fy = y;
          fx = x;
        }
        if (pair.target_mask.at(y, x) == 1.0f) {
          my = y;
          mx = x;
        }
      }
    CHECK(fy == my);
    CHECK(fx == mx);
    if (fy >= 0) seen.insert({fy, fx});
  }
  CHECK(seen.size() > 5);  // offsets actually vary
}

TEST_CASE("make_training_pair clamps, validates, and reproduces") {
  Rng rng = make_rng(21);
  Frame frame({8, 8, 3});
  for (auto& v : frame.v) v = uniform(rng);
  Tensor mask({8, 8}, 1.0f);
  const Frame plate = constant_frame(8, 8, 0.1f, 0.1f, 0.1f);

  SUBCASE("foreground brightness clamps to [0,1]") {
    AugmentConfig cfg = quiet_config(8);
    cfg.fg_brightness = 0.0f;
    cfg.fg_color_jitter = 0.9f;
    for (int trial = 0; trial < 20; ++trial) {
      const TrainingPair pair = make_training_pair(frame, mask, plate, cfg, rng);
      for (float v : pair.noisy.v) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
      }
    }
  }

  SUBCASE("oversized crop is rejected") {
    AugmentConfig cfg = quiet_config(25, 2);
    CHECK(throws_containing<std::invalid_argument>(
        [&] { make_training_pair(frame, mask, plate, cfg, rng); }, "crop"));
  }

  SUBCASE("mask shape mismatch is rejected") {
    AugmentConfig cfg = quiet_config(8);
    CHECK_THROWS_AS(make_training_pair(frame, Tensor({4, 4}), plate, cfg, rng),
                    std::invalid_argument);
  }

  SUBCASE("equal seeds give byte-equal pairs") {
    AugmentConfig cfg;
    cfg.crop = 8;
    cfg.pad = 2;
    Rng r1 = make_rng(33), r2 = make_rng(33);
    const TrainingPair a = make_training_pair(frame, mask, plate, cfg, r1);
    const TrainingPair b = make_training_pair(frame, mask, plate, cfg, r2);
    CHECK(hash_tensor(a.noisy) == hash_tensor(b.noisy));
    CHECK(hash_tensor(a.clean) == hash_tensor(b.clean));
    CHECK(hash_tensor(a.target_mask) == hash_tensor(b.target_mask));
  }
}

TEST_CASE("estimate_background takes a per-pixel median") {
  data::EpisodeStore store;
  store.episodes.emplace_back();
  for (float v : {0.9f, 0.1f, 0.5f, 0.7f, 0.3f})
    store.episodes[0].push_back(constant_frame(4, 4, v, v, v));

  const Frame plate = estimate_background(store, 5);
  for (float v : plate.v) CHECK(v == 0.5f);

  // even count: the upper median is taken
  store.episodes[0].pop_back();
  const Frame plate4 = estimate_background(store, 4);
  for (float v : plate4.v) CHECK(v == 0.7f);

  CHECK_THROWS_AS(estimate_background(data::EpisodeStore{}, 4), std::invalid_argument);
}
