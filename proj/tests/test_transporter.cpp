#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "test_util.hpp"
#include "vai/core/checkpoint.hpp"
#include "vai/core/errors.hpp"
#include "vai/core/hash.hpp"
#include "vai/keypoint/transporter.hpp"
#include "vai/nn/batch.hpp"

using namespace vai;
using namespace vai::keypoint;

namespace {

TransporterConfig tiny_config() {
  TransporterConfig cfg;
  cfg.input_size = 20;
  cfg.grid = 5;
  cfg.num_keypoints = 2;
  cfg.feature_channels = 8;
  cfg.base_channels = 8;
  cfg.sigma = 0.2f;
  return cfg;
}

// Frames with a bright 4x4 square moving over a dim background.
data::EpisodeStore moving_square_store(int episodes, int frames) {
  data::EpisodeStore store;
  store.environment_id = "spriteworld";
  store.texture_id = "grid";
  for (int e = 0; e < episodes; ++e) {
    std::vector<Frame> ep;
    for (int i = 0; i < frames; ++i) {
      Frame f({20, 20, 3}, 0.2f);
      const int x = (3 * i + 2 * e) % 16;
      const int y = (5 * i + 7 * e) % 16;
      for (int r = y; r < y + 4; ++r)
        for (int c = x; c < x + 4; ++c)
          for (int ch = 0; ch < 3; ++ch) f.at(r, c, ch) = 1.0f;
      ep.push_back(std::move(f));
    }
    store.episodes.push_back(std::move(ep));
  }
  return store;
}

Tensor random_tensor(const std::vector<int>& shape, Rng& rng, float scale = 1.0f) {
  Tensor t(shape);
  for (auto& v : t.v) v = scale * (uniform(rng, 0.0, 1.0) - 0.5);
  return t;
}

// Directional finite-difference check of d(sum(fwd(x) * probe))/dx along dir.
template <typename Fwd, typename Bwd>
void check_directional(Fwd&& fwd, Bwd&& bwd, const Tensor& x, Rng& rng, float h = 1e-2f) {
  const Tensor y0 = fwd(x);
  Tensor probe = random_tensor(y0.shape, rng);
  const Tensor dx = bwd(probe);
  const Tensor dir = random_tensor(x.shape, rng);

  double analytic = 0.0;
  for (std::size_t i = 0; i < dx.numel(); ++i)
    analytic += static_cast<double>(dx[i]) * static_cast<double>(dir[i]);

  Tensor xp = x, xm = x;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    xp.v[i] += h * dir[i];
    xm.v[i] -= h * dir[i];
  }
  const Tensor yp = fwd(xp);
  const Tensor ym = fwd(xm);
  double lp = 0.0, lm = 0.0;
  for (std::size_t i = 0; i < yp.numel(); ++i) {
    lp += static_cast<double>(yp[i]) * static_cast<double>(probe[i]);
    lm += static_cast<double>(ym[i]) * static_cast<double>(probe[i]);
  }
  const double fd = (lp - lm) / (2.0 * h);
  CHECK(std::abs(analytic - fd) <=
        2e-2 * std::max({1.0, std::abs(analytic), std::abs(fd)}));
}

}  // namespace

TEST_CASE("render_heatmap matches a scalar reference everywhere") {
  Rng rng = make_rng(5);
  Tensor kps({3, 2});
  for (auto& v : kps.v) v = uniform(rng, 0.0, 1.0);
  const float sigma = 0.13f;
  const Tensor h = render_heatmap(kps, 7, 9, sigma);
  REQUIRE(h.shape == std::vector<int>{7, 9});
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 9; ++j) {
      const double cy = (i + 0.5) / 7.0, cx = (j + 0.5) / 9.0;
      double best = 0.0;
      for (int q = 0; q < 3; ++q) {
        const double dx = cx - kps.at(q, 0), dy = cy - kps.at(q, 1);
        best = std::max(best, std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma)));
      }
      CHECK(h.at(i, j) == doctest::Approx(best).epsilon(1e-6));
      CHECK(h.at(i, j) > 0.0f);
      CHECK(h.at(i, j) <= 1.0f);
    }
}

TEST_CASE("render_heatmap hits the closed-form example values") {
  Tensor kp({1, 2});
  kp.at(0, 0) = 0.25f;  // x
  kp.at(0, 1) = 0.25f;  // y
  const Tensor h = render_heatmap(kp, 10, 10, 0.1f);
  CHECK(h.at(2, 2) == doctest::Approx(1.0).epsilon(1e-7));
  // one cell down: center (0.25, 0.35), squared distance 0.01
  CHECK(h.at(3, 2) == doctest::Approx(std::exp(-0.5)).epsilon(1e-6));
  CHECK(h.at(2, 3) == doctest::Approx(std::exp(-0.5)).epsilon(1e-6));

  Tensor dup({2, 2});
  dup.at(0, 0) = dup.at(1, 0) = 0.25f;
  dup.at(0, 1) = dup.at(1, 1) = 0.25f;
  const Tensor h2 = render_heatmap(dup, 10, 10, 0.1f);
  for (std::size_t i = 0; i < h.numel(); ++i) CHECK(h2[i] == h[i]);
}

TEST_CASE("render_heatmap validates its inputs") {
  Tensor kp({1, 2}, 0.5f);
  CHECK(throws_containing<std::invalid_argument>(
      [&] { render_heatmap(Tensor({0, 2}), 4, 4, 0.1f); }, "empty"));
  CHECK(throws_containing<std::invalid_argument>(
      [&] { render_heatmap(kp, 4, 4, 0.0f); }, "sigma"));
  CHECK(throws_containing<std::invalid_argument>(
      [&] { render_heatmap(Tensor({2, 3}), 4, 4, 0.1f); }, "{K,2}"));
}

TEST_CASE("transport_features mixes per cell exactly") {
  Rng rng = make_rng(11);
  const Tensor fs = random_tensor({2, 2, 1}, rng);
  const Tensor ft = random_tensor({2, 2, 1}, rng);
  Tensor hs({2, 2}), ht({2, 2});
  hs.v = {0.0f, 0.5f, 1.0f, 0.25f};
  ht.v = {0.0f, 1.0f, 0.5f, 0.75f};

  const Tensor out = transport_features(fs, ft, hs, ht);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const float expect = fs.at(i, j, 0) * (1.0f - hs.at(i, j)) * (1.0f - ht.at(i, j)) +
                           ft.at(i, j, 0) * ht.at(i, j);
      CHECK(out.at(i, j, 0) == doctest::Approx(expect).epsilon(1e-7));
    }

  SUBCASE("zero heat keeps the source, unit target heat swaps in the target") {
    const Tensor zero({2, 2}, 0.0f), one({2, 2}, 1.0f);
    const Tensor keep = transport_features(fs, ft, zero, zero);
    const Tensor swap = transport_features(fs, ft, zero, one);
    for (std::size_t i = 0; i < fs.numel(); ++i) {
      CHECK(keep[i] == fs[i]);
      CHECK(swap[i] == ft[i]);
    }
  }

  SUBCASE("grid mismatch is rejected by name") {
    const Tensor f3 = random_tensor({3, 3, 2}, rng);
    CHECK(throws_containing<std::invalid_argument>(
        [&] { transport_features(f3, f3, hs, ht); }, "grid mismatch"));
  }
}

TEST_CASE("reconstruction_loss is an exact sum of squares") {
  Tensor a({2, 3}, 0.25f);
  CHECK(reconstruction_loss(a, a) == 0.0);

  Tensor b = a;
  b.v[1] += 0.5f;
  b.v[4] += 0.5f;
  CHECK(reconstruction_loss(a, b) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(reconstruction_loss(b, a) == reconstruction_loss(a, b));

  CHECK_THROWS_AS(reconstruction_loss(a, Tensor({3, 2})), std::invalid_argument);

  SUBCASE("gradient matches central differences at 4x4") {
    Rng rng = make_rng(3);
    const Tensor target = random_tensor({4, 4}, rng);
    Tensor rec = random_tensor({4, 4}, rng);
    for (std::size_t i = 0; i < rec.numel(); ++i) {
      const double analytic = 2.0 * (static_cast<double>(rec[i]) - target[i]);
      Tensor rp = rec, rm = rec;
      rp.v[i] += 1e-4f;
      rm.v[i] -= 1e-4f;
      const double span = static_cast<double>(rp.v[i]) - static_cast<double>(rm.v[i]);
      const double fd =
          (reconstruction_loss(target, rp) - reconstruction_loss(target, rm)) / span;
      CHECK(std::abs(analytic - fd) <= 1e-3 * std::max(1.0, std::abs(analytic)));
    }
  }
}

TEST_CASE("model backward passes agree with directional finite differences") {
  TransporterConfig cfg = tiny_config();
  TransporterModel model(cfg);
  Rng rng = make_rng(17);
  model.init(rng);

  SUBCASE("decoder") {
    const Tensor feat = random_tensor({1, cfg.feature_channels, 5, 5}, rng, 0.5f);
    check_directional([&](const Tensor& x) { return model.decode(x); },
                      [&](const Tensor& d) { return model.decode_backward(d); }, feat, rng);
  }
  SUBCASE("feature extractor") {
    const Tensor x = random_tensor({1, 3, 20, 20}, rng, 0.5f);
    check_directional([&](const Tensor& t) { return model.features_forward(t); },
                      [&](const Tensor& d) { return model.features_backward(d); }, x, rng);
  }
  SUBCASE("keynet") {
    const Tensor x = random_tensor({1, 3, 20, 20}, rng, 0.5f);
    check_directional([&](const Tensor& t) { return model.keynet_forward(t); },
                      [&](const Tensor& d) { return model.keynet_backward(d); }, x, rng);
  }
  SUBCASE("heatmap renderer") {
    Tensor kps({1, cfg.num_keypoints, 2});
    kps.v = {0.31f, 0.42f, 0.67f, 0.23f};
    check_directional([&](const Tensor& k) { return model.render_heatmaps(k); },
                      [&](const Tensor& d) { return model.render_heatmaps_backward(d); },
                      kps, rng, 1e-3f);
  }
}

TEST_CASE("detect_keypoints is deterministic and in range") {
  TransporterModel model(tiny_config());
  Rng rng = make_rng(23);
  model.init(rng);
  const data::EpisodeStore store = moving_square_store(1, 3);

  const Tensor k1 = detect_keypoints(model, store.episodes[0][0]);
  const Tensor k2 = detect_keypoints(model, store.episodes[0][0]);
  REQUIRE(k1.shape == std::vector<int>{2, 2});
  for (std::size_t i = 0; i < k1.numel(); ++i) {
    CHECK(k1[i] >= 0.0f);
    CHECK(k1[i] <= 1.0f);
    CHECK(k1[i] == k2[i]);
  }

  CHECK(throws_containing<std::invalid_argument>(
      [&] { detect_keypoints(model, Frame({84, 84, 3}, 0.0f)); }, "(20,20,3)"));
}

TEST_CASE("training reduces reconstruction loss on moving squares") {
  const data::EpisodeStore store = moving_square_store(2, 12);
  TransporterTrainConfig tcfg;
  tcfg.steps = 150;
  tcfg.batch = 8;
  tcfg.lr = 2e-3f;
  std::vector<double> losses;
  train_transporter(store, tiny_config(), tcfg, 42, &losses);
  REQUIRE(static_cast<int>(losses.size()) == tcfg.steps);
  double head = 0.0, tail = 0.0;
  for (int i = 0; i < 10; ++i) head += losses[i];
  for (int i = tcfg.steps - 10; i < tcfg.steps; ++i) tail += losses[i];
  CHECK(tail < 0.5 * head);
}

TEST_CASE("training memorizes a constant video quickly") {
  data::EpisodeStore store = moving_square_store(1, 6);
  for (auto& f : store.episodes[0]) f = store.episodes[0][0];
  TransporterTrainConfig tcfg;
  tcfg.steps = 150;
  tcfg.batch = 4;
  tcfg.lr = 3e-3f;
  tcfg.cross_episode_prob = 0.0;
  std::vector<double> losses;
  train_transporter(store, tiny_config(), tcfg, 1, &losses);
  CHECK(losses.back() < 0.3 * losses.front());
}

TEST_CASE("training is byte-deterministic for a fixed seed") {
  const data::EpisodeStore store = moving_square_store(2, 6);
  TransporterTrainConfig tcfg;
  tcfg.steps = 10;
  tcfg.batch = 4;
  TransporterModel a = train_transporter(store, tiny_config(), tcfg, 9);
  TransporterModel b = train_transporter(store, tiny_config(), tcfg, 9);
  auto na = a.named_params(), nb = b.named_params();
  REQUIRE(na.size() == nb.size());
  for (std::size_t i = 0; i < na.size(); ++i)
    CHECK(hash_tensor(na[i].second->w) == hash_tensor(nb[i].second->w));

  TransporterModel c = train_transporter(store, tiny_config(), tcfg, 10);
  CHECK(hash_tensor(c.named_params()[0].second->w) != hash_tensor(na[0].second->w));

  CHECK(throws_containing<std::invalid_argument>(
      [&] { train_transporter(data::EpisodeStore{}, tiny_config(), tcfg, 0); }, "empty"));
}

TEST_CASE("transporter checkpoints round trip bitwise") {
  const std::string dir = scratch("vai_test_tr_ckpt");
  const std::string path = dir + "/t.ckpt";
  const data::EpisodeStore store = moving_square_store(2, 6);
  TransporterTrainConfig tcfg;
  tcfg.steps = 5;
  tcfg.batch = 4;
  TransporterModel model = train_transporter(store, tiny_config(), tcfg, 77);
  save_transporter(model, path);

  TransporterModel back = load_transporter(path);
  CHECK(back.config().input_size == 20);
  CHECK(back.config().num_keypoints == 2);
  CHECK(back.config().sigma == doctest::Approx(0.2f));
  auto na = model.named_params(), nb = back.named_params();
  for (std::size_t i = 0; i < na.size(); ++i) {
    CHECK(na[i].first == nb[i].first);
    CHECK(hash_tensor(na[i].second->w) == hash_tensor(nb[i].second->w));
  }

  const Frame probe = moving_square_store(1, 1).episodes[0][0];
  const Tensor k1 = detect_keypoints(model, probe);
  const Tensor k2 = detect_keypoints(back, probe);
  for (std::size_t i = 0; i < k1.numel(); ++i) CHECK(k1[i] == k2[i]);

  SUBCASE("wrong checkpoint kind is rejected") {
    Checkpoint other;
    other.kind = "adapter";
    other.add_array("x", Tensor({1}, 0.0f));
    other.save(dir + "/o.ckpt");
    CHECK(throws_containing<std::runtime_error>(
        [&] { load_transporter(dir + "/o.ckpt"); }, "adapter"));
  }
  SUBCASE("missing file names the path") {
    CHECK(throws_containing<MissingArtifactError>(
        [&] { load_transporter(dir + "/nope.ckpt"); }, "nope.ckpt"));
  }
}
