#include <cmath>

#include "doctest.h"
#include "test_util.hpp"
#include "vai/core/checkpoint.hpp"
#include "vai/core/errors.hpp"
#include "vai/core/hash.hpp"
#include "vai/invariance/adapter.hpp"
#include "vai/nn/batch.hpp"

using namespace vai;
using namespace vai::invariance;

namespace {

AdapterConfig tiny_config(float lambda = 1.0f) {
  AdapterConfig cfg;
  cfg.input_size = 8;
  cfg.base_channels = 4;
  cfg.encoder_channels = 8;
  cfg.lambda = lambda;
  return cfg;
}

Tensor random_tensor(const std::vector<int>& shape, Rng& rng, float scale = 1.0f) {
  Tensor t(shape);
  for (auto& v : t.v) v = scale * (uniform(rng) - 0.5f);
  return t;
}

// One-frame dataset: a bright square on a dim background with its exact mask.
data::MaskedDataset square_dataset() {
  data::MaskedDataset ds;
  ds.store.environment_id = "spriteworld";
  ds.store.texture_id = "grid";
  Frame f({8, 8, 3}, 0.2f);
  Tensor m({8, 8});
  for (int y = 2; y < 6; ++y)
    for (int x = 2; x < 6; ++x) {
      for (int c = 0; c < 3; ++c) f.at(y, x, c) = 0.9f;
      m.at(y, x) = 1.0f;
    }
  ds.store.episodes.push_back({f});
  ds.masks.push_back({m});
  ds.threshold_used = 0.5f;
  return ds;
}

AugmentConfig raw_augment() {
  AugmentConfig cfg;
  cfg.enabled = false;
  cfg.crop = 8;
  cfg.pad = 0;
  return cfg;
}

}  // namespace

TEST_CASE("adapter_loss decomposes into mask and weighted feature terms") {
  Rng rng = make_rng(1);
  const Tensor pred = random_tensor({4, 4}, rng);
  const Tensor target = random_tensor({4, 4}, rng);
  const Tensor fs = random_tensor({4, 4}, rng);
  const Tensor ft = random_tensor({4, 4}, rng);

  double mask_term = 0.0, feat_term = 0.0;
  for (int i = 0; i < 16; ++i) {
    mask_term += (static_cast<double>(pred.v[i]) - target.v[i]) *
                 (static_cast<double>(pred.v[i]) - target.v[i]);
    feat_term += (static_cast<double>(fs.v[i]) - ft.v[i]) *
                 (static_cast<double>(fs.v[i]) - ft.v[i]);
  }

  CHECK(adapter_loss(pred, target, fs, ft, 1.0f) ==
        doctest::Approx(mask_term + feat_term).epsilon(1e-12));
  CHECK(adapter_loss(pred, target, fs, ft, 0.25f) ==
        doctest::Approx(mask_term + 0.25 * feat_term).epsilon(1e-12));
  CHECK(adapter_loss(pred, target, fs, ft, 0.0f) ==
        doctest::Approx(mask_term).epsilon(1e-12));
  CHECK(adapter_loss(pred, pred, fs, fs, 3.0f) == 0.0);

  // leading singleton dims on the prediction are accepted
  Tensor pred4({1, 1, 4, 4});
  pred4.v = pred.v;
  CHECK(adapter_loss(pred4, target, fs, ft, 1.0f) ==
        adapter_loss(pred, target, fs, ft, 1.0f));

  CHECK_THROWS_AS(adapter_loss(pred, Tensor({5, 5}), fs, ft, 1.0f), std::invalid_argument);
  CHECK_THROWS_AS(adapter_loss(pred, target, fs, Tensor({2, 8}), 1.0f), std::invalid_argument);
}

TEST_CASE("adapter_loss gradients match central differences at 4x4") {
  Rng rng = make_rng(2);
  const Tensor target = random_tensor({4, 4}, rng);
  const Tensor base_pred = random_tensor({4, 4}, rng);
  const Tensor base_fs = random_tensor({4, 4}, rng);
  const Tensor base_ft = random_tensor({4, 4}, rng);
  const float lambda = 0.7f;
  const double h = 1e-4;

  auto fd = [&](Tensor& slot, std::size_t i, const Tensor& pred, const Tensor& fs,
                const Tensor& ft) {
    const float keep = slot.v[i];
    slot.v[i] = keep + static_cast<float>(h);
    const double hi = static_cast<double>(slot.v[i]);
    const double lp = adapter_loss(pred, target, fs, ft, lambda);
    slot.v[i] = keep - static_cast<float>(h);
    const double lo = static_cast<double>(slot.v[i]);
    const double lm = adapter_loss(pred, target, fs, ft, lambda);
    slot.v[i] = keep;
    return (lp - lm) / (hi - lo);
  };

  for (std::size_t i = 0; i < 16; ++i) {
    Tensor pred = base_pred, fs = base_fs, ft = base_ft;

    const double g_pred = 2.0 * (static_cast<double>(pred.v[i]) - target.v[i]);
    const double fd_pred = fd(pred, i, pred, fs, ft);
    CHECK(std::abs(g_pred - fd_pred) <= 1e-3 * std::max(1.0, std::abs(g_pred)));

    const double diff = static_cast<double>(fs.v[i]) - ft.v[i];
    const double fd_fs = fd(fs, i, pred, fs, ft);
    CHECK(std::abs(2.0 * lambda * diff - fd_fs) <=
          1e-3 * std::max(1.0, std::abs(fd_fs)));
    const double fd_ft = fd(ft, i, pred, fs, ft);
    CHECK(std::abs(-2.0 * lambda * diff - fd_ft) <=
          1e-3 * std::max(1.0, std::abs(fd_ft)));
  }
}

TEST_CASE("adapter backward passes agree with directional finite differences") {
  AdapterModel model(tiny_config());
  Rng rng = make_rng(7);
  model.init(rng);

  auto directional = [&](auto&& fwd, auto&& bwd, const Tensor& x) {
    const Tensor y0 = fwd(x);
    const Tensor probe = random_tensor(y0.shape, rng);
    const Tensor dx = bwd(probe);
    const Tensor dir = random_tensor(x.shape, rng);
    double analytic = 0.0;
    for (std::size_t i = 0; i < dx.numel(); ++i)
      analytic += static_cast<double>(dx[i]) * static_cast<double>(dir[i]);
    const float h = 1e-2f;
    Tensor xp = x, xm = x;
    for (std::size_t i = 0; i < x.numel(); ++i) {
      xp.v[i] += h * dir[i];
      xm.v[i] -= h * dir[i];
    }
    const Tensor yp = fwd(xp), ym = fwd(xm);
    double lp = 0.0, lm = 0.0;
    for (std::size_t i = 0; i < yp.numel(); ++i) {
      lp += static_cast<double>(yp[i]) * probe[i];
      lm += static_cast<double>(ym[i]) * probe[i];
    }
    const double fd = (lp - lm) / (2.0 * h);
    CHECK(std::abs(analytic - fd) <=
          2e-2 * std::max({1.0, std::abs(analytic), std::abs(fd)}));
  };

  SUBCASE("encoder") {
    directional([&](const Tensor& t) { return model.encode(t); },
                [&](const Tensor& d) { return model.encode_backward(d); },
                random_tensor({1, 3, 8, 8}, rng));
  }
  SUBCASE("mask decoder") {
    directional([&](const Tensor& t) { return model.decode_mask(t); },
                [&](const Tensor& d) { return model.decode_mask_backward(d); },
                random_tensor({1, 8, 2, 2}, rng));
  }
}

TEST_CASE("predict_mask stays strictly inside (0,1) and checks shapes") {
  AdapterModel model(tiny_config());
  Rng rng = make_rng(4);
  model.init(rng);
  Frame f({8, 8, 3});
  for (auto& v : f.v) v = uniform(rng);

  const Tensor mask = model.predict_mask(f);
  REQUIRE(mask.shape == std::vector<int>{8, 8});
  for (float v : mask.v) {
    CHECK(v > 0.0f);
    CHECK(v < 1.0f);
  }

  CHECK(throws_containing<std::invalid_argument>(
      [&] { model.predict_mask(Frame({16, 16, 3})); }, "(8,8,3)"));
  CHECK(model.named_params().size() == 12);
}

TEST_CASE("training memorizes one masked square") {
  const data::MaskedDataset ds = square_dataset();
  AdapterTrainConfig tcfg;
  tcfg.steps = 200;
  tcfg.batch = 4;
  tcfg.lr = 3e-3f;
  std::vector<double> losses, mask_terms, feat_terms;
  AdapterModel model =
      train_adapter(ds, raw_augment(), tiny_config(), tcfg, 5, &losses, &mask_terms, &feat_terms);
  REQUIRE(static_cast<int>(losses.size()) == tcfg.steps);
  CHECK(losses.back() < 0.1 * losses.front());

  // the learned mask sides with the square
  const Tensor mask = model.predict_mask(ds.store.episodes[0][0]);
  double inside = 0.0, outside = 0.0;
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x)
      (ds.masks[0][0].at(y, x) > 0.5f ? inside : outside) += mask.at(y, x);
  CHECK(inside / 16.0 > outside / 48.0);
}

TEST_CASE("per-step logs decompose the loss; lambda 0 leaves the mask term") {
  const data::MaskedDataset ds = square_dataset();
  AdapterTrainConfig tcfg;
  tcfg.steps = 8;
  tcfg.batch = 2;

  std::vector<double> total, mask_t, feat_t;
  train_adapter(ds, raw_augment(), tiny_config(0.5f), tcfg, 6, &total, &mask_t, &feat_t);
  REQUIRE(total.size() == 8);
  for (std::size_t i = 0; i < total.size(); ++i)
    CHECK(total[i] == doctest::Approx(mask_t[i] + 0.5 * feat_t[i]).epsilon(1e-9));

  std::vector<double> total0, mask0, feat0;
  train_adapter(ds, raw_augment(), tiny_config(0.0f), tcfg, 6, &total0, &mask0, &feat0);
  for (std::size_t i = 0; i < total0.size(); ++i) {
    CHECK(total0[i] == doctest::Approx(mask0[i]).epsilon(1e-12));
    CHECK(feat0[i] >= 0.0);  // still reported, just unweighted
  }
}

TEST_CASE("adapter training is byte-deterministic for a fixed seed") {
  const data::MaskedDataset ds = square_dataset();
  AdapterTrainConfig tcfg;
  tcfg.steps = 6;
  tcfg.batch = 2;
  AugmentConfig acfg;  // full augmentation on
  acfg.crop = 8;
  acfg.pad = 2;

  std::vector<double> la, lb;
  AdapterModel a = train_adapter(ds, acfg, tiny_config(), tcfg, 12, &la);
  AdapterModel b = train_adapter(ds, acfg, tiny_config(), tcfg, 12, &lb);
  CHECK(la == lb);
  auto na = a.named_params(), nb = b.named_params();
  for (std::size_t i = 0; i < na.size(); ++i)
    CHECK(hash_tensor(na[i].second->w) == hash_tensor(nb[i].second->w));

  AdapterModel c = train_adapter(ds, acfg, tiny_config(), tcfg, 13);
  CHECK(hash_tensor(c.named_params()[0].second->w) != hash_tensor(na[0].second->w));
}

TEST_CASE("adapt_observation gates the frame by its predicted mask") {
  AdapterModel model(tiny_config());
  Rng rng = make_rng(9);
  model.init(rng);
  Frame f({8, 8, 3});
  for (auto& v : f.v) v = uniform(rng);
  f.at(0, 0, 0) = 0.0f;
  f.at(3, 3, 1) = 0.0f;

  const Tensor mask = model.predict_mask(f);
  const Frame adapted = adapt_observation(model, f);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x)
      for (int c = 0; c < 3; ++c)
        CHECK(adapted.at(y, x, c) == f.at(y, x, c) * mask.at(y, x));

  // zero pixels survive repeated adaptation
  const Frame twice = adapt_observation(model, adapted);
  CHECK(twice.at(0, 0, 0) == 0.0f);
  CHECK(twice.at(3, 3, 1) == 0.0f);
}

TEST_CASE("adapter checkpoints round trip bitwise") {
  const std::string dir = scratch("vai_test_ad_ckpt");
  const std::string path = dir + "/a.ckpt";
  AdapterModel model(tiny_config(0.25f));
  Rng rng = make_rng(20);
  model.init(rng);
  save_adapter(model, path);

  AdapterModel back = load_adapter(path);
  CHECK(back.config().input_size == 8);
  CHECK(back.config().lambda == 0.25f);
  auto na = model.named_params(), nb = back.named_params();
  for (std::size_t i = 0; i < na.size(); ++i) {
    CHECK(na[i].first == nb[i].first);
    CHECK(hash_tensor(na[i].second->w) == hash_tensor(nb[i].second->w));
  }

  Frame f({8, 8, 3}, 0.5f);
  const Tensor m1 = model.predict_mask(f);
  const Tensor m2 = back.predict_mask(f);
  for (std::size_t i = 0; i < m1.numel(); ++i) CHECK(m1[i] == m2[i]);

  Checkpoint other;
  other.kind = "transporter";
  other.add_array("x", Tensor({1}, 0.0f));
  other.save(dir + "/o.ckpt");
  CHECK(throws_containing<std::runtime_error>([&] { load_adapter(dir + "/o.ckpt"); },
                                              "transporter"));
  CHECK_THROWS_AS(load_adapter(dir + "/missing.ckpt"), MissingArtifactError);
}
