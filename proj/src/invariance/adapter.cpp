#include "vai/invariance/adapter.hpp"

#include <cmath>
#include <stdexcept>

#include "vai/core/checkpoint.hpp"
#include "vai/core/errors.hpp"
#include "vai/nn/batch.hpp"

namespace vai::invariance {

AdapterModel::AdapterModel(AdapterConfig cfg)
    : cfg_(cfg),
      enc1_(cfg.input_channels, cfg.base_channels, 3, 2, 1),
      enc2_(cfg.base_channels, 2 * cfg.base_channels, 3, 2, 1),
      enc3_(2 * cfg.base_channels, cfg.encoder_channels, 3, 1, 1),
      dec1_(cfg.encoder_channels, 2 * cfg.base_channels, 3, 1, 1),
      dec2_(2 * cfg.base_channels, cfg.base_channels, 3, 1, 1),
      dec3_(cfg.base_channels, 1, 3, 1, 1) {
  if (cfg.input_size % 4 != 0)
    throw std::invalid_argument("adapter: input_size must be divisible by 4, got " +
                                std::to_string(cfg.input_size));
}

void AdapterModel::init(Rng& rng) {
  enc1_.init(rng);
  enc2_.init(rng);
  enc3_.init(rng);
  dec1_.init(rng);
  dec2_.init(rng);
  dec3_.init(rng);
}

Tensor AdapterModel::encode(const Tensor& x) {
  Tensor h = enc_r1_.forward(enc1_.forward(x));
  h = enc_r2_.forward(enc2_.forward(h));
  return enc3_.forward(h);
}

Tensor AdapterModel::encode_backward(const Tensor& dfeat) {
  Tensor d = enc2_.backward(enc_r2_.backward(enc3_.backward(dfeat)));
  return enc1_.backward(enc_r1_.backward(d));
}

Tensor AdapterModel::decode_mask(const Tensor& feat) {
  Tensor h = dec_r1_.forward(dec1_.forward(feat));
  h = nn::UpsampleNearest2x::forward(h);
  h = dec_r2_.forward(dec2_.forward(h));
  h = nn::UpsampleNearest2x::forward(h);
  return dec_sig_.forward(dec3_.forward(h));
}

Tensor AdapterModel::decode_mask_backward(const Tensor& dy) {
  Tensor d = nn::UpsampleNearest2x::backward(dec3_.backward(dec_sig_.backward(dy)));
  d = nn::UpsampleNearest2x::backward(dec2_.backward(dec_r2_.backward(d)));
  return dec1_.backward(dec_r1_.backward(d));
}

Tensor AdapterModel::predict_mask(const Frame& frame) {
  if (frame.rank() != 3 || frame.dim(0) != cfg_.input_size || frame.dim(1) != cfg_.input_size ||
      frame.dim(2) != cfg_.input_channels)
    throw std::invalid_argument("predict_mask: expected (" + std::to_string(cfg_.input_size) +
                                "," + std::to_string(cfg_.input_size) + "," +
                                std::to_string(cfg_.input_channels) + ") frame, got " +
                                frame.shape_str());
  const Tensor out = decode_mask(encode(nn::to_nchw(frame)));
  Tensor mask({cfg_.input_size, cfg_.input_size});
  for (int y = 0; y < cfg_.input_size; ++y)
    for (int x = 0; x < cfg_.input_size; ++x) mask.at(y, x) = out.at(0, 0, y, x);
  return mask;
}

std::vector<nn::Param*> AdapterModel::params() {
  std::vector<nn::Param*> out;
  for (auto& [name, p] : named_params()) out.push_back(p);
  return out;
}

std::vector<std::pair<std::string, nn::Param*>> AdapterModel::named_params() {
  return {
      {"enc1.weight", &enc1_.weight}, {"enc1.bias", &enc1_.bias},
      {"enc2.weight", &enc2_.weight}, {"enc2.bias", &enc2_.bias},
      {"enc3.weight", &enc3_.weight}, {"enc3.bias", &enc3_.bias},
      {"dec1.weight", &dec1_.weight}, {"dec1.bias", &dec1_.bias},
      {"dec2.weight", &dec2_.weight}, {"dec2.bias", &dec2_.bias},
      {"dec3.weight", &dec3_.weight}, {"dec3.bias", &dec3_.bias},
  };
}

double adapter_loss(const Tensor& mask_pred, const Tensor& target_mask,
                    const Tensor& feat_s, const Tensor& feat_t, float lambda) {
  if (mask_pred.numel() != target_mask.numel())
    throw std::invalid_argument("adapter_loss: mask prediction " + mask_pred.shape_str() +
                                " vs target " + target_mask.shape_str());
  require_same_shape(feat_s, feat_t, "adapter_loss: features");
  double mask_term = 0.0;
  for (std::size_t i = 0; i < mask_pred.numel(); ++i) {
    const double d = static_cast<double>(mask_pred[i]) - static_cast<double>(target_mask[i]);
    mask_term += d * d;
  }
  double feat_term = 0.0;
  for (std::size_t i = 0; i < feat_s.numel(); ++i) {
    const double d = static_cast<double>(feat_s[i]) - static_cast<double>(feat_t[i]);
    feat_term += d * d;
  }
  return mask_term + static_cast<double>(lambda) * feat_term;
}

double adapter_loss(AdapterModel& model, const TrainingPair& pair) {
  const Tensor feat_s = model.encode(nn::to_nchw(pair.noisy));
  const Tensor pred = model.decode_mask(feat_s);
  const Tensor feat_t = model.encode(nn::to_nchw(pair.clean));
  return adapter_loss(pred, pair.target_mask, feat_s, feat_t, model.config().lambda);
}

AdapterModel train_adapter(const data::MaskedDataset& dataset, const AugmentConfig& acfg,
                           const AdapterConfig& mcfg, const AdapterTrainConfig& tcfg,
                           std::uint64_t seed, std::vector<double>* loss_log,
                           std::vector<double>* mask_term_log, std::vector<double>* feat_term_log) {
  const int total = dataset.total_frames();
  if (total == 0) throw std::invalid_argument("train_adapter: empty dataset");

  // flat view of (frame, mask) pairs
  std::vector<const Frame*> frames;
  std::vector<const Tensor*> masks;
  for (std::size_t e = 0; e < dataset.store.episodes.size(); ++e)
    for (std::size_t f = 0; f < dataset.store.episodes[e].size(); ++f) {
      frames.push_back(&dataset.store.episodes[e][f]);
      masks.push_back(&dataset.masks[e][f]);
    }

  const Frame plate = estimate_background(dataset.store);

  AdapterModel model(mcfg);
  Rng init_rng = make_rng(seed, 31);
  model.init(init_rng);
  nn::Adam opt(model.params(), tcfg.lr);
  Rng aug_rng = make_rng(seed, 32);

  const int b = tcfg.batch;
  const float lambda = mcfg.lambda;

  for (int step = 0; step < tcfg.steps; ++step) {
    std::vector<TrainingPair> pairs;
    pairs.reserve(b);
    for (int i = 0; i < b; ++i) {
      const int pick = uniform_int(aug_rng, 0, total - 1);
      pairs.push_back(make_training_pair(*frames[pick], *masks[pick], plate, acfg, aug_rng));
    }

    // one encoder pass over [noisy; clean] so backward covers both branches
    std::vector<const Frame*> both(2 * b);
    for (int i = 0; i < b; ++i) {
      both[i] = &pairs[static_cast<std::size_t>(i)].noisy;
      both[b + i] = &pairs[static_cast<std::size_t>(i)].clean;
    }
    const Tensor feat = model.encode(nn::to_nchw(both));  // {2b,E,g,g}
    const int eh = feat.dim(2), ew = feat.dim(3), ec = feat.dim(1);

    Tensor feat_s({b, ec, eh, ew});
    for (int i = 0; i < b; ++i)
      for (int c = 0; c < ec; ++c)
        for (int y = 0; y < eh; ++y)
          for (int x = 0; x < ew; ++x) feat_s.at(i, c, y, x) = feat.at(i, c, y, x);
    const Tensor pred = model.decode_mask(feat_s);  // {b,1,H,W}

    double mask_term = 0.0, feat_term = 0.0;
    const int hw = pred.dim(2) * pred.dim(3);
    Tensor dpred(pred.shape);
    for (int i = 0; i < b; ++i) {
      const Tensor& m = pairs[static_cast<std::size_t>(i)].target_mask;
      for (int p = 0; p < hw; ++p) {
        const double d = static_cast<double>(pred[static_cast<std::size_t>(i) * hw + p]) -
                         static_cast<double>(m[static_cast<std::size_t>(p)]);
        mask_term += d * d;
        dpred[static_cast<std::size_t>(i) * hw + p] = static_cast<float>(2.0 * d / b);
      }
    }
    Tensor dfeat(feat.shape);
    const std::size_t per = static_cast<std::size_t>(ec) * eh * ew;
    for (int i = 0; i < b; ++i)
      for (std::size_t p = 0; p < per; ++p) {
        const std::size_t si = static_cast<std::size_t>(i) * per + p;
        const std::size_t ti = static_cast<std::size_t>(b + i) * per + p;
        const double d = static_cast<double>(feat[si]) - static_cast<double>(feat[ti]);
        feat_term += d * d;
        dfeat[si] = static_cast<float>(2.0 * lambda * d / b);
        dfeat[ti] = static_cast<float>(-2.0 * lambda * d / b);
      }

    const double loss = (mask_term + static_cast<double>(lambda) * feat_term) / b;
    if (!std::isfinite(loss)) throw DivergenceError("adapter", step);
    if (loss_log) loss_log->push_back(loss);
    if (mask_term_log) mask_term_log->push_back(mask_term / b);
    if (feat_term_log) feat_term_log->push_back(feat_term / b);

    const Tensor dfeat_s = model.decode_mask_backward(dpred);  // {b,E,g,g}
    for (int i = 0; i < b; ++i)
      for (std::size_t p = 0; p < per; ++p)
        dfeat[static_cast<std::size_t>(i) * per + p] += dfeat_s[static_cast<std::size_t>(i) * per + p];

    model.encode_backward(dfeat);
    opt.step();
    opt.zero_grad();
  }
  return model;
}

Frame adapt_observation(AdapterModel& model, const Frame& frame) {
  const Tensor mask = model.predict_mask(frame);
  Frame out = frame;
  const int h = frame.dim(0), w = frame.dim(1), c = frame.dim(2);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch) out.at(y, x, ch) = frame.at(y, x, ch) * mask.at(y, x);
  return out;
}

void save_adapter(AdapterModel& model, const std::string& path) {
  const auto& cfg = model.config();
  Checkpoint ckpt;
  ckpt.kind = "adapter";
  ckpt.add_meta("input_size", std::to_string(cfg.input_size));
  ckpt.add_meta("input_channels", std::to_string(cfg.input_channels));
  ckpt.add_meta("base_channels", std::to_string(cfg.base_channels));
  ckpt.add_meta("encoder_channels", std::to_string(cfg.encoder_channels));
  ckpt.add_meta("lambda", std::to_string(cfg.lambda));
  for (auto& [name, p] : model.named_params()) ckpt.add_array(name, p->w);
  ckpt.save(path);
}

AdapterModel load_adapter(const std::string& path) {
  const Checkpoint ckpt = Checkpoint::load(path, "adapter");
  AdapterConfig cfg;
  cfg.input_size = std::stoi(ckpt.meta_value("input_size"));
  cfg.input_channels = std::stoi(ckpt.meta_value("input_channels"));
  cfg.base_channels = std::stoi(ckpt.meta_value("base_channels"));
  cfg.encoder_channels = std::stoi(ckpt.meta_value("encoder_channels"));
  cfg.lambda = std::stof(ckpt.meta_value("lambda"));
  AdapterModel model(cfg);
  for (auto& [name, p] : model.named_params()) {
    const Tensor& t = ckpt.array(name);
    require_same_shape(p->w, t, "load_adapter");
    p->w = t;
  }
  return model;
}

}  // namespace vai::invariance
