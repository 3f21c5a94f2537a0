#include "vai/keypoint/transporter.hpp"

#include <cmath>
#include <stdexcept>

#include "vai/core/checkpoint.hpp"
#include "vai/core/errors.hpp"
#include "vai/nn/batch.hpp"

namespace vai::keypoint {

TransporterModel::TransporterModel(TransporterConfig cfg)
    : cfg_(cfg),
      psi1_(cfg.input_channels, cfg.base_channels, 3, 2, 1),
      psi2_(cfg.base_channels, 2 * cfg.base_channels, 3, 2, 1),
      psi3_(2 * cfg.base_channels, cfg.num_keypoints, 3, 1, 1),
      softargmax_(cfg.softmax_temperature),
      phi1_(cfg.input_channels, cfg.base_channels, 3, 2, 1),
      phi2_(cfg.base_channels, 2 * cfg.base_channels, 3, 2, 1),
      phi3_(2 * cfg.base_channels, cfg.feature_channels, 3, 1, 1),
      dec1_(cfg.feature_channels, 2 * cfg.base_channels, 3, 1, 1),
      dec2_(2 * cfg.base_channels, cfg.base_channels, 3, 1, 1),
      dec3_(cfg.base_channels, cfg.input_channels, 3, 1, 1),
      heatmap_(cfg.grid, cfg.grid, cfg.sigma) {
  if (cfg.input_size != cfg.grid * 4)
    throw std::invalid_argument("transporter: input_size must be 4x grid (two stride-2 stages), got " +
                                std::to_string(cfg.input_size) + " vs grid " +
                                std::to_string(cfg.grid));
}

void TransporterModel::init(Rng& rng) {
  psi1_.init(rng);
  psi2_.init(rng);
  psi3_.init(rng);
  phi1_.init(rng);
  phi2_.init(rng);
  phi3_.init(rng);
  dec1_.init(rng);
  dec2_.init(rng);
  dec3_.init(rng);
}

Tensor TransporterModel::keynet_forward(const Tensor& x) {
  Tensor h = psi_r1_.forward(psi1_.forward(x));
  h = psi_r2_.forward(psi2_.forward(h));
  Tensor logits = psi3_.forward(h);
  // Zero padding inflates responses along the outermost cells; a constant
  // offset keeps keypoint mass off that ring and passes gradients unchanged.
  const int gh = logits.dim(2), gw = logits.dim(3);
  for (int n = 0; n < logits.dim(0); ++n)
    for (int k = 0; k < logits.dim(1); ++k)
      for (int i = 0; i < gh; ++i)
        for (int j = 0; j < gw; ++j)
          if (i == 0 || j == 0 || i == gh - 1 || j == gw - 1) logits.at(n, k, i, j) -= 1e4f;
  return softargmax_.forward(logits);
}

Tensor TransporterModel::keynet_backward(const Tensor& dkp) {
  Tensor d = psi3_.backward(softargmax_.backward(dkp));
  d = psi2_.backward(psi_r2_.backward(d));
  return psi1_.backward(psi_r1_.backward(d));
}

Tensor TransporterModel::features_forward(const Tensor& x) {
  Tensor h = phi_r1_.forward(phi1_.forward(x));
  h = phi_r2_.forward(phi2_.forward(h));
  return phi3_.forward(h);
}

Tensor TransporterModel::features_backward(const Tensor& dfeat) {
  Tensor d = phi2_.backward(phi_r2_.backward(phi3_.backward(dfeat)));
  return phi1_.backward(phi_r1_.backward(d));
}

Tensor TransporterModel::decode(const Tensor& feat) {
  Tensor h = dec_r1_.forward(dec1_.forward(feat));
  h = nn::UpsampleNearest2x::forward(h);
  h = dec_r2_.forward(dec2_.forward(h));
  h = nn::UpsampleNearest2x::forward(h);
  return dec3_.forward(h);
}

Tensor TransporterModel::decode_backward(const Tensor& dy) {
  Tensor d = nn::UpsampleNearest2x::backward(dec3_.backward(dy));
  d = nn::UpsampleNearest2x::backward(dec2_.backward(dec_r2_.backward(d)));
  return dec1_.backward(dec_r1_.backward(d));
}

Tensor TransporterModel::render_heatmaps(const Tensor& keypoints) {
  return heatmap_.forward(keypoints);
}

Tensor TransporterModel::render_heatmaps_backward(const Tensor& dheat) {
  return heatmap_.backward(dheat);
}

void TransporterModel::set_sigma(float sigma) {
  if (sigma <= 0.0f) throw std::invalid_argument("set_sigma: sigma must be positive");
  cfg_.sigma = sigma;
  heatmap_ = nn::HeatmapRenderer(cfg_.grid, cfg_.grid, sigma);
}

std::vector<nn::Param*> TransporterModel::params() {
  std::vector<nn::Param*> out;
  for (auto& [name, p] : named_params()) out.push_back(p);
  return out;
}

std::vector<std::pair<std::string, nn::Param*>> TransporterModel::named_params() {
  return {
      {"psi1.weight", &psi1_.weight}, {"psi1.bias", &psi1_.bias},
      {"psi2.weight", &psi2_.weight}, {"psi2.bias", &psi2_.bias},
      {"psi3.weight", &psi3_.weight}, {"psi3.bias", &psi3_.bias},
      {"phi1.weight", &phi1_.weight}, {"phi1.bias", &phi1_.bias},
      {"phi2.weight", &phi2_.weight}, {"phi2.bias", &phi2_.bias},
      {"phi3.weight", &phi3_.weight}, {"phi3.bias", &phi3_.bias},
      {"dec1.weight", &dec1_.weight}, {"dec1.bias", &dec1_.bias},
      {"dec2.weight", &dec2_.weight}, {"dec2.bias", &dec2_.bias},
      {"dec3.weight", &dec3_.weight}, {"dec3.bias", &dec3_.bias},
  };
}

Tensor render_heatmap(const Tensor& keypoints, int grid_h, int grid_w, float sigma) {
  if (keypoints.rank() != 2 || keypoints.dim(1) != 2)
    throw std::invalid_argument("render_heatmap: keypoints must be {K,2}, got " +
                                keypoints.shape_str());
  const int k = keypoints.dim(0);
  if (k == 0) throw std::invalid_argument("render_heatmap: empty keypoint set");
  if (sigma <= 0.0f) throw std::invalid_argument("render_heatmap: sigma must be positive");
  Tensor heat({grid_h, grid_w});
  const float inv = 1.0f / (2.0f * sigma * sigma);
  for (int i = 0; i < grid_h; ++i) {
    const float cy = nn::HeatmapRenderer::cell_center(i, grid_h);
    for (int j = 0; j < grid_w; ++j) {
      const float cx = nn::HeatmapRenderer::cell_center(j, grid_w);
      float best = 0.0f;
      for (int q = 0; q < k; ++q) {
        const float dx = cx - keypoints.at(q, 0);
        const float dy = cy - keypoints.at(q, 1);
        best = std::max(best, std::exp(-(dx * dx + dy * dy) * inv));
      }
      heat.at(i, j) = best;
    }
  }
  return heat;
}

Tensor transport_features(const Tensor& feat_s, const Tensor& feat_t,
                          const Tensor& heat_s, const Tensor& heat_t) {
  require_same_shape(feat_s, feat_t, "transport_features: features");
  require_same_shape(heat_s, heat_t, "transport_features: heatmaps");
  if (feat_s.rank() != 3 || heat_s.rank() != 2)
    throw std::invalid_argument("transport_features: expected {g,g,F} features and {g,g} heatmaps");
  if (feat_s.dim(0) != heat_s.dim(0) || feat_s.dim(1) != heat_s.dim(1))
    throw std::invalid_argument("transport_features: grid mismatch, features " +
                                feat_s.shape_str() + " vs heatmaps " + heat_s.shape_str());
  const int g0 = feat_s.dim(0), g1 = feat_s.dim(1), f = feat_s.dim(2);
  Tensor out({g0, g1, f});
  for (int i = 0; i < g0; ++i)
    for (int j = 0; j < g1; ++j) {
      const float hs = heat_s.at(i, j), ht = heat_t.at(i, j);
      for (int c = 0; c < f; ++c)
        out.at(i, j, c) = feat_s.at(i, j, c) * (1.0f - hs) * (1.0f - ht) +
                          feat_t.at(i, j, c) * ht;
    }
  return out;
}

double reconstruction_loss(const Tensor& target, const Tensor& reconstruction) {
  require_same_shape(target, reconstruction, "reconstruction_loss");
  double acc = 0.0;
  for (std::size_t i = 0; i < target.numel(); ++i) {
    const double d = static_cast<double>(reconstruction[i]) - static_cast<double>(target[i]);
    acc += d * d;
  }
  return acc;
}

Tensor detect_keypoints(TransporterModel& model, const Frame& frame) {
  const auto& cfg = model.config();
  if (frame.rank() != 3 || frame.dim(0) != cfg.input_size || frame.dim(1) != cfg.input_size ||
      frame.dim(2) != cfg.input_channels)
    throw std::invalid_argument("detect_keypoints: expected (" + std::to_string(cfg.input_size) +
                                "," + std::to_string(cfg.input_size) + "," +
                                std::to_string(cfg.input_channels) + ") frame, got " +
                                frame.shape_str());
  const Tensor mu = model.keynet_forward(nn::to_nchw(frame));  // {1,K,2}
  Tensor out({cfg.num_keypoints, 2});
  for (int k = 0; k < cfg.num_keypoints; ++k) {
    out.at(k, 0) = mu.at(0, k, 0);
    out.at(k, 1) = mu.at(0, k, 1);
  }
  return out;
}

TransporterModel train_transporter(const data::EpisodeStore& store, const TransporterConfig& mcfg,
                                   const TransporterTrainConfig& tcfg, std::uint64_t seed,
                                   std::vector<double>* loss_log) {
  if (store.num_episodes() == 0) throw std::invalid_argument("train_transporter: empty store");

  TransporterModel model(mcfg);
  Rng init_rng = make_rng(seed, 21);
  model.init(init_rng);
  nn::Adam opt(model.params(), tcfg.lr);
  Rng sample_rng = make_rng(seed, 22);

  const int n = tcfg.batch;
  const int g = mcfg.grid;
  const int f = mcfg.feature_channels;

  const bool anneal = tcfg.sigma_start > 0.0f;
  for (int step = 0; step < tcfg.steps; ++step) {
    if (anneal) {
      const float t = tcfg.steps > 1
                          ? static_cast<float>(step) / static_cast<float>(tcfg.steps - 1)
                          : 1.0f;
      model.set_sigma(tcfg.sigma_start + (mcfg.sigma - tcfg.sigma_start) * t);
    }
    std::vector<Frame> src(n), tgt(n);
    for (int b = 0; b < n; ++b) {
      auto pair = data::sample_frame_pair(store, tcfg.cross_episode_prob, sample_rng);
      src[b] = std::move(pair.source);
      tgt[b] = std::move(pair.target);
    }
    std::vector<const Frame*> src_p(n), tgt_p(n);
    for (int b = 0; b < n; ++b) {
      src_p[b] = &src[b];
      tgt_p[b] = &tgt[b];
    }
    const Tensor xs = nn::to_nchw(src_p);
    const Tensor xt = nn::to_nchw(tgt_p);

    // source branch, no gradients
    const Tensor ks = model.keynet_forward(xs);
    const Tensor hs = model.render_heatmaps(ks);
    const Tensor fs = model.features_forward(xs);

    // target branch, cached for backward
    const Tensor kt = model.keynet_forward(xt);
    const Tensor ht = model.render_heatmaps(kt);
    const Tensor ft = model.features_forward(xt);

    Tensor mixed({n, f, g, g});
    for (int b = 0; b < n; ++b)
      for (int i = 0; i < g; ++i)
        for (int j = 0; j < g; ++j) {
          const float h_s = hs.at(b, 0, i, j), h_t = ht.at(b, 0, i, j);
          for (int c = 0; c < f; ++c)
            mixed.at(b, c, i, j) = fs.at(b, c, i, j) * (1.0f - h_s) * (1.0f - h_t) +
                                   ft.at(b, c, i, j) * h_t;
        }

    const Tensor recon = model.decode(mixed);
    const double loss = reconstruction_loss(xt, recon) / n;
    if (!std::isfinite(loss)) throw DivergenceError("transporter", step);
    if (loss_log) loss_log->push_back(loss);

    Tensor drecon(recon.shape);
    const float scale = 2.0f / static_cast<float>(n);
    for (std::size_t i = 0; i < recon.numel(); ++i)
      drecon[i] = scale * (recon[i] - xt[i]);

    const Tensor dmixed = model.decode_backward(drecon);

    Tensor dft({n, f, g, g});
    Tensor dht({n, 1, g, g});
    for (int b = 0; b < n; ++b)
      for (int i = 0; i < g; ++i)
        for (int j = 0; j < g; ++j) {
          const float h_s = hs.at(b, 0, i, j);
          float acc = 0.0f;
          for (int c = 0; c < f; ++c) {
            const float dm = dmixed.at(b, c, i, j);
            dft.at(b, c, i, j) = dm * ht.at(b, 0, i, j);
            acc += dm * (ft.at(b, c, i, j) - fs.at(b, c, i, j) * (1.0f - h_s));
          }
          dht.at(b, 0, i, j) = acc;
        }

    model.features_backward(dft);
    model.keynet_backward(model.render_heatmaps_backward(dht));

    opt.step();
    opt.zero_grad();
  }
  if (anneal) model.set_sigma(mcfg.sigma);
  return model;
}

void save_transporter(TransporterModel& model, const std::string& path) {
  const auto& cfg = model.config();
  Checkpoint ckpt;
  ckpt.kind = "transporter";
  ckpt.add_meta("input_size", std::to_string(cfg.input_size));
  ckpt.add_meta("input_channels", std::to_string(cfg.input_channels));
  ckpt.add_meta("num_keypoints", std::to_string(cfg.num_keypoints));
  ckpt.add_meta("sigma", std::to_string(cfg.sigma));
  ckpt.add_meta("grid", std::to_string(cfg.grid));
  ckpt.add_meta("feature_channels", std::to_string(cfg.feature_channels));
  ckpt.add_meta("base_channels", std::to_string(cfg.base_channels));
  ckpt.add_meta("softmax_temperature", std::to_string(cfg.softmax_temperature));
  for (auto& [name, p] : model.named_params()) ckpt.add_array(name, p->w);
  ckpt.save(path);
}

TransporterModel load_transporter(const std::string& path) {
  const Checkpoint ckpt = Checkpoint::load(path, "transporter");
  TransporterConfig cfg;
  cfg.input_size = std::stoi(ckpt.meta_value("input_size"));
  cfg.input_channels = std::stoi(ckpt.meta_value("input_channels"));
  cfg.num_keypoints = std::stoi(ckpt.meta_value("num_keypoints"));
  cfg.sigma = std::stof(ckpt.meta_value("sigma"));
  cfg.grid = std::stoi(ckpt.meta_value("grid"));
  cfg.feature_channels = std::stoi(ckpt.meta_value("feature_channels"));
  cfg.base_channels = std::stoi(ckpt.meta_value("base_channels"));
  cfg.softmax_temperature = std::stof(ckpt.meta_value("softmax_temperature"));
  TransporterModel model(cfg);
  for (auto& [name, p] : model.named_params()) {
    const Tensor& t = ckpt.array(name);
    require_same_shape(p->w, t, "load_transporter");
    p->w = t;
  }
  return model;
}

}  // namespace vai::keypoint
