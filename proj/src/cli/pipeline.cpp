#include "vai/cli/pipeline.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "vai/attention/cde.hpp"
#include "vai/core/errors.hpp"
#include "vai/core/hash.hpp"
#include "vai/core/image_io.hpp"
#include "vai/data/store.hpp"
#include "vai/envs/spriteworld.hpp"
#include "vai/invariance/adapter.hpp"
#include "vai/invariance/augment.hpp"
#include "vai/keypoint/transporter.hpp"
#include "vai/policy/sac.hpp"

namespace vai::cli {

namespace fs = std::filesystem;

namespace {

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

std::uint64_t seed_of(const Config& cfg) {
  return static_cast<std::uint64_t>(cfg.get_int("seed"));
}

std::string out_dir(const Config& cfg) {
  const std::string dir = cfg.get_string("output_dir");
  fs::create_directories(dir);
  return dir;
}

// Content hash of a single file, or of a directory tree keyed by relative
// path so layout changes are detected too.
std::uint64_t hash_path(const std::string& path) {
  if (!fs::is_directory(path)) return hash_file(path);
  std::vector<std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(path))
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), path).generic_string());
  std::sort(files.begin(), files.end());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& rel : files) {
    h = fnv1a(rel.data(), rel.size(), h);
    const std::uint64_t fh = hash_file((fs::path(path) / rel).string());
    h = fnv1a(&fh, sizeof(fh), h);
  }
  return h;
}

using KeyValues = std::vector<std::pair<std::string, std::string>>;

// run.log holds one block per completed stage: resolved config, artifact
// hashes, wall time. Wall time makes the log itself non-reproducible, so
// determinism checks hash artifacts, never run.log.
void append_run_log(const Config& cfg, const std::string& command, const KeyValues& extra,
                    double wall_s) {
  std::ofstream log(out_dir(cfg) + "/run.log", std::ios::app);
  log << "[" << command << "]\n";
  std::istringstream lines(cfg.serialize());
  std::string line;
  while (std::getline(lines, line))
    if (!line.empty()) log << "  config." << line << "\n";
  for (const auto& [k, v] : extra) log << "  " << k << " = " << v << "\n";
  log << "  wall_time_s = " << std::fixed << std::setprecision(3) << wall_s << "\n\n";
}

envs::SpriteWorld make_env(const Config& cfg, const std::string& texture_override) {
  const std::string name = cfg.get_string("environment.name");
  if (name != envs::SpriteWorld::kEnvironmentId)
    throw ConfigError("unknown environment: " + name);
  envs::SpriteWorldConfig ec;
  ec.size = cfg.get_int("environment.size");
  ec.episode_len = cfg.get_int("environment.episode_len");
  ec.texture =
      texture_override.empty() ? cfg.get_string("environment.texture") : texture_override;
  return envs::SpriteWorld(ec);
}

keypoint::TransporterConfig transporter_config(const Config& cfg) {
  keypoint::TransporterConfig mc;
  mc.input_size = cfg.get_int("environment.size");
  mc.num_keypoints = cfg.get_int("transporter.num_keypoints");
  mc.sigma = static_cast<float>(cfg.get_real("transporter.sigma"));
  mc.grid = cfg.get_int("transporter.grid");
  mc.feature_channels = cfg.get_int("transporter.feature_channels");
  mc.base_channels = cfg.get_int("transporter.base_channels");
  mc.softmax_temperature = static_cast<float>(cfg.get_real("transporter.softmax_temperature"));
  return mc;
}

invariance::AdapterConfig adapter_config(const Config& cfg) {
  invariance::AdapterConfig mc;
  mc.input_size = cfg.get_int("augmentation.crop");
  mc.base_channels = cfg.get_int("adapter.base_channels");
  mc.encoder_channels = cfg.get_int("adapter.encoder_channels");
  mc.lambda = static_cast<float>(cfg.get_real("adapter.lambda"));
  return mc;
}

policy::PolicyTrainConfig policy_config(const Config& cfg) {
  policy::PolicyTrainConfig pc;
  pc.steps = cfg.get_int("policy.steps");
  pc.start_steps = cfg.get_int("policy.start_steps");
  pc.update_every = cfg.get_int("policy.update_every");
  pc.updates_per_step = cfg.get_int("policy.updates_per_step");
  pc.batch = cfg.get_int("policy.batch");
  pc.replay_capacity = cfg.get_int("policy.replay_capacity");
  pc.frame_stack = cfg.get_int("policy.frame_stack");
  pc.action_repeat = cfg.get_int("environment.action_repeat");
  pc.use_weak_augment = cfg.get_bool("policy.weak_augment");
  pc.weak.noise_std = static_cast<float>(cfg.get_real("policy.weak_noise_std"));
  pc.weak.mco_min_boxes = cfg.get_int("policy.weak_mco_min_boxes");
  pc.weak.mco_max_boxes = cfg.get_int("policy.weak_mco_max_boxes");
  pc.weak.mco_min_size = cfg.get_int("policy.weak_mco_min_size");
  pc.weak.mco_max_size = cfg.get_int("policy.weak_mco_max_size");
  pc.sac.obs_size = cfg.get_int("environment.size");
  pc.sac.obs_channels = 3 * pc.frame_stack;
  pc.sac.action_dim = 2;
  pc.sac.hidden = cfg.get_int("policy.hidden");
  pc.sac.feature_dim = cfg.get_int("policy.encoder_feature_dim");
  pc.sac.lr = static_cast<float>(cfg.get_real("policy.lr"));
  pc.sac.discount = static_cast<float>(cfg.get_real("policy.discount"));
  pc.sac.tau = static_cast<float>(cfg.get_real("policy.tau"));
  pc.sac.init_temperature = static_cast<float>(cfg.get_real("policy.init_temperature"));
  return pc;
}

std::vector<const Frame*> flat_frames(const data::EpisodeStore& store) {
  std::vector<const Frame*> flat;
  for (const auto& ep : store.episodes)
    for (const auto& f : ep) flat.push_back(&f);
  return flat;
}

std::vector<const Frame*> evenly_spaced(const std::vector<const Frame*>& flat, int want) {
  const int total = static_cast<int>(flat.size());
  if (want >= total) return flat;
  std::vector<const Frame*> picked;
  picked.reserve(static_cast<std::size_t>(want));
  for (int i = 0; i < want; ++i)
    picked.push_back(flat[static_cast<std::size_t>(i) * total / want]);
  return picked;
}

std::string sanitize(const std::string& s) {
  std::string r = s;
  for (char& c : r)
    if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
  return r;
}

std::unique_ptr<invariance::AdapterModel> maybe_load_adapter(const Config& cfg) {
  if (!cfg.get_bool("policy.use_adapter")) return nullptr;
  return std::make_unique<invariance::AdapterModel>(invariance::load_adapter(adapter_path(cfg)));
}

std::ofstream open_artifact(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << std::setprecision(17);
  return f;
}

}  // namespace

std::string dataset_dir(const Config& cfg) { return cfg.get_string("output_dir") + "/dataset"; }
std::string masks_dir(const Config& cfg) { return cfg.get_string("output_dir") + "/masks"; }
std::string transporter_path(const Config& cfg) {
  return cfg.get_string("output_dir") + "/transporter.ckpt";
}
std::string adapter_path(const Config& cfg) {
  return cfg.get_string("output_dir") + "/adapter.ckpt";
}
std::string policy_path(const Config& cfg) {
  return cfg.get_string("output_dir") + "/policy.ckpt";
}

void run_collect(const Config& cfg) {
  Timer t;
  out_dir(cfg);
  envs::SpriteWorld env = make_env(cfg, "");
  const data::EpisodeStore store =
      data::collect_random_transitions(env, cfg.get_int("dataset.count"), seed_of(cfg));
  const std::string dir = dataset_dir(cfg);
  data::save_store(store, dir);
  append_run_log(cfg, "collect",
                 {{"frames", std::to_string(store.total_frames())},
                  {"episodes", std::to_string(store.num_episodes())},
                  {"output.dataset", hash_hex(hash_path(dir))}},
                 t.seconds());
  std::cout << "collect: " << store.total_frames() << " frames in " << store.num_episodes()
            << " episodes -> " << dir << "\n";
}

void run_train_keypoints(const Config& cfg) {
  Timer t;
  out_dir(cfg);
  const data::EpisodeStore store = data::load_store(dataset_dir(cfg));
  keypoint::TransporterTrainConfig tc;
  tc.steps = cfg.get_int("transporter.steps");
  tc.batch = cfg.get_int("transporter.batch");
  tc.lr = static_cast<float>(cfg.get_real("transporter.lr"));
  tc.cross_episode_prob = cfg.get_real("transporter.cross_episode_prob");
  std::vector<double> losses;
  keypoint::TransporterModel model =
      keypoint::train_transporter(store, transporter_config(cfg), tc, seed_of(cfg), &losses);
  keypoint::save_transporter(model, transporter_path(cfg));
  {
    std::ofstream f = open_artifact(cfg.get_string("output_dir") + "/transporter_loss.txt");
    for (std::size_t i = 0; i < losses.size(); ++i) f << i << " " << losses[i] << "\n";
  }
  append_run_log(cfg, "train-keypoints",
                 {{"input.dataset", hash_hex(hash_path(dataset_dir(cfg)))},
                  {"output.transporter", hash_hex(hash_path(transporter_path(cfg)))}},
                 t.seconds());
  std::cout << "train-keypoints: " << losses.size() << " steps, final loss "
            << (losses.empty() ? 0.0 : losses.back()) << " -> " << transporter_path(cfg) << "\n";
}

void run_extract_masks(const Config& cfg) {
  Timer t;
  out_dir(cfg);
  const data::EpisodeStore store = data::load_store(dataset_dir(cfg));
  keypoint::TransporterModel model = keypoint::load_transporter(transporter_path(cfg));
  const double eps_cfg = cfg.get_real("attention.epsilon");
  float eps;
  if (eps_cfg >= 0.0) {
    eps = static_cast<float>(eps_cfg);
  } else {
    const std::vector<const Frame*> calib =
        evenly_spaced(flat_frames(store), cfg.get_int("attention.calibration_frames"));
    eps = attention::calibrate_epsilon(model, calib, cfg.get_real("attention.quantile"));
  }
  const data::MaskedDataset ds = attention::extract_masked_dataset(model, store, eps);
  data::save_masked_dataset(ds, masks_dir(cfg));
  std::ostringstream eps_str;
  eps_str << std::setprecision(17) << eps;
  append_run_log(cfg, "extract-masks",
                 {{"input.dataset", hash_hex(hash_path(dataset_dir(cfg)))},
                  {"input.transporter", hash_hex(hash_path(transporter_path(cfg)))},
                  {"epsilon", eps_str.str()},
                  {"output.masks", hash_hex(hash_path(masks_dir(cfg)))}},
                 t.seconds());
  std::cout << "extract-masks: epsilon " << eps << ", " << store.total_frames() << " masks -> "
            << masks_dir(cfg) << "\n";
}

void run_train_adapter(const Config& cfg) {
  Timer t;
  out_dir(cfg);
  const data::MaskedDataset ds = data::load_masked_dataset(masks_dir(cfg));
  const invariance::AugmentConfig acfg = invariance::AugmentConfig::from_config(cfg);
  invariance::AdapterTrainConfig tc;
  tc.steps = cfg.get_int("adapter.steps");
  tc.batch = cfg.get_int("adapter.batch");
  tc.lr = static_cast<float>(cfg.get_real("adapter.lr"));
  std::vector<double> total, mask_term, feat_term;
  invariance::AdapterModel model = invariance::train_adapter(
      ds, acfg, adapter_config(cfg), tc, seed_of(cfg), &total, &mask_term, &feat_term);
  invariance::save_adapter(model, adapter_path(cfg));
  {
    std::ofstream f = open_artifact(cfg.get_string("output_dir") + "/adapter_loss.txt");
    for (std::size_t i = 0; i < total.size(); ++i)
      f << i << " " << total[i] << " " << mask_term[i] << " " << feat_term[i] << "\n";
  }
  append_run_log(cfg, "train-adapter",
                 {{"input.masks", hash_hex(hash_path(masks_dir(cfg)))},
                  {"output.adapter", hash_hex(hash_path(adapter_path(cfg)))}},
                 t.seconds());
  std::cout << "train-adapter: " << total.size() << " steps, final loss "
            << (total.empty() ? 0.0 : total.back()) << " -> " << adapter_path(cfg) << "\n";
}

void run_train_policy(const Config& cfg) {
  Timer t;
  out_dir(cfg);
  envs::SpriteWorld env = make_env(cfg, "");
  std::unique_ptr<invariance::AdapterModel> adapter = maybe_load_adapter(cfg);
  std::vector<double> episode_rewards;
  std::unique_ptr<policy::SacAgent> agent =
      policy::train_policy(env, adapter.get(), policy_config(cfg), seed_of(cfg),
                           &episode_rewards, nullptr);
  policy::save_sac(*agent, policy_path(cfg));
  {
    std::ofstream f = open_artifact(cfg.get_string("output_dir") + "/policy_rewards.txt");
    for (std::size_t i = 0; i < episode_rewards.size(); ++i)
      f << i << " " << episode_rewards[i] << "\n";
  }
  KeyValues kv;
  if (adapter) kv.push_back({"input.adapter", hash_hex(hash_path(adapter_path(cfg)))});
  kv.push_back({"episodes", std::to_string(episode_rewards.size())});
  kv.push_back({"output.policy", hash_hex(hash_path(policy_path(cfg)))});
  append_run_log(cfg, "train-policy", kv, t.seconds());
  std::cout << "train-policy: " << episode_rewards.size() << " episodes, last reward "
            << (episode_rewards.empty() ? 0.0 : episode_rewards.back()) << " -> "
            << policy_path(cfg) << "\n";
}

void run_evaluate(const Config& cfg) {
  Timer t;
  out_dir(cfg);
  const std::string texture_key = cfg.get_string("evaluation.texture").empty()
                                      ? cfg.get_string("environment.texture")
                                      : cfg.get_string("evaluation.texture");
  envs::SpriteWorld env = make_env(cfg, texture_key);
  std::unique_ptr<policy::SacAgent> agent = policy::load_sac(policy_path(cfg));
  std::unique_ptr<invariance::AdapterModel> adapter = maybe_load_adapter(cfg);
  const int seeds = cfg.get_int("evaluation.seeds");
  const int episodes = cfg.get_int("evaluation.episodes");
  const policy::EvalResult res = policy::evaluate_policy(
      env, *agent, adapter.get(), seeds, episodes, cfg.get_int("policy.frame_stack"),
      cfg.get_int("environment.action_repeat"),
      static_cast<float>(cfg.get_real("evaluation.denoise_alpha")),
      static_cast<float>(cfg.get_real("evaluation.denoise_beta")));

  const std::string metrics_path =
      cfg.get_string("output_dir") + "/eval_" + sanitize(texture_key) + ".txt";
  {
    std::ofstream f = open_artifact(metrics_path);
    f << "texture = " << texture_key << "\n";
    f << "seeds = " << seeds << "\n";
    f << "episodes = " << episodes << "\n";
    f << "reward_mean = " << res.reward_mean << "\n";
    f << "reward_std = " << res.reward_std << "\n";
    f << "success_mean = " << res.success_mean << "\n";
    f << "success_std = " << res.success_std << "\n";
    for (int s = 0; s < seeds; ++s) {
      f << "seed." << s << ".mean_reward = " << res.seed_mean_reward[s] << "\n";
      f << "seed." << s << ".mean_success = " << res.seed_mean_success[s] << "\n";
    }
    for (int s = 0; s < seeds; ++s)
      for (int e = 0; e < episodes; ++e)
        f << "seed." << s << ".episode." << e << ".reward = " << res.rewards[s][e] << "\n";
  }
  append_run_log(cfg, "evaluate",
                 {{"input.policy", hash_hex(hash_path(policy_path(cfg)))},
                  {"texture", texture_key},
                  {"output.metrics", hash_hex(hash_path(metrics_path))}},
                 t.seconds());
  std::cout << std::setprecision(6) << "evaluate: texture=" << texture_key << " reward "
            << res.reward_mean << " +/- " << res.reward_std << ", success " << res.success_mean
            << " +/- " << res.success_std << " (" << seeds << " seeds x " << episodes
            << " episodes) -> " << metrics_path << "\n";
}

namespace {

// Paints src into dst at tile (row, col) of a grid of H x W images.
void blit(Tensor& dst, const Frame& src, int row, int col) {
  const int h = src.dim(0), w = src.dim(1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) dst.at(row * h + y, col * w + x, c) = src.at(y, x, c);
}

void draw_cross(Frame& img, float fx, float fy, const std::array<float, 3>& color) {
  const int h = img.dim(0), w = img.dim(1);
  const int cx = std::clamp(static_cast<int>(fx * w), 0, w - 1);
  const int cy = std::clamp(static_cast<int>(fy * h), 0, h - 1);
  for (int d = -3; d <= 3; ++d) {
    const int x = std::clamp(cx + d, 0, w - 1);
    const int y = std::clamp(cy + d, 0, h - 1);
    for (int c = 0; c < 3; ++c) {
      img.at(cy, x, c) = color[static_cast<std::size_t>(c)];
      img.at(y, cx, c) = color[static_cast<std::size_t>(c)];
    }
  }
}

}  // namespace

void run_visualize(const Config& cfg, const std::vector<std::string>& inputs) {
  Timer t;
  out_dir(cfg);
  invariance::AdapterModel adapter = invariance::load_adapter(adapter_path(cfg));

  std::vector<Frame> frames;
  if (inputs.empty()) {
    const data::EpisodeStore store = data::load_store(dataset_dir(cfg));
    const std::vector<const Frame*> flat = flat_frames(store);
    const std::size_t n = std::min<std::size_t>(flat.size(), 6);
    for (std::size_t i = 0; i < n; ++i) frames.push_back(*flat[i]);
  } else {
    for (const std::string& path : inputs) {
      try {
        frames.push_back(load_ppm(path));
      } catch (const std::exception& e) {
        std::cerr << "warning: skipping " << path << ": " << e.what() << "\n";
      }
    }
  }
  if (frames.empty()) throw ConfigError("visualize: no readable input frames");

  const int n = static_cast<int>(frames.size());
  const int h = frames[0].dim(0), w = frames[0].dim(1);
  for (const Frame& f : frames)
    if (f.dim(0) != h || f.dim(1) != w)
      throw ConfigError("visualize: input frames have mixed sizes");

  Tensor pair_grid({2 * h, n * w, 3});
  for (int i = 0; i < n; ++i) {
    blit(pair_grid, frames[static_cast<std::size_t>(i)], 0, i);
    blit(pair_grid, invariance::adapt_observation(adapter, frames[static_cast<std::size_t>(i)]),
         1, i);
  }
  const std::string pair_path = cfg.get_string("output_dir") + "/viz_adapted.ppm";
  save_ppm(pair_path, pair_grid);
  KeyValues kv{{"frames", std::to_string(n)}, {"output.adapted", hash_hex(hash_path(pair_path))}};
  std::cout << "visualize: wrote " << pair_path << "\n";

  // Keypoint and attention-mask overlays when a trained detector is present.
  if (fs::exists(transporter_path(cfg))) {
    keypoint::TransporterModel model = keypoint::load_transporter(transporter_path(cfg));
    const double eps_cfg = cfg.get_real("attention.epsilon");
    float eps;
    if (eps_cfg >= 0.0) {
      eps = static_cast<float>(eps_cfg);
    } else {
      std::vector<const Frame*> refs;
      for (const Frame& f : frames) refs.push_back(&f);
      eps = attention::calibrate_epsilon(model, refs, cfg.get_real("attention.quantile"));
    }
    Tensor overlay_grid({2 * h, n * w, 3});
    for (int i = 0; i < n; ++i) {
      const Frame& raw = frames[static_cast<std::size_t>(i)];
      Frame kp_img = raw;
      const Tensor kps = keypoint::detect_keypoints(model, raw);  // {K,2} as (x,y)
      for (int k = 0; k < kps.dim(0); ++k)
        draw_cross(kp_img, kps.at(k, 0), kps.at(k, 1), {0.0f, 1.0f, 0.0f});
      blit(overlay_grid, kp_img, 0, i);

      const attention::BinaryMask mask = attention::threshold_mask(
          attention::compute_cde(model, raw), eps);
      Frame mask_img = raw;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          if (mask.values.at(y, x) > 0.5f) {
            mask_img.at(y, x, 0) = 0.5f * raw.at(y, x, 0) + 0.5f;
            mask_img.at(y, x, 1) = 0.5f * raw.at(y, x, 1);
            mask_img.at(y, x, 2) = 0.5f * raw.at(y, x, 2);
          }
      blit(overlay_grid, mask_img, 1, i);
    }
    const std::string overlay_path = cfg.get_string("output_dir") + "/viz_overlay.ppm";
    save_ppm(overlay_path, overlay_grid);
    kv.push_back({"output.overlay", hash_hex(hash_path(overlay_path))});
    std::cout << "visualize: wrote " << overlay_path << "\n";
  }
  append_run_log(cfg, "visualize", kv, t.seconds());
}

}  // namespace vai::cli
