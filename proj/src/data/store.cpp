#include "vai/data/store.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "vai/core/errors.hpp"
#include "vai/core/image_io.hpp"

namespace fs = std::filesystem;

namespace vai::data {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::map<std::string, std::string> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError(path, "dataset manifest not found");
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected key = value");
    kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return kv;
}

const std::string& manifest_get(const std::map<std::string, std::string>& kv,
                                const std::string& key, const std::string& path) {
  auto it = kv.find(key);
  if (it == kv.end()) throw std::runtime_error(path + ": manifest missing key '" + key + "'");
  return it->second;
}

std::string index_name(const char* prefix, int i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%04d%s", prefix, i, ext);
  return buf;
}

void write_manifest(const EpisodeStore& store, const std::string& dir,
                    const float* mask_threshold) {
  const int h = store.episodes.empty() || store.episodes[0].empty() ? 0 : store.episodes[0][0].dim(0);
  const int w = h == 0 ? 0 : store.episodes[0][0].dim(1);
  const int c = h == 0 ? 0 : store.episodes[0][0].dim(2);
  std::ofstream out(dir + "/manifest.txt");
  if (!out) throw std::runtime_error("cannot write " + dir + "/manifest.txt");
  out << "environment = " << store.environment_id << "\n";
  out << "texture = " << store.texture_id << "\n";
  out << "seed = " << store.seed << "\n";
  out << "height = " << h << "\n";
  out << "width = " << w << "\n";
  out << "channels = " << c << "\n";
  out << "episodes = " << store.num_episodes() << "\n";
  for (int e = 0; e < store.num_episodes(); ++e)
    out << "episode." << e << ".frames = " << store.episodes[e].size() << "\n";
  if (mask_threshold) out << "mask_threshold = " << *mask_threshold << "\n";
}

EpisodeStore load_store_impl(const std::string& dir, std::vector<std::vector<Tensor>>* masks,
                             float* mask_threshold) {
  const std::string manifest = dir + "/manifest.txt";
  const auto kv = read_manifest(manifest);
  EpisodeStore store;
  store.environment_id = manifest_get(kv, "environment", manifest);
  store.texture_id = manifest_get(kv, "texture", manifest);
  store.seed = std::stoull(manifest_get(kv, "seed", manifest));
  const int episodes = std::stoi(manifest_get(kv, "episodes", manifest));
  if (masks) {
    *mask_threshold = std::stof(manifest_get(kv, "mask_threshold", manifest));
    masks->resize(episodes);
  }
  store.episodes.resize(episodes);
  for (int e = 0; e < episodes; ++e) {
    const int frames =
        std::stoi(manifest_get(kv, "episode." + std::to_string(e) + ".frames", manifest));
    const std::string ep_dir = dir + "/" + index_name("episode", e, "");
    for (int f = 0; f < frames; ++f) {
      store.episodes[e].push_back(load_ppm(ep_dir + "/" + index_name("frame", f, ".ppm")));
      if (masks)
        (*masks)[e].push_back(load_pgm(ep_dir + "/" + index_name("mask", f, ".pgm")));
    }
  }
  return store;
}

void save_store_impl(const EpisodeStore& store, const std::vector<std::vector<Tensor>>* masks,
                     const float* mask_threshold, const std::string& dir) {
  fs::create_directories(dir);
  for (int e = 0; e < store.num_episodes(); ++e) {
    const std::string ep_dir = dir + "/" + index_name("episode", e, "");
    fs::create_directories(ep_dir);
    for (int f = 0; f < static_cast<int>(store.episodes[e].size()); ++f) {
      save_ppm(ep_dir + "/" + index_name("frame", f, ".ppm"), store.episodes[e][f]);
      if (masks)
        save_pgm(ep_dir + "/" + index_name("mask", f, ".pgm"), (*masks)[e][f]);
    }
  }
  write_manifest(store, dir, mask_threshold);
}

}  // namespace

EpisodeStore collect_random_transitions(envs::SpriteWorld& env, int count, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("collect_random_transitions: count must be >= 1");
  EpisodeStore store;
  store.environment_id = envs::SpriteWorld::kEnvironmentId;
  store.texture_id = env.texture_id();
  store.seed = seed;

  Rng action_rng = make_rng(seed, 11);
  int total = 0;
  std::uint64_t ep = 0;
  while (total < count) {
    auto [state, frame] = env.reset(mix_seed(seed, 1000 + ep));
    std::vector<Frame> episode;
    episode.push_back(std::move(frame));
    ++total;
    bool done = false;
    while (total < count && !done) {
      envs::Action a{uniform(action_rng, -1.0f, 1.0f), uniform(action_rng, -1.0f, 1.0f)};
      auto res = env.step(state, a);
      episode.push_back(std::move(res.frame));
      ++total;
      state = res.state;
      done = res.done;
    }
    store.episodes.push_back(std::move(episode));
    ++ep;
  }
  return store;
}

FramePair sample_frame_pair(const EpisodeStore& store, double cross_episode_prob, Rng& rng) {
  const int n_ep = store.num_episodes();
  if (n_ep < 1) throw std::invalid_argument("sample_frame_pair: empty store");
  if (cross_episode_prob > 0.0 && n_ep < 2)
    throw std::invalid_argument("sample_frame_pair: cross_episode_prob > 0 needs >= 2 episodes, store has " +
                                std::to_string(n_ep));

  FramePair pair;
  if (cross_episode_prob > 0.0 && bernoulli(rng, cross_episode_prob)) {
    const int e1 = uniform_int(rng, 0, n_ep - 1);
    int e2 = uniform_int(rng, 0, n_ep - 2);
    if (e2 >= e1) ++e2;
    const auto& ep1 = store.episodes[e1];
    const auto& ep2 = store.episodes[e2];
    pair.source = ep1[uniform_int(rng, 0, static_cast<int>(ep1.size()) - 1)];
    pair.target = ep2[uniform_int(rng, 0, static_cast<int>(ep2.size()) - 1)];
    pair.same_episode = false;
  } else {
    const auto& ep = store.episodes[uniform_int(rng, 0, n_ep - 1)];
    const long n = static_cast<long>(ep.size());
    // uniform over ordered pairs (i, j) with i <= j
    long r = static_cast<long>(uniform_d(rng) * static_cast<double>(n * (n + 1) / 2));
    if (r >= n * (n + 1) / 2) r = n * (n + 1) / 2 - 1;
    long i = 0;
    while (r >= n - i) {
      r -= n - i;
      ++i;
    }
    const long j = i + r;
    pair.source = ep[static_cast<std::size_t>(i)];
    pair.target = ep[static_cast<std::size_t>(j)];
    pair.same_episode = true;
  }
  return pair;
}

void save_store(const EpisodeStore& store, const std::string& dir) {
  save_store_impl(store, nullptr, nullptr, dir);
}

EpisodeStore load_store(const std::string& dir) {
  return load_store_impl(dir, nullptr, nullptr);
}

void save_masked_dataset(const MaskedDataset& ds, const std::string& dir) {
  if (ds.masks.size() != ds.store.episodes.size())
    throw std::invalid_argument("save_masked_dataset: mask grouping does not match episodes");
  save_store_impl(ds.store, &ds.masks, &ds.threshold_used, dir);
}

MaskedDataset load_masked_dataset(const std::string& dir) {
  MaskedDataset ds;
  ds.store = load_store_impl(dir, &ds.masks, &ds.threshold_used);
  return ds;
}

}  // namespace vai::data
