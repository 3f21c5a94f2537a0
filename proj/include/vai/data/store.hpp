#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vai/core/rng.hpp"
#include "vai/core/tensor.hpp"
#include "vai/envs/spriteworld.hpp"

namespace vai::data {

// Episode-grouped frame dataset. Immutable after creation.
struct EpisodeStore {
  std::vector<std::vector<Frame>> episodes;
  std::string environment_id;
  std::string texture_id;
  std::uint64_t seed = 0;

  int total_frames() const {
    int n = 0;
    for (const auto& e : episodes) n += static_cast<int>(e.size());
    return n;
  }
  int num_episodes() const { return static_cast<int>(episodes.size()); }
};

struct FramePair {
  Frame source;
  Frame target;
  bool same_episode = false;
};

// Runs a uniform-random policy until exactly `count` frames are recorded.
// Each episode opens with its reset frame; the final episode may be truncated.
EpisodeStore collect_random_transitions(envs::SpriteWorld& env, int count, std::uint64_t seed);

// With probability cross_episode_prob the frames come from two distinct
// episodes; otherwise from one episode, uniform over ordered pairs i <= j.
FramePair sample_frame_pair(const EpisodeStore& store, double cross_episode_prob, Rng& rng);

// Directory layout: manifest.txt plus episode_0000/frame_0000.ppm.
void save_store(const EpisodeStore& store, const std::string& dir);
EpisodeStore load_store(const std::string& dir);

// Store frames paired one-to-one with binary {H,W} masks, same grouping.
struct MaskedDataset {
  EpisodeStore store;
  std::vector<std::vector<Tensor>> masks;
  float threshold_used = 0.0f;

  int total_frames() const { return store.total_frames(); }
};

// Same layout as save_store plus episode_0000/mask_0000.pgm and a
// mask_threshold manifest entry.
void save_masked_dataset(const MaskedDataset& ds, const std::string& dir);
MaskedDataset load_masked_dataset(const std::string& dir);

}  // namespace vai::data
