#include <cmath>
#include <fstream>
#include <map>

#include "doctest.h"
#include "test_util.hpp"
#include "vai/core/errors.hpp"
#include "vai/core/hash.hpp"
#include "vai/data/store.hpp"
#include "vai/envs/spriteworld.hpp"

using namespace vai;
using namespace vai::data;

namespace {

// Store whose pixel values encode (episode, index) for pair-sampling checks.
EpisodeStore coded_store(const std::vector<int>& frames_per_episode) {
  EpisodeStore store;
  store.environment_id = "spriteworld";
  store.texture_id = "grid";
  store.seed = 0;
  for (std::size_t e = 0; e < frames_per_episode.size(); ++e) {
    std::vector<Frame> ep;
    for (int i = 0; i < frames_per_episode[e]; ++i) {
      Frame f({4, 4, 3}, 0.0f);
      f.v[0] = static_cast<float>(e * 32 + i) / 255.0f;
      ep.push_back(f);
    }
    store.episodes.push_back(std::move(ep));
  }
  return store;
}

std::pair<int, int> decode(const Frame& f) {
  const int code = static_cast<int>(std::lround(f.v[0] * 255.0f));
  return {code / 32, code % 32};
}

}  // namespace

TEST_CASE("collect_random_transitions meets the frame-count contract") {
  envs::SpriteWorldConfig cfg;
  cfg.episode_len = 10;
  envs::SpriteWorld env(cfg);

  EpisodeStore one = collect_random_transitions(env, 1, 0);
  CHECK(one.total_frames() == 1);
  CHECK(one.num_episodes() == 1);

  EpisodeStore s50 = collect_random_transitions(env, 50, 0);
  CHECK(s50.total_frames() == 50);
  CHECK(s50.environment_id == "spriteworld");
  CHECK(s50.texture_id == "grid");
  for (const auto& ep : s50.episodes)
    for (const auto& f : ep) REQUIRE(f.shape == std::vector<int>{84, 84, 3});

  // byte-identical rerun
  EpisodeStore again = collect_random_transitions(env, 50, 0);
  REQUIRE(again.num_episodes() == s50.num_episodes());
  for (std::size_t e = 0; e < s50.episodes.size(); ++e) {
    REQUIRE(again.episodes[e].size() == s50.episodes[e].size());
    for (std::size_t i = 0; i < s50.episodes[e].size(); ++i)
      CHECK(hash_tensor(again.episodes[e][i]) == hash_tensor(s50.episodes[e][i]));
  }

  EpisodeStore other = collect_random_transitions(env, 50, 1);
  CHECK(hash_tensor(other.episodes[0][1]) != hash_tensor(s50.episodes[0][1]));

  CHECK_THROWS(collect_random_transitions(env, 0, 0));
}

TEST_CASE("store round trip is lossless and the manifest is inspectable") {
  const std::string dir = scratch("vai_test_store");
  const EpisodeStore store = coded_store({2, 3, 1});
  save_store(store, dir);

  std::ifstream manifest(dir + "/manifest.txt");
  std::string text((std::istreambuf_iterator<char>(manifest)), std::istreambuf_iterator<char>());
  CHECK(text.find("episodes = 3") != std::string::npos);
  CHECK(text.find("episode.0.frames = 2") != std::string::npos);
  CHECK(text.find("episode.1.frames = 3") != std::string::npos);
  CHECK(text.find("episode.2.frames = 1") != std::string::npos);

  const EpisodeStore back = load_store(dir);
  CHECK(back.environment_id == store.environment_id);
  CHECK(back.texture_id == store.texture_id);
  CHECK(back.seed == store.seed);
  REQUIRE(back.num_episodes() == 3);
  for (std::size_t e = 0; e < 3; ++e) {
    REQUIRE(back.episodes[e].size() == store.episodes[e].size());
    for (std::size_t i = 0; i < back.episodes[e].size(); ++i)
      for (std::size_t p = 0; p < back.episodes[e][i].v.size(); ++p)
        CHECK(back.episodes[e][i].v[p] == store.episodes[e][i].v[p]);
  }
}

TEST_CASE("store loading reports missing or corrupt manifests") {
  const std::string dir = scratch("vai_test_store_bad");
  CHECK(throws_containing<MissingArtifactError>([&] { load_store(dir); }, "manifest"));

  save_store(coded_store({2}), dir);
  {
    std::ofstream f(dir + "/manifest.txt", std::ios::app);
    f << "garbage line without equals\n";
  }
  CHECK(throws_containing<std::runtime_error>([&] { load_store(dir); }, "manifest.txt"));
}

TEST_CASE("pair sampling honors the same-episode flag") {
  const EpisodeStore store = coded_store({5, 4, 6});
  Rng rng = make_rng(99);

  for (int i = 0; i < 1000; ++i) {
    const FramePair p = sample_frame_pair(store, 0.0, rng);
    CHECK(p.same_episode);
    const auto [es, is] = decode(p.source);
    const auto [et, it] = decode(p.target);
    CHECK(es == et);
    CHECK(is <= it);  // source precedes or equals target
  }
  for (int i = 0; i < 1000; ++i) {
    const FramePair p = sample_frame_pair(store, 1.0, rng);
    CHECK_FALSE(p.same_episode);
    CHECK(decode(p.source).first != decode(p.target).first);
  }
}

TEST_CASE("cross-episode fraction tracks its probability over 10000 draws") {
  const EpisodeStore store = coded_store({8, 8, 8, 8});
  Rng rng = make_rng(7);
  int cross = 0;
  for (int i = 0; i < 10000; ++i)
    if (!sample_frame_pair(store, 0.5, rng).same_episode) ++cross;
  const double frac = cross / 10000.0;
  CHECK(frac >= 0.48);
  CHECK(frac <= 0.52);
}

TEST_CASE("same-episode pairs cover ordered index pairs uniformly") {
  const EpisodeStore store = coded_store({4});
  Rng rng = make_rng(13);
  std::map<std::pair<int, int>, int> counts;
  const int draws = 20000;
  for (int i = 0; i < draws; ++i) {
    const FramePair p = sample_frame_pair(store, 0.0, rng);
    counts[{decode(p.source).second, decode(p.target).second}]++;
  }
  CHECK(counts.size() == 10);  // ordered pairs i <= j over 4 frames
  for (const auto& [key, n] : counts) {
    const double frac = static_cast<double>(n) / draws;
    CHECK(frac > 0.07);  // expected 0.1 each
    CHECK(frac < 0.13);
  }
}

TEST_CASE("pair sampling rejects impossible requests") {
  Rng rng = make_rng(1);
  const EpisodeStore empty;
  CHECK_THROWS_AS(sample_frame_pair(empty, 0.0, rng), std::invalid_argument);

  const EpisodeStore single = coded_store({6});
  CHECK(throws_containing<std::invalid_argument>(
      [&] { sample_frame_pair(single, 0.5, rng); }, "1"));
}

TEST_CASE("masked dataset round trip keeps masks and threshold") {
  const std::string dir = scratch("vai_test_masked");
  MaskedDataset ds;
  ds.store = coded_store({2, 1});
  ds.threshold_used = 0.125f;
  for (const auto& ep : ds.store.episodes) {
    std::vector<Tensor> masks;
    for (std::size_t i = 0; i < ep.size(); ++i) {
      Tensor m({4, 4}, 0.0f);
      m.v[i] = 1.0f;
      masks.push_back(m);
    }
    ds.masks.push_back(std::move(masks));
  }
  save_masked_dataset(ds, dir);
  const MaskedDataset back = load_masked_dataset(dir);
  CHECK(back.threshold_used == 0.125f);
  REQUIRE(back.masks.size() == 2);
  REQUIRE(back.masks[0].size() == 2);
  for (std::size_t e = 0; e < back.masks.size(); ++e)
    for (std::size_t i = 0; i < back.masks[e].size(); ++i)
      for (std::size_t p = 0; p < back.masks[e][i].v.size(); ++p)
        CHECK(back.masks[e][i].v[p] == ds.masks[e][i].v[p]);
  CHECK(back.store.total_frames() == 3);

  CHECK_THROWS_AS(load_masked_dataset(scratch("vai_test_masked_none")),
                  MissingArtifactError);
}
