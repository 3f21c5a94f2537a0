#pragma once

#include <cstdint>
#include <random>

namespace vai {

using Rng = std::mt19937_64;

// splitmix64; used to derive independent child streams from a master seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  return Rng(mix_seed(seed, stream));
}

inline float uniform(Rng& rng, float lo = 0.0f, float hi = 1.0f) {
  std::uniform_real_distribution<float> d(lo, hi);
  return d(rng);
}

inline double uniform_d(Rng& rng, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  return d(rng);
}

// inclusive on both ends
inline int uniform_int(Rng& rng, int lo, int hi) {
  std::uniform_int_distribution<int> d(lo, hi);
  return d(rng);
}

inline float gaussian(Rng& rng, float mean = 0.0f, float std = 1.0f) {
  std::normal_distribution<float> d(mean, std);
  return d(rng);
}

inline bool bernoulli(Rng& rng, double p) {
  std::bernoulli_distribution d(p);
  return d(rng);
}

}  // namespace vai
