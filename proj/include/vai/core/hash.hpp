#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "vai/core/tensor.hpp"

namespace vai {

// FNV-1a 64-bit content hash; used for run logs and determinism checks.
inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t hash_tensor(const Tensor& t, std::uint64_t h = 0xcbf29ce484222325ULL) {
  h = fnv1a(t.shape.data(), t.shape.size() * sizeof(int), h);
  return fnv1a(t.v.data(), t.v.size() * sizeof(float), h);
}

inline std::uint64_t hash_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("hash_file: cannot open " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (f.read(buf, sizeof(buf)) || f.gcount() > 0)
    h = fnv1a(buf, static_cast<std::size_t>(f.gcount()), h);
  return h;
}

inline std::string hash_hex(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return s;
}

}  // namespace vai
