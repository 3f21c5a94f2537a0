#pragma once

#include <cassert>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace vai {

// Dense row-major float tensor. Frames are {H,W,C}, masks {H,W},
// network activations {N,C,H,W}.
struct Tensor {
  std::vector<int> shape;
  std::vector<float> v;

  Tensor() = default;
  explicit Tensor(std::vector<int> s, float fill = 0.0f) : shape(std::move(s)) {
    v.assign(numel_of(shape), fill);
  }

  static std::size_t numel_of(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int d : s) {
      if (d < 0) throw std::invalid_argument("tensor: negative dimension");
      n *= static_cast<std::size_t>(d);
    }
    return n;
  }

  std::size_t numel() const { return v.size(); }
  bool empty() const { return v.empty(); }
  int dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }
  int rank() const { return static_cast<int>(shape.size()); }

  float& operator[](std::size_t i) { return v[i]; }
  float operator[](std::size_t i) const { return v[i]; }

  float& at(int i, int j) {
    assert(rank() == 2);
    return v[static_cast<std::size_t>(i) * shape[1] + j];
  }
  float at(int i, int j) const {
    assert(rank() == 2);
    return v[static_cast<std::size_t>(i) * shape[1] + j];
  }
  float& at(int i, int j, int k) {
    assert(rank() == 3);
    return v[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
  }
  float at(int i, int j, int k) const {
    assert(rank() == 3);
    return v[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
  }
  float& at(int i, int j, int k, int l) {
    assert(rank() == 4);
    return v[((static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k) * shape[3] + l];
  }
  float at(int i, int j, int k, int l) const {
    assert(rank() == 4);
    return v[((static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k) * shape[3] + l];
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  void fill(float x) { std::fill(v.begin(), v.end(), x); }
  void zero() { fill(0.0f); }

  std::string shape_str() const {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape[i]);
    }
    return s + ")";
  }
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(what) + ": shape mismatch, expected " +
                                a.shape_str() + " got " + b.shape_str());
}

// Frames live in [0,1]; quantized to the 1/255 grid at the source so that
// 8-bit image round trips are exact.
using Frame = Tensor;

inline float clamp01(float x) { return x < 0.0f ? 0.0f : (x > 1.0f ? 1.0f : x); }

}  // namespace vai
