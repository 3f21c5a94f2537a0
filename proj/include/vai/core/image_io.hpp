#pragma once

#include <string>

#include "vai/core/tensor.hpp"

namespace vai {

// Binary PPM (P6) for RGB frames and PGM (P5) for single-channel masks.
// Frames are stored at 8 bits per channel; pixel values quantized to the
// 1/255 grid round-trip exactly.

void save_ppm(const std::string& path, const Frame& frame);   // {H,W,3}
Frame load_ppm(const std::string& path);

void save_pgm(const std::string& path, const Tensor& img);    // {H,W}
Tensor load_pgm(const std::string& path);

inline float quantize255(float x) {
  float c = clamp01(x);
  return static_cast<float>(static_cast<int>(c * 255.0f + 0.5f)) / 255.0f;
}

}  // namespace vai
