#pragma once

#include <vector>

#include "vai/core/tensor.hpp"

namespace vai::nn {

// Frames are stored {H,W,C}; the network layers run on {N,C,H,W}.

inline Tensor to_nchw(const std::vector<const Frame*>& frames) {
  const int n = static_cast<int>(frames.size());
  const int h = frames[0]->dim(0), w = frames[0]->dim(1), c = frames[0]->dim(2);
  Tensor out({n, c, h, w});
  for (int i = 0; i < n; ++i) {
    const Frame& f = *frames[i];
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int ch = 0; ch < c; ++ch) out.at(i, ch, y, x) = f.at(y, x, ch);
  }
  return out;
}

inline Tensor to_nchw(const Frame& frame) { return to_nchw({&frame}); }

inline Frame from_nchw(const Tensor& t, int n) {
  const int c = t.dim(1), h = t.dim(2), w = t.dim(3);
  Frame f({h, w, c});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch) f.at(y, x, ch) = t.at(n, ch, y, x);
  return f;
}

}  // namespace vai::nn
