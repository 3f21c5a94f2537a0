#pragma once

#include <vector>

#include "vai/core/rng.hpp"
#include "vai/core/tensor.hpp"

namespace vai::nn {

struct Param {
  Tensor w;  // value
  Tensor g;  // accumulated gradient, same shape
  explicit Param(std::vector<int> shape = {}) : w(shape), g(shape) {}
  void zero_grad() { g.zero(); }
};

// 2-D convolution over {N,C,H,W} batches via im2col + GEMM. forward() caches
// what backward() needs; backward() accumulates weight/bias grads and returns
// the input gradient. Call order matters when a layer is reused within one
// step: backward() refers to the most recent forward().
class Conv2d {
 public:
  Conv2d(int in_c, int out_c, int k, int stride, int pad);
  void init(Rng& rng);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);

  int out_h(int h) const { return (h + 2 * pad_ - k_) / stride_ + 1; }
  int out_w(int w) const { return (w + 2 * pad_ - k_) / stride_ + 1; }

  Param weight;  // {out_c, in_c*k*k}
  Param bias;    // {out_c}

 private:
  int in_c_, out_c_, k_, stride_, pad_;
  Tensor cols_;                 // {N*oh*ow, in_c*k*k}
  std::vector<int> x_shape_;
};

class Linear {
 public:
  Linear(int in_dim, int out_dim);
  void init(Rng& rng);

  Tensor forward(const Tensor& x);  // {N,in} -> {N,out}
  Tensor backward(const Tensor& dy);

  Param weight;  // {out, in}
  Param bias;    // {out}

 private:
  int in_, out_;
  Tensor x_;
};

class ReLU {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy) const;

 private:
  Tensor y_;
};

class Sigmoid {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy) const;

 private:
  Tensor y_;
};

class Tanh {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy) const;

 private:
  Tensor y_;
};

// Nearest-neighbour 2x upsampling of {N,C,H,W}.
struct UpsampleNearest2x {
  static Tensor forward(const Tensor& x);
  static Tensor backward(const Tensor& dy);
};

// Per-channel softmax over the spatial grid followed by the expectation of
// normalized cell-center coordinates. {N,K,H,W} logits -> {N,K,2} locations
// (x,y) in [0,1]^2, which is the soft-argmax keypoint readout.
class SpatialSoftmax {
 public:
  explicit SpatialSoftmax(float temperature = 1.0f) : temp_(temperature) {}

  Tensor forward(const Tensor& logits);
  Tensor backward(const Tensor& dmu);

 private:
  float temp_;
  Tensor probs_;  // {N,K,H,W}
  Tensor mu_;     // {N,K,2}
};

// Gaussian keypoint heatmap of Eq.-style form: at cell center x the value is
// max over keypoints of exp(-|x-mu|^2 / (2 sigma^2)). Differentiable w.r.t.
// keypoint locations (gradient routed through the per-cell argmax).
class HeatmapRenderer {
 public:
  HeatmapRenderer(int grid_h, int grid_w, float sigma);

  Tensor forward(const Tensor& keypoints);  // {N,K,2} -> {N,1,gh,gw}
  Tensor backward(const Tensor& dheat);     // -> {N,K,2}

  static float cell_center(int idx, int cells) {
    return (static_cast<float>(idx) + 0.5f) / static_cast<float>(cells);
  }

 private:
  int gh_, gw_;
  float sigma_;
  Tensor kp_;
  Tensor heat_;
  std::vector<int> argmax_;  // winning keypoint per (n, cell)
};

// Adam with bias correction over an externally owned parameter list.
class Adam {
 public:
  explicit Adam(std::vector<Param*> params, float lr, float beta1 = 0.9f,
                float beta2 = 0.999f, float eps = 1e-8f);
  void step();
  void zero_grad();
  const std::vector<Param*>& params() const { return params_; }

 private:
  std::vector<Param*> params_;
  float lr_, b1_, b2_, eps_;
  long t_ = 0;
  std::vector<Tensor> m_, v_;
};

bool all_finite(const Tensor& t);

}  // namespace vai::nn
