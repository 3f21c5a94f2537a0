#include "vai/nn/layers.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace vai::nn {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<RowMat>;
using MapCRM = Eigen::Map<const RowMat>;

namespace {

void uniform_init(Tensor& t, Rng& rng, float bound) {
  for (auto& x : t.v) x = uniform(rng, -bound, bound);
}

}  // namespace

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(int in_c, int out_c, int k, int stride, int pad)
    : weight({out_c, in_c * k * k}),
      bias({out_c}),
      in_c_(in_c),
      out_c_(out_c),
      k_(k),
      stride_(stride),
      pad_(pad) {}

void Conv2d::init(Rng& rng) {
  const float bound = 1.0f / std::sqrt(static_cast<float>(in_c_ * k_ * k_));
  uniform_init(weight.w, rng, bound);
  uniform_init(bias.w, rng, bound);
}

Tensor Conv2d::forward(const Tensor& x) {
  if (x.rank() != 4 || x.dim(1) != in_c_)
    throw std::invalid_argument("conv2d: expected {N," + std::to_string(in_c_) +
                                ",H,W}, got " + x.shape_str());
  const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const int oh = out_h(h), ow = out_w(w);
  const int ck2 = in_c_ * k_ * k_;
  x_shape_ = x.shape;

  cols_ = Tensor({n * oh * ow, ck2});
  for (int ni = 0; ni < n; ++ni) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        float* row = &cols_.at(((ni * oh) + oy) * ow + ox, 0);
        const int y0 = oy * stride_ - pad_;
        const int x0 = ox * stride_ - pad_;
        for (int c = 0; c < in_c_; ++c) {
          const float* plane = &x.v[(static_cast<std::size_t>(ni) * in_c_ + c) * h * w];
          for (int ky = 0; ky < k_; ++ky) {
            const int yy = y0 + ky;
            for (int kx = 0; kx < k_; ++kx) {
              const int xx = x0 + kx;
              row[(c * k_ + ky) * k_ + kx] =
                  (yy >= 0 && yy < h && xx >= 0 && xx < w) ? plane[yy * w + xx] : 0.0f;
            }
          }
        }
      }
    }
  }

  MapCRM cm(cols_.v.data(), n * oh * ow, ck2);
  MapCRM wm(weight.w.v.data(), out_c_, ck2);
  RowMat ym = cm * wm.transpose();  // {n*oh*ow, out_c}

  Tensor y({n, out_c_, oh, ow});
  for (int ni = 0; ni < n; ++ni)
    for (int co = 0; co < out_c_; ++co) {
      const float b = bias.w.v[static_cast<std::size_t>(co)];
      float* dst = &y.v[(static_cast<std::size_t>(ni) * out_c_ + co) * oh * ow];
      for (int s = 0; s < oh * ow; ++s) dst[s] = ym(ni * oh * ow + s, co) + b;
    }
  return y;
}

Tensor Conv2d::backward(const Tensor& dy) {
  const int n = x_shape_[0], h = x_shape_[2], w = x_shape_[3];
  const int oh = out_h(h), ow = out_w(w);
  const int ck2 = in_c_ * k_ * k_;
  const int rows = n * oh * ow;

  Tensor dym({rows, out_c_});
  for (int ni = 0; ni < n; ++ni)
    for (int co = 0; co < out_c_; ++co) {
      const float* src = &dy.v[(static_cast<std::size_t>(ni) * out_c_ + co) * oh * ow];
      for (int s = 0; s < oh * ow; ++s) dym.at(ni * oh * ow + s, co) = src[s];
    }

  MapCRM dymm(dym.v.data(), rows, out_c_);
  MapCRM cm(cols_.v.data(), rows, ck2);
  MapRM gw(weight.g.v.data(), out_c_, ck2);
  gw.noalias() += dymm.transpose() * cm;
  for (int co = 0; co < out_c_; ++co)
    bias.g.v[static_cast<std::size_t>(co)] += dymm.col(co).sum();

  MapCRM wm(weight.w.v.data(), out_c_, ck2);
  RowMat dcols = dymm * wm;  // {rows, ck2}

  Tensor dx(x_shape_);
  for (int ni = 0; ni < n; ++ni) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const int r = ((ni * oh) + oy) * ow + ox;
        const int y0 = oy * stride_ - pad_;
        const int x0 = ox * stride_ - pad_;
        for (int c = 0; c < in_c_; ++c) {
          float* plane = &dx.v[(static_cast<std::size_t>(ni) * in_c_ + c) * h * w];
          for (int ky = 0; ky < k_; ++ky) {
            const int yy = y0 + ky;
            if (yy < 0 || yy >= h) continue;
            for (int kx = 0; kx < k_; ++kx) {
              const int xx = x0 + kx;
              if (xx < 0 || xx >= w) continue;
              plane[yy * w + xx] += dcols(r, (c * k_ + ky) * k_ + kx);
            }
          }
        }
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------- Linear

Linear::Linear(int in_dim, int out_dim)
    : weight({out_dim, in_dim}), bias({out_dim}), in_(in_dim), out_(out_dim) {}

void Linear::init(Rng& rng) {
  const float bound = 1.0f / std::sqrt(static_cast<float>(in_));
  uniform_init(weight.w, rng, bound);
  uniform_init(bias.w, rng, bound);
}

Tensor Linear::forward(const Tensor& x) {
  if (x.rank() != 2 || x.dim(1) != in_)
    throw std::invalid_argument("linear: expected {N," + std::to_string(in_) + "}, got " +
                                x.shape_str());
  x_ = x;
  const int n = x.dim(0);
  MapCRM xm(x.v.data(), n, in_);
  MapCRM wm(weight.w.v.data(), out_, in_);
  Tensor y({n, out_});
  MapRM ym(y.v.data(), n, out_);
  ym.noalias() = xm * wm.transpose();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < out_; ++j) y.at(i, j) += bias.w.v[static_cast<std::size_t>(j)];
  return y;
}

Tensor Linear::backward(const Tensor& dy) {
  const int n = x_.dim(0);
  MapCRM dym(dy.v.data(), n, out_);
  MapCRM xm(x_.v.data(), n, in_);
  MapRM gw(weight.g.v.data(), out_, in_);
  gw.noalias() += dym.transpose() * xm;
  for (int j = 0; j < out_; ++j) bias.g.v[static_cast<std::size_t>(j)] += dym.col(j).sum();
  MapCRM wm(weight.w.v.data(), out_, in_);
  Tensor dx({n, in_});
  MapRM dxm(dx.v.data(), n, in_);
  dxm.noalias() = dym * wm;
  return dx;
}

// ---------------------------------------------------------------- activations

Tensor ReLU::forward(const Tensor& x) {
  y_ = x;
  for (auto& v : y_.v) v = v > 0.0f ? v : 0.0f;
  return y_;
}

Tensor ReLU::backward(const Tensor& dy) const {
  Tensor dx = dy;
  for (std::size_t i = 0; i < dx.v.size(); ++i)
    if (y_.v[i] <= 0.0f) dx.v[i] = 0.0f;
  return dx;
}

Tensor Sigmoid::forward(const Tensor& x) {
  y_ = x;
  for (auto& v : y_.v) v = 1.0f / (1.0f + std::exp(-v));
  return y_;
}

Tensor Sigmoid::backward(const Tensor& dy) const {
  Tensor dx = dy;
  for (std::size_t i = 0; i < dx.v.size(); ++i) dx.v[i] *= y_.v[i] * (1.0f - y_.v[i]);
  return dx;
}

Tensor Tanh::forward(const Tensor& x) {
  y_ = x;
  for (auto& v : y_.v) v = std::tanh(v);
  return y_;
}

Tensor Tanh::backward(const Tensor& dy) const {
  Tensor dx = dy;
  for (std::size_t i = 0; i < dx.v.size(); ++i) dx.v[i] *= 1.0f - y_.v[i] * y_.v[i];
  return dx;
}

// ---------------------------------------------------------------- upsample

Tensor UpsampleNearest2x::forward(const Tensor& x) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor y({n, c, 2 * h, 2 * w});
  for (int ni = 0; ni < n; ++ni)
    for (int ci = 0; ci < c; ++ci) {
      const float* src = &x.v[(static_cast<std::size_t>(ni) * c + ci) * h * w];
      float* dst = &y.v[(static_cast<std::size_t>(ni) * c + ci) * 4 * h * w];
      for (int yy = 0; yy < 2 * h; ++yy)
        for (int xx = 0; xx < 2 * w; ++xx)
          dst[yy * 2 * w + xx] = src[(yy / 2) * w + (xx / 2)];
    }
  return y;
}

Tensor UpsampleNearest2x::backward(const Tensor& dy) {
  const int n = dy.dim(0), c = dy.dim(1), h2 = dy.dim(2), w2 = dy.dim(3);
  const int h = h2 / 2, w = w2 / 2;
  Tensor dx({n, c, h, w});
  for (int ni = 0; ni < n; ++ni)
    for (int ci = 0; ci < c; ++ci) {
      const float* src = &dy.v[(static_cast<std::size_t>(ni) * c + ci) * h2 * w2];
      float* dst = &dx.v[(static_cast<std::size_t>(ni) * c + ci) * h * w];
      for (int yy = 0; yy < h2; ++yy)
        for (int xx = 0; xx < w2; ++xx) dst[(yy / 2) * w + (xx / 2)] += src[yy * w2 + xx];
    }
  return dx;
}

// ---------------------------------------------------------------- soft-argmax

Tensor SpatialSoftmax::forward(const Tensor& logits) {
  const int n = logits.dim(0), k = logits.dim(1), h = logits.dim(2), w = logits.dim(3);
  probs_ = Tensor({n, k, h, w});
  mu_ = Tensor({n, k, 2});
  for (int ni = 0; ni < n; ++ni) {
    for (int ki = 0; ki < k; ++ki) {
      const float* z = &logits.v[(static_cast<std::size_t>(ni) * k + ki) * h * w];
      float* p = &probs_.v[(static_cast<std::size_t>(ni) * k + ki) * h * w];
      float zmax = z[0];
      for (int s = 1; s < h * w; ++s) zmax = std::max(zmax, z[s]);
      double sum = 0.0;
      for (int s = 0; s < h * w; ++s) {
        p[s] = std::exp((z[s] - zmax) / temp_);
        sum += p[s];
      }
      const float inv = static_cast<float>(1.0 / sum);
      double mx = 0.0, my = 0.0;
      for (int yy = 0; yy < h; ++yy)
        for (int xx = 0; xx < w; ++xx) {
          const float pv = p[yy * w + xx] * inv;
          p[yy * w + xx] = pv;
          mx += pv * HeatmapRenderer::cell_center(xx, w);
          my += pv * HeatmapRenderer::cell_center(yy, h);
        }
      mu_.at(ni, ki, 0) = static_cast<float>(mx);
      mu_.at(ni, ki, 1) = static_cast<float>(my);
    }
  }
  return mu_;
}

Tensor SpatialSoftmax::backward(const Tensor& dmu) {
  const int n = probs_.dim(0), k = probs_.dim(1), h = probs_.dim(2), w = probs_.dim(3);
  Tensor dz({n, k, h, w});
  for (int ni = 0; ni < n; ++ni)
    for (int ki = 0; ki < k; ++ki) {
      const float* p = &probs_.v[(static_cast<std::size_t>(ni) * k + ki) * h * w];
      float* d = &dz.v[(static_cast<std::size_t>(ni) * k + ki) * h * w];
      const float gx = dmu.at(ni, ki, 0), gy = dmu.at(ni, ki, 1);
      const float mx = mu_.at(ni, ki, 0), my = mu_.at(ni, ki, 1);
      for (int yy = 0; yy < h; ++yy)
        for (int xx = 0; xx < w; ++xx) {
          const float cx = HeatmapRenderer::cell_center(xx, w);
          const float cy = HeatmapRenderer::cell_center(yy, h);
          d[yy * w + xx] = p[yy * w + xx] * ((cx - mx) * gx + (cy - my) * gy) / temp_;
        }
    }
  return dz;
}

// ---------------------------------------------------------------- heatmap

HeatmapRenderer::HeatmapRenderer(int grid_h, int grid_w, float sigma)
    : gh_(grid_h), gw_(grid_w), sigma_(sigma) {}

Tensor HeatmapRenderer::forward(const Tensor& keypoints) {
  const int n = keypoints.dim(0), k = keypoints.dim(1);
  kp_ = keypoints;
  heat_ = Tensor({n, 1, gh_, gw_});
  argmax_.assign(static_cast<std::size_t>(n) * gh_ * gw_, 0);
  const float inv2s2 = 1.0f / (2.0f * sigma_ * sigma_);
  for (int ni = 0; ni < n; ++ni) {
    float* out = &heat_.v[static_cast<std::size_t>(ni) * gh_ * gw_];
    int* amax = &argmax_[static_cast<std::size_t>(ni) * gh_ * gw_];
    for (int yy = 0; yy < gh_; ++yy) {
      const float cy = cell_center(yy, gh_);
      for (int xx = 0; xx < gw_; ++xx) {
        const float cx = cell_center(xx, gw_);
        float best = -1.0f;
        int best_k = 0;
        for (int ki = 0; ki < k; ++ki) {
          const float dx = cx - keypoints.at(ni, ki, 0);
          const float dy = cy - keypoints.at(ni, ki, 1);
          const float val = std::exp(-(dx * dx + dy * dy) * inv2s2);
          if (val > best) {
            best = val;
            best_k = ki;
          }
        }
        out[yy * gw_ + xx] = best;
        amax[yy * gw_ + xx] = best_k;
      }
    }
  }
  return heat_;
}

Tensor HeatmapRenderer::backward(const Tensor& dheat) {
  const int n = kp_.dim(0), k = kp_.dim(1);
  Tensor dkp({n, k, 2});
  const float inv_s2 = 1.0f / (sigma_ * sigma_);
  for (int ni = 0; ni < n; ++ni) {
    const float* dh = &dheat.v[static_cast<std::size_t>(ni) * gh_ * gw_];
    const float* hv = &heat_.v[static_cast<std::size_t>(ni) * gh_ * gw_];
    const int* amax = &argmax_[static_cast<std::size_t>(ni) * gh_ * gw_];
    for (int yy = 0; yy < gh_; ++yy) {
      const float cy = cell_center(yy, gh_);
      for (int xx = 0; xx < gw_; ++xx) {
        const float cx = cell_center(xx, gw_);
        const int ki = amax[yy * gw_ + xx];
        const float g = dh[yy * gw_ + xx] * hv[yy * gw_ + xx] * inv_s2;
        dkp.at(ni, ki, 0) += g * (cx - kp_.at(ni, ki, 0));
        dkp.at(ni, ki, 1) += g * (cy - kp_.at(ni, ki, 1));
      }
    }
  }
  return dkp;
}

// ---------------------------------------------------------------- adam

Adam::Adam(std::vector<Param*> params, float lr, float beta1, float beta2, float eps)
    : params_(std::move(params)), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
  for (auto* p : params_) {
    m_.emplace_back(p->w.shape);
    v_.emplace_back(p->w.shape);
  }
}

void Adam::step() {
  ++t_;
  const float bc1 = 1.0f - std::pow(b1_, static_cast<float>(t_));
  const float bc2 = 1.0f - std::pow(b2_, static_cast<float>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Param& p = *params_[i];
    for (std::size_t j = 0; j < p.w.v.size(); ++j) {
      const float g = p.g.v[j];
      m_[i].v[j] = b1_ * m_[i].v[j] + (1.0f - b1_) * g;
      v_[i].v[j] = b2_ * v_[i].v[j] + (1.0f - b2_) * g * g;
      const float mhat = m_[i].v[j] / bc1;
      const float vhat = v_[i].v[j] / bc2;
      p.w.v[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

void Adam::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

bool all_finite(const Tensor& t) {
  for (float x : t.v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace vai::nn
