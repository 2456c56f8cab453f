#pragma once

#include <Eigen/Core>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "geadv/tensor.hpp"

namespace geadv::nn {

template <class T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class T>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

/// One differentiable stage of a network. Layers are immutable during forward
/// and backward; all pass-local state lives in the caller's tape, so a shared
/// network is safe to use from several threads at once.
template <class T>
class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;

  const std::string& name() const { return name_; }

  /// saved (optional) receives intermediates that backward wants back.
  virtual TensorT<T> forward(const TensorT<T>& x, std::vector<TensorT<T>>* saved) const = 0;

  /// dy is the cotangent at this layer's output; x/y are the forward input and
  /// output. Returns the cotangent at the input. If param_grads is non-null it
  /// is filled with one gradient tensor per entry of params(), same order.
  virtual TensorT<T> backward(const TensorT<T>& dy, const TensorT<T>& x, const TensorT<T>& y,
                              const std::vector<TensorT<T>>& saved,
                              std::vector<TensorT<T>>* param_grads) const = 0;

  virtual std::vector<TensorT<T>*> params() { return {}; }
  virtual std::vector<const TensorT<T>*> params() const { return {}; }

  virtual std::unique_ptr<Layer<T>> clone() const = 0;

 private:
  std::string name_;
};

// ---------------------------------------------------------------------------
// Dense layer over the last dimension: (..., in) -> (..., out).

template <class T>
class Linear : public Layer<T> {
 public:
  Linear(std::string name, int in_features, int out_features)
      : Layer<T>(std::move(name)),
        in_(in_features),
        out_(out_features),
        weight_({out_features, in_features}),
        bias_({out_features}) {}

  int in_features() const { return in_; }
  int out_features() const { return out_; }
  TensorT<T>& weight() { return weight_; }
  TensorT<T>& bias() { return bias_; }

  TensorT<T> forward(const TensorT<T>& x, std::vector<TensorT<T>>*) const override {
    const int64_t rows = x.numel() / in_;
    if (x.dim(x.ndim() - 1) != in_) {
      throw ContractError("linear '" + this->name() + "': last dim " +
                          std::to_string(x.dim(x.ndim() - 1)) + " != " + std::to_string(in_));
    }
    std::vector<int> out_shape = x.shape();
    out_shape.back() = out_;
    TensorT<T> y(out_shape);
    ConstMatMap<T> xm(x.data(), rows, in_);
    ConstMatMap<T> wm(weight_.data(), out_, in_);
    MatMap<T> ym(y.data(), rows, out_);
    ym.noalias() = xm * wm.transpose();
    for (int64_t r = 0; r < rows; ++r) {
      T* p = y.data() + r * out_;
      for (int j = 0; j < out_; ++j) p[j] += bias_[j];
    }
    return y;
  }

  TensorT<T> backward(const TensorT<T>& dy, const TensorT<T>& x, const TensorT<T>&,
                      const std::vector<TensorT<T>>&,
                      std::vector<TensorT<T>>* param_grads) const override {
    const int64_t rows = x.numel() / in_;
    TensorT<T> dx(x.shape());
    ConstMatMap<T> dym(dy.data(), rows, out_);
    ConstMatMap<T> wm(weight_.data(), out_, in_);
    MatMap<T> dxm(dx.data(), rows, in_);
    dxm.noalias() = dym * wm;
    if (param_grads) {
      TensorT<T> dw({out_, in_});
      TensorT<T> db({out_});
      ConstMatMap<T> xm(x.data(), rows, in_);
      MatMap<T> dwm(dw.data(), out_, in_);
      dwm.noalias() = dym.transpose() * xm;
      for (int64_t r = 0; r < rows; ++r) {
        const T* p = dy.data() + r * out_;
        for (int j = 0; j < out_; ++j) db[j] += p[j];
      }
      param_grads->push_back(std::move(dw));
      param_grads->push_back(std::move(db));
    }
    return dx;
  }

  std::vector<TensorT<T>*> params() override { return {&weight_, &bias_}; }
  std::vector<const TensorT<T>*> params() const override { return {&weight_, &bias_}; }

  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Linear<T>>(*this); }

 private:
  int in_, out_;
  TensorT<T> weight_, bias_;
};

// ---------------------------------------------------------------------------
// 2-D convolution, implemented as im2col + GEMM per image.

template <class T>
class Conv2d : public Layer<T> {
 public:
  Conv2d(std::string name, int in_ch, int out_ch, int kernel, int stride = 1, int pad = 0)
      : Layer<T>(std::move(name)),
        in_ch_(in_ch),
        out_ch_(out_ch),
        k_(kernel),
        stride_(stride),
        pad_(pad),
        weight_({out_ch, in_ch * kernel * kernel}),
        bias_({out_ch}) {}

  TensorT<T>& weight() { return weight_; }
  TensorT<T>& bias() { return bias_; }
  int out_h(int h) const { return (h + 2 * pad_ - k_) / stride_ + 1; }
  int out_w(int w) const { return (w + 2 * pad_ - k_) / stride_ + 1; }

  TensorT<T> forward(const TensorT<T>& x, std::vector<TensorT<T>>*) const override {
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    if (x.dim(1) != in_ch_) {
      throw ContractError("conv '" + this->name() + "': channel mismatch");
    }
    const int oh = out_h(h), ow = out_w(w);
    TensorT<T> y({n, out_ch_, oh, ow});
    const int ckk = in_ch_ * k_ * k_;
    std::vector<T> col(static_cast<size_t>(ckk) * oh * ow);
    ConstMatMap<T> wm(weight_.data(), out_ch_, ckk);
    for (int i = 0; i < n; ++i) {
      im2col(x.data() + int64_t(i) * in_ch_ * h * w, h, w, col.data());
      ConstMatMap<T> cm(col.data(), ckk, int64_t(oh) * ow);
      MatMap<T> ym(y.data() + int64_t(i) * out_ch_ * oh * ow, out_ch_, int64_t(oh) * ow);
      ym.noalias() = wm * cm;
      for (int c = 0; c < out_ch_; ++c) ym.row(c).array() += bias_[c];
    }
    return y;
  }

  TensorT<T> backward(const TensorT<T>& dy, const TensorT<T>& x, const TensorT<T>&,
                      const std::vector<TensorT<T>>&,
                      std::vector<TensorT<T>>* param_grads) const override {
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int oh = out_h(h), ow = out_w(w);
    const int ckk = in_ch_ * k_ * k_;
    TensorT<T> dx(x.shape());
    TensorT<T> dw({out_ch_, ckk});
    TensorT<T> db({out_ch_});
    std::vector<T> col(static_cast<size_t>(ckk) * oh * ow);
    std::vector<T> dcol(static_cast<size_t>(ckk) * oh * ow);
    ConstMatMap<T> wm(weight_.data(), out_ch_, ckk);
    MatMap<T> dwm(dw.data(), out_ch_, ckk);
    for (int i = 0; i < n; ++i) {
      ConstMatMap<T> dym(dy.data() + int64_t(i) * out_ch_ * oh * ow, out_ch_, int64_t(oh) * ow);
      // input gradient: col-space cotangent scattered back to pixels
      MatMap<T> dcm(dcol.data(), ckk, int64_t(oh) * ow);
      dcm.noalias() = wm.transpose() * dym;
      col2im(dcol.data(), h, w, dx.data() + int64_t(i) * in_ch_ * h * w);
      if (param_grads) {
        im2col(x.data() + int64_t(i) * in_ch_ * h * w, h, w, col.data());
        ConstMatMap<T> cm(col.data(), ckk, int64_t(oh) * ow);
        dwm.noalias() += dym * cm.transpose();
        for (int c = 0; c < out_ch_; ++c) db[c] += dym.row(c).sum();
      }
    }
    if (param_grads) {
      param_grads->push_back(std::move(dw));
      param_grads->push_back(std::move(db));
    }
    return dx;
  }

  std::vector<TensorT<T>*> params() override { return {&weight_, &bias_}; }
  std::vector<const TensorT<T>*> params() const override { return {&weight_, &bias_}; }

  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Conv2d<T>>(*this); }

 private:
  void im2col(const T* img, int h, int w, T* col) const {
    const int oh = out_h(h), ow = out_w(w);
    const int64_t plane = int64_t(h) * w;
    int64_t row = 0;
    for (int c = 0; c < in_ch_; ++c) {
      for (int ki = 0; ki < k_; ++ki) {
        for (int kj = 0; kj < k_; ++kj, ++row) {
          T* dst = col + row * oh * ow;
          for (int oi = 0; oi < oh; ++oi) {
            const int si = oi * stride_ + ki - pad_;
            for (int oj = 0; oj < ow; ++oj) {
              const int sj = oj * stride_ + kj - pad_;
              dst[oi * ow + oj] = (si >= 0 && si < h && sj >= 0 && sj < w)
                                      ? img[c * plane + int64_t(si) * w + sj]
                                      : T(0);
            }
          }
        }
      }
    }
  }

  void col2im(const T* col, int h, int w, T* img) const {
    const int oh = out_h(h), ow = out_w(w);
    const int64_t plane = int64_t(h) * w;
    std::fill(img, img + int64_t(in_ch_) * plane, T(0));
    int64_t row = 0;
    for (int c = 0; c < in_ch_; ++c) {
      for (int ki = 0; ki < k_; ++ki) {
        for (int kj = 0; kj < k_; ++kj, ++row) {
          const T* src = col + row * oh * ow;
          for (int oi = 0; oi < oh; ++oi) {
            const int si = oi * stride_ + ki - pad_;
            if (si < 0 || si >= h) continue;
            for (int oj = 0; oj < ow; ++oj) {
              const int sj = oj * stride_ + kj - pad_;
              if (sj >= 0 && sj < w) img[c * plane + int64_t(si) * w + sj] += src[oi * ow + oj];
            }
          }
        }
      }
    }
  }

  int in_ch_, out_ch_, k_, stride_, pad_;
  TensorT<T> weight_, bias_;
};

// ---------------------------------------------------------------------------
// Elementwise activations.

template <class T>
class ReLU : public Layer<T> {
 public:
  using Layer<T>::Layer;

  TensorT<T> forward(const TensorT<T>& x, std::vector<TensorT<T>>*) const override {
    TensorT<T> y = x;
    for (int64_t i = 0; i < y.numel(); ++i) y[i] = y[i] > 0 ? y[i] : T(0);
    return y;
  }

  TensorT<T> backward(const TensorT<T>& dy, const TensorT<T>& x, const TensorT<T>&,
                      const std::vector<TensorT<T>>&, std::vector<TensorT<T>>*) const override {
    TensorT<T> dx = dy;
    for (int64_t i = 0; i < dx.numel(); ++i) dx[i] = x[i] > 0 ? dx[i] : T(0);
    return dx;
  }

  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<ReLU<T>>(*this); }
};

template <class T>
class Tanh : public Layer<T> {
 public:
  using Layer<T>::Layer;

  TensorT<T> forward(const TensorT<T>& x, std::vector<TensorT<T>>*) const override {
    TensorT<T> y = x;
    for (int64_t i = 0; i < y.numel(); ++i) y[i] = std::tanh(y[i]);
    return y;
  }

  TensorT<T> backward(const TensorT<T>& dy, const TensorT<T>&, const TensorT<T>& y,
                      const std::vector<TensorT<T>>&, std::vector<TensorT<T>>*) const override {
    TensorT<T> dx = dy;
    for (int64_t i = 0; i < dx.numel(); ++i) dx[i] *= (T(1) - y[i] * y[i]);
    return dx;
  }

  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Tanh<T>>(*this); }
};

// ---------------------------------------------------------------------------
// 2x2 max pooling, stride 2. Ties route the gradient to the first maximal
// element in scan order, which keeps backward deterministic.

template <class T>
class MaxPool2x2 : public Layer<T> {
 public:
  using Layer<T>::Layer;

  TensorT<T> forward(const TensorT<T>& x, std::vector<TensorT<T>>*) const override {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    TensorT<T> y({n, c, h / 2, w / 2});
    const int oh = h / 2, ow = w / 2;
    for (int i = 0; i < n; ++i)
      for (int ch = 0; ch < c; ++ch)
        for (int oi = 0; oi < oh; ++oi)
          for (int oj = 0; oj < ow; ++oj) {
            T best = x.at(i, ch, 2 * oi, 2 * oj);
            for (int di = 0; di < 2; ++di)
              for (int dj = 0; dj < 2; ++dj) best = std::max(best, x.at(i, ch, 2 * oi + di, 2 * oj + dj));
            y.at(i, ch, oi, oj) = best;
          }
    return y;
  }

  TensorT<T> backward(const TensorT<T>& dy, const TensorT<T>& x, const TensorT<T>&,
                      const std::vector<TensorT<T>>&, std::vector<TensorT<T>>*) const override {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int oh = h / 2, ow = w / 2;
    TensorT<T> dx(x.shape());
    for (int i = 0; i < n; ++i)
      for (int ch = 0; ch < c; ++ch)
        for (int oi = 0; oi < oh; ++oi)
          for (int oj = 0; oj < ow; ++oj) {
            int bi = 2 * oi, bj = 2 * oj;
            T best = x.at(i, ch, bi, bj);
            for (int di = 0; di < 2; ++di)
              for (int dj = 0; dj < 2; ++dj) {
                if (x.at(i, ch, 2 * oi + di, 2 * oj + dj) > best) {
                  best = x.at(i, ch, 2 * oi + di, 2 * oj + dj);
                  bi = 2 * oi + di;
                  bj = 2 * oj + dj;
                }
              }
            dx.at(i, ch, bi, bj) += dy.at(i, ch, oi, oj);
          }
    return dx;
  }

  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<MaxPool2x2<T>>(*this); }
};

// ---------------------------------------------------------------------------
// Shape adapters.

template <class T>
class Flatten : public Layer<T> {
 public:
  using Layer<T>::Layer;

  TensorT<T> forward(const TensorT<T>& x, std::vector<TensorT<T>>*) const override {
    const int n = x.dim(0);
    return x.reshaped({n, static_cast<int>(x.numel() / n)});
  }

  TensorT<T> backward(const TensorT<T>& dy, const TensorT<T>& x, const TensorT<T>&,
                      const std::vector<TensorT<T>>&, std::vector<TensorT<T>>*) const override {
    return dy.reshaped(x.shape());
  }

  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Flatten<T>>(*this); }
};

/// Splits an image into non-overlapping square patches and lays each out as a
/// token vector: (N,C,H,W) -> (N, (H/p)*(W/p), C*p*p).
template <class T>
class Patchify : public Layer<T> {
 public:
  Patchify(std::string name, int patch) : Layer<T>(std::move(name)), p_(patch) {}

  TensorT<T> forward(const TensorT<T>& x, std::vector<TensorT<T>>*) const override {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (h % p_ || w % p_) throw ContractError("patchify: image size not divisible by patch");
    const int th = h / p_, tw = w / p_;
    TensorT<T> y({n, th * tw, c * p_ * p_});
    for (int i = 0; i < n; ++i)
      for (int ti = 0; ti < th; ++ti)
        for (int tj = 0; tj < tw; ++tj) {
          int tok = ti * tw + tj;
          int64_t d = 0;
          for (int ch = 0; ch < c; ++ch)
            for (int pi = 0; pi < p_; ++pi)
              for (int pj = 0; pj < p_; ++pj, ++d)
                y.at(i, tok, static_cast<int>(d)) = x.at(i, ch, ti * p_ + pi, tj * p_ + pj);
        }
    return y;
  }

  TensorT<T> backward(const TensorT<T>& dy, const TensorT<T>& x, const TensorT<T>&,
                      const std::vector<TensorT<T>>&, std::vector<TensorT<T>>*) const override {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int th = h / p_, tw = w / p_;
    TensorT<T> dx(x.shape());
    for (int i = 0; i < n; ++i)
      for (int ti = 0; ti < th; ++ti)
        for (int tj = 0; tj < tw; ++tj) {
          int tok = ti * tw + tj;
          int64_t d = 0;
          for (int ch = 0; ch < c; ++ch)
            for (int pi = 0; pi < p_; ++pi)
              for (int pj = 0; pj < p_; ++pj, ++d)
                dx.at(i, ch, ti * p_ + pi, tj * p_ + pj) = dy.at(i, tok, static_cast<int>(d));
        }
    return dx;
  }

  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Patchify<T>>(*this); }

 private:
  int p_;
};

/// Nearest-neighbour 2x upsampling.
template <class T>
class Upsample2x : public Layer<T> {
 public:
  using Layer<T>::Layer;

  TensorT<T> forward(const TensorT<T>& x, std::vector<TensorT<T>>*) const override {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    TensorT<T> y({n, c, 2 * h, 2 * w});
    for (int i = 0; i < n; ++i)
      for (int ch = 0; ch < c; ++ch)
        for (int hi = 0; hi < h; ++hi)
          for (int wi = 0; wi < w; ++wi) {
            T v = x.at(i, ch, hi, wi);
            y.at(i, ch, 2 * hi, 2 * wi) = v;
            y.at(i, ch, 2 * hi, 2 * wi + 1) = v;
            y.at(i, ch, 2 * hi + 1, 2 * wi) = v;
            y.at(i, ch, 2 * hi + 1, 2 * wi + 1) = v;
          }
    return y;
  }

  TensorT<T> backward(const TensorT<T>& dy, const TensorT<T>& x, const TensorT<T>&,
                      const std::vector<TensorT<T>>&, std::vector<TensorT<T>>*) const override {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    TensorT<T> dx(x.shape());
    for (int i = 0; i < n; ++i)
      for (int ch = 0; ch < c; ++ch)
        for (int hi = 0; hi < h; ++hi)
          for (int wi = 0; wi < w; ++wi)
            dx.at(i, ch, hi, wi) = dy.at(i, ch, 2 * hi, 2 * wi) + dy.at(i, ch, 2 * hi, 2 * wi + 1) +
                                   dy.at(i, ch, 2 * hi + 1, 2 * wi) + dy.at(i, ch, 2 * hi + 1, 2 * wi + 1);
    return dx;
  }

  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Upsample2x<T>>(*this); }
};

// ---------------------------------------------------------------------------
// Single-head scaled dot-product self-attention over token sequences
// (N, T, d) -> (N, T, d).

template <class T>
class SelfAttention : public Layer<T> {
 public:
  SelfAttention(std::string name, int dim)
      : Layer<T>(std::move(name)),
        dim_(dim),
        wq_({dim, dim}),
        wk_({dim, dim}),
        wv_({dim, dim}),
        bq_({dim}),
        bk_({dim}),
        bv_({dim}) {}

  int dim() const { return dim_; }

  TensorT<T> forward(const TensorT<T>& x, std::vector<TensorT<T>>* saved) const override {
    const int n = x.dim(0), t = x.dim(1);
    TensorT<T> q = project(x, wq_, bq_);
    TensorT<T> k = project(x, wk_, bk_);
    TensorT<T> v = project(x, wv_, bv_);
    TensorT<T> attn({n, t, t});
    TensorT<T> y({n, t, dim_});
    const T scale = T(1) / std::sqrt(T(dim_));
    for (int i = 0; i < n; ++i) {
      ConstMatMap<T> qm(q.data() + int64_t(i) * t * dim_, t, dim_);
      ConstMatMap<T> km(k.data() + int64_t(i) * t * dim_, t, dim_);
      ConstMatMap<T> vm(v.data() + int64_t(i) * t * dim_, t, dim_);
      MatMap<T> am(attn.data() + int64_t(i) * t * t, t, t);
      am.noalias() = qm * km.transpose() * scale;
      // row-wise softmax
      for (int r = 0; r < t; ++r) {
        T mx = am.row(r).maxCoeff();
        am.row(r) = (am.row(r).array() - mx).exp();
        am.row(r) /= am.row(r).sum();
      }
      MatMap<T> ym(y.data() + int64_t(i) * t * dim_, t, dim_);
      ym.noalias() = am * vm;
    }
    if (saved) {
      saved->push_back(q);
      saved->push_back(k);
      saved->push_back(v);
      saved->push_back(attn);
    }
    return y;
  }

  TensorT<T> backward(const TensorT<T>& dy, const TensorT<T>& x, const TensorT<T>&,
                      const std::vector<TensorT<T>>& saved,
                      std::vector<TensorT<T>>* param_grads) const override {
    const int n = x.dim(0), t = x.dim(1);
    const TensorT<T>& q = saved[0];
    const TensorT<T>& k = saved[1];
    const TensorT<T>& v = saved[2];
    const TensorT<T>& attn = saved[3];
    const T scale = T(1) / std::sqrt(T(dim_));
    TensorT<T> dq({n, t, dim_}), dk({n, t, dim_}), dv({n, t, dim_});
    for (int i = 0; i < n; ++i) {
      ConstMatMap<T> dym(dy.data() + int64_t(i) * t * dim_, t, dim_);
      ConstMatMap<T> qm(q.data() + int64_t(i) * t * dim_, t, dim_);
      ConstMatMap<T> km(k.data() + int64_t(i) * t * dim_, t, dim_);
      ConstMatMap<T> vm(v.data() + int64_t(i) * t * dim_, t, dim_);
      ConstMatMap<T> am(attn.data() + int64_t(i) * t * t, t, t);
      Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> da = dym * vm.transpose();
      // softmax jacobian per row: ds = a .* (da - rowsum(da .* a))
      Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> ds(t, t);
      for (int r = 0; r < t; ++r) {
        T dot = (da.row(r).array() * am.row(r).array()).sum();
        ds.row(r) = am.row(r).array() * (da.row(r).array() - dot);
      }
      MatMap<T> dqm(dq.data() + int64_t(i) * t * dim_, t, dim_);
      MatMap<T> dkm(dk.data() + int64_t(i) * t * dim_, t, dim_);
      MatMap<T> dvm(dv.data() + int64_t(i) * t * dim_, t, dim_);
      dqm.noalias() = ds * km * scale;
      dkm.noalias() = ds.transpose() * qm * scale;
      dvm.noalias() = am.transpose() * dym;
    }
    TensorT<T> dx(x.shape());
    TensorT<T> dwq({dim_, dim_}), dwk({dim_, dim_}), dwv({dim_, dim_});
    TensorT<T> dbq({dim_}), dbk({dim_}), dbv({dim_});
    project_backward(x, wq_, dq, dx, param_grads ? &dwq : nullptr, param_grads ? &dbq : nullptr);
    project_backward(x, wk_, dk, dx, param_grads ? &dwk : nullptr, param_grads ? &dbk : nullptr);
    project_backward(x, wv_, dv, dx, param_grads ? &dwv : nullptr, param_grads ? &dbv : nullptr);
    if (param_grads) {
      param_grads->push_back(std::move(dwq));
      param_grads->push_back(std::move(dbq));
      param_grads->push_back(std::move(dwk));
      param_grads->push_back(std::move(dbk));
      param_grads->push_back(std::move(dwv));
      param_grads->push_back(std::move(dbv));
    }
    return dx;
  }

  std::vector<TensorT<T>*> params() override { return {&wq_, &bq_, &wk_, &bk_, &wv_, &bv_}; }
  std::vector<const TensorT<T>*> params() const override {
    return {&wq_, &bq_, &wk_, &bk_, &wv_, &bv_};
  }

  std::unique_ptr<Layer<T>> clone() const override {
    return std::make_unique<SelfAttention<T>>(*this);
  }

 private:
  TensorT<T> project(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b) const {
    const int64_t rows = x.numel() / dim_;
    TensorT<T> y(x.shape());
    ConstMatMap<T> xm(x.data(), rows, dim_);
    ConstMatMap<T> wm(w.data(), dim_, dim_);
    MatMap<T> ym(y.data(), rows, dim_);
    ym.noalias() = xm * wm.transpose();
    for (int64_t r = 0; r < rows; ++r)
      for (int j = 0; j < dim_; ++j) y.data()[r * dim_ + j] += b[j];
    return y;
  }

  void project_backward(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& dproj,
                        TensorT<T>& dx_accum, TensorT<T>* dw, TensorT<T>* db) const {
    const int64_t rows = x.numel() / dim_;
    ConstMatMap<T> dpm(dproj.data(), rows, dim_);
    ConstMatMap<T> wm(w.data(), dim_, dim_);
    MatMap<T> dxm(dx_accum.data(), rows, dim_);
    dxm.noalias() += dpm * wm;
    if (dw) {
      ConstMatMap<T> xm(x.data(), rows, dim_);
      MatMap<T> dwm(dw->data(), dim_, dim_);
      dwm.noalias() += dpm.transpose() * xm;
    }
    if (db) {
      for (int64_t r = 0; r < rows; ++r)
        for (int j = 0; j < dim_; ++j) (*db)[j] += dproj.data()[r * dim_ + j];
    }
  }

  int dim_;
  TensorT<T> wq_, wk_, wv_, bq_, bk_, bv_;
};

/// Mean over the token axis: (N, T, d) -> (N, d).
template <class T>
class MeanPoolTokens : public Layer<T> {
 public:
  using Layer<T>::Layer;

  TensorT<T> forward(const TensorT<T>& x, std::vector<TensorT<T>>*) const override {
    const int n = x.dim(0), t = x.dim(1), d = x.dim(2);
    TensorT<T> y({n, d});
    for (int i = 0; i < n; ++i)
      for (int tok = 0; tok < t; ++tok)
        for (int j = 0; j < d; ++j) y.at(i, j) += x.at(i, tok, j);
    y *= T(1) / T(t);
    return y;
  }

  TensorT<T> backward(const TensorT<T>& dy, const TensorT<T>& x, const TensorT<T>&,
                      const std::vector<TensorT<T>>&, std::vector<TensorT<T>>*) const override {
    const int n = x.dim(0), t = x.dim(1), d = x.dim(2);
    TensorT<T> dx(x.shape());
    const T inv = T(1) / T(t);
    for (int i = 0; i < n; ++i)
      for (int tok = 0; tok < t; ++tok)
        for (int j = 0; j < d; ++j) dx.at(i, tok, j) = dy.at(i, j) * inv;
    return dx;
  }

  std::unique_ptr<Layer<T>> clone() const override {
    return std::make_unique<MeanPoolTokens<T>>(*this);
  }
};

}  // namespace geadv::nn
