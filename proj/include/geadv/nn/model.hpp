#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "geadv/nn/layers.hpp"
#include "geadv/rng.hpp"
#include "geadv/tensor.hpp"

namespace geadv::nn {

/// Pass-local activations recorded during a taped forward. Owning the tape on
/// the caller side keeps networks immutable and shareable across threads.
template <class T>
struct TapeT {
  TensorT<T> input;
  std::vector<TensorT<T>> outputs;             // outputs[i] = activation after layer i
  std::vector<std::vector<TensorT<T>>> saved;  // layer-private intermediates
};

template <class T>
class SequentialT {
 public:
  SequentialT() = default;
  SequentialT(const SequentialT& o) { *this = o; }
  SequentialT& operator=(const SequentialT& o) {
    layers_.clear();
    for (const auto& l : o.layers_) layers_.push_back(l->clone());
    return *this;
  }
  SequentialT(SequentialT&&) noexcept = default;
  SequentialT& operator=(SequentialT&&) noexcept = default;

  SequentialT& add(std::unique_ptr<Layer<T>> layer) {
    layers_.push_back(std::move(layer));
    return *this;
  }

  int size() const { return static_cast<int>(layers_.size()); }
  const Layer<T>& layer(int i) const { return *layers_[static_cast<size_t>(i)]; }
  Layer<T>& layer(int i) { return *layers_[static_cast<size_t>(i)]; }

  std::vector<std::string> layer_names() const {
    std::vector<std::string> names;
    names.reserve(layers_.size());
    for (const auto& l : layers_) names.push_back(l->name());
    return names;
  }

  int layer_index(const std::string& name) const {
    for (size_t i = 0; i < layers_.size(); ++i) {
      if (layers_[i]->name() == name) return static_cast<int>(i);
    }
    throw ConfigError("unknown layer '" + name + "'");
  }

  TensorT<T> forward(const TensorT<T>& x, TapeT<T>* tape = nullptr) const {
    TensorT<T> cur = x;
    if (tape) {
      tape->input = x;
      tape->outputs.clear();
      tape->saved.assign(layers_.size(), {});
    }
    for (size_t i = 0; i < layers_.size(); ++i) {
      cur = layers_[i]->forward(cur, tape ? &tape->saved[i] : nullptr);
      if (tape) tape->outputs.push_back(cur);
    }
    return cur;
  }

  /// Resumes the forward pass with `features` substituted for the output of
  /// layer `from` (by index); runs layers from+1..end.
  TensorT<T> forward_from(int from, const TensorT<T>& features) const {
    TensorT<T> cur = features;
    for (size_t i = static_cast<size_t>(from) + 1; i < layers_.size(); ++i) {
      cur = layers_[i]->forward(cur, nullptr);
    }
    return cur;
  }

  /// Backpropagates a cotangent injected at the output of layer `from` down to
  /// the network input. With from = size()-1 this is a full backward pass.
  /// param_grads, when non-null, is assembled in parameters() order; layers
  /// above `from` contribute zeros.
  TensorT<T> backward_from(int from, const TensorT<T>& d_at, const TapeT<T>& tape,
                           std::vector<TensorT<T>>* param_grads = nullptr) const {
    std::vector<std::vector<TensorT<T>>> per_layer_grads(layers_.size());
    TensorT<T> d = d_at;
    for (int i = from; i >= 0; --i) {
      const TensorT<T>& x_in = (i == 0) ? tape.input : tape.outputs[static_cast<size_t>(i - 1)];
      d = layers_[static_cast<size_t>(i)]->backward(
          d, x_in, tape.outputs[static_cast<size_t>(i)], tape.saved[static_cast<size_t>(i)],
          param_grads ? &per_layer_grads[static_cast<size_t>(i)] : nullptr);
    }
    if (param_grads) {
      param_grads->clear();
      for (size_t i = 0; i < layers_.size(); ++i) {
        auto ps = layers_[i]->params();
        if (per_layer_grads[i].empty()) {
          for (auto* p : ps) param_grads->push_back(TensorT<T>(p->shape()));
        } else {
          for (auto& g : per_layer_grads[i]) param_grads->push_back(std::move(g));
        }
      }
    }
    return d;
  }

  TensorT<T> backward(const TensorT<T>& d_out, const TapeT<T>& tape,
                      std::vector<TensorT<T>>* param_grads = nullptr) const {
    return backward_from(size() - 1, d_out, tape, param_grads);
  }

  std::vector<TensorT<T>*> parameters() {
    std::vector<TensorT<T>*> ps;
    for (auto& l : layers_) {
      for (auto* p : l->params()) ps.push_back(p);
    }
    return ps;
  }
  std::vector<const TensorT<T>*> parameters() const {
    std::vector<const TensorT<T>*> ps;
    for (const auto& l : layers_) {
      for (const auto* p : l->params()) ps.push_back(p);
    }
    return ps;
  }

  int64_t param_count() const {
    int64_t n = 0;
    for (const auto* p : parameters()) n += p->numel();
    return n;
  }

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

using Sequential = SequentialT<float>;
using Tape = TapeT<float>;

/// Copies parameter values between two structurally identical networks, with
/// elementwise casts across scalar types. Used to mirror a float network into
/// a double replica for finite-difference references.
template <class T, class U>
void copy_params(const SequentialT<T>& src, SequentialT<U>& dst) {
  auto sp = src.parameters();
  auto dp = dst.parameters();
  if (sp.size() != dp.size()) throw ContractError("copy_params: structure mismatch");
  for (size_t i = 0; i < sp.size(); ++i) {
    if (sp[i]->shape() != dp[i]->shape()) throw ContractError("copy_params: shape mismatch");
    *dp[i] = cast_tensor<T, U>(*sp[i]);
  }
}

// ---------------------------------------------------------------------------
// Losses and classifier wrapper.

enum class LossKind { cross_entropy };

/// Mean softmax cross-entropy over the batch. Returns the loss and its
/// gradient with respect to the logits. Reductions accumulate in double.
template <class T>
std::pair<double, TensorT<T>> softmax_cross_entropy(const TensorT<T>& logits,
                                                    const std::vector<int>& labels) {
  const int n = logits.dim(0), k = logits.dim(1);
  if (static_cast<int>(labels.size()) != n) throw ContractError("labels length != batch size");
  TensorT<T> dlogits(logits.shape());
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const int y = labels[static_cast<size_t>(i)];
    if (y < 0 || y >= k) throw ContractError("label out of range");
    const T* z = logits.data() + int64_t(i) * k;
    T mx = z[0];
    for (int j = 1; j < k; ++j) mx = std::max(mx, z[j]);
    double sum = 0.0;
    for (int j = 0; j < k; ++j) sum += std::exp(double(z[j] - mx));
    const double lse = std::log(sum) + double(mx);
    total += lse - double(z[y]);
    T* d = dlogits.data() + int64_t(i) * k;
    for (int j = 0; j < k; ++j) {
      double p = std::exp(double(z[j] - mx)) / sum;
      d[j] = static_cast<T>((p - (j == y ? 1.0 : 0.0)) / n);
    }
  }
  return {total / n, dlogits};
}

/// Images with integer class labels; data is expected to live in [0,1].
template <class T>
struct ImageBatchT {
  TensorT<T> data;  // (N, C, H, W)
  std::vector<int> labels;

  int size() const { return data.ndim() == 4 ? data.dim(0) : 0; }

  void validate(int num_classes) const {
    if (data.ndim() != 4) throw ContractError("image batch must be rank 4");
    if (static_cast<int>(labels.size()) != data.dim(0)) {
      throw ContractError("labels length != batch size");
    }
    for (int64_t i = 0; i < data.numel(); ++i) {
      if (!(data[i] >= T(0) && data[i] <= T(1))) {
        throw ContractError("image values must be finite and in [0,1]");
      }
    }
    for (int y : labels) {
      if (y < 0 || y >= num_classes) throw ContractError("label out of range");
    }
  }
};

using ImageBatch = ImageBatchT<float>;

/// A differentiable classifier: a layer stack plus identification metadata.
/// Immutable after construction/training; inference and gradient queries are
/// const and thread-safe.
template <class T>
struct ClassifierT {
  std::string arch_id;
  int num_classes = 0;
  std::vector<int> input_shape;  // (C, H, W)
  uint64_t seed = 0;
  SequentialT<T> net;

  std::vector<std::string> layer_names() const { return net.layer_names(); }

  TensorT<T> logits(const TensorT<T>& x) const { return net.forward(x); }

  std::vector<int> predict(const TensorT<T>& x) const {
    TensorT<T> z = logits(x);
    const int n = z.dim(0), k = z.dim(1);
    std::vector<int> out(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      int best = 0;
      // strict > keeps the lowest index on ties
      for (int j = 1; j < k; ++j) {
        if (z.at(i, j) > z.at(i, best)) best = j;
      }
      out[static_cast<size_t>(i)] = best;
    }
    return out;
  }

  double accuracy(const ImageBatchT<T>& batch) const {
    auto pred = predict(batch.data);
    int hit = 0;
    for (size_t i = 0; i < pred.size(); ++i) hit += pred[i] == batch.labels[i];
    return batch.labels.empty() ? 0.0 : double(hit) / double(pred.size());
  }
};

using Classifier = ClassifierT<float>;

/// Exact gradient of the mean loss with respect to the input pixels.
template <class T>
std::pair<double, TensorT<T>> loss_and_input_grad(const ClassifierT<T>& model, const TensorT<T>& x,
                                                  const std::vector<int>& labels,
                                                  LossKind kind = LossKind::cross_entropy) {
  (void)kind;  // single supported loss
  TapeT<T> tape;
  TensorT<T> z = model.net.forward(x, &tape);
  auto [loss, dlogits] = softmax_cross_entropy(z, labels);
  TensorT<T> dx = model.net.backward(dlogits, tape);
  return {loss, dx};
}

/// Picks a scalar functional of the logits and its logit-space gradient.
template <class T>
struct LogitSelectorT {
  virtual ~LogitSelectorT() = default;
  virtual double value(const TensorT<T>& logits) const = 0;
  virtual TensorT<T> grad(const TensorT<T>& logits) const = 0;
};

/// Sum over the batch of each image's target-class logit. Images are
/// independent, so the batch gradient carries per-image gradients.
template <class T>
struct TargetClassLogit : LogitSelectorT<T> {
  std::vector<int> labels;
  explicit TargetClassLogit(std::vector<int> y) : labels(std::move(y)) {}

  double value(const TensorT<T>& logits) const override {
    double s = 0.0;
    for (int i = 0; i < logits.dim(0); ++i) s += double(logits.at(i, labels[static_cast<size_t>(i)]));
    return s;
  }
  TensorT<T> grad(const TensorT<T>& logits) const override {
    TensorT<T> d(logits.shape());
    for (int i = 0; i < logits.dim(0); ++i) d.at(i, labels[static_cast<size_t>(i)]) = T(1);
    return d;
  }
};

template <class T>
struct FeatureGradT {
  TensorT<T> features;          // activation at the named layer
  TensorT<T> d_scalar_d_feat;   // gradient of the scalar at that activation
  TensorT<T> d_scalar_d_input;  // gradient of the scalar at the input
};

/// Activation of a named layer plus exact gradients of a scalar functional of
/// the logits with respect to that activation and the input.
template <class T>
FeatureGradT<T> feature_and_grad(const ClassifierT<T>& model, const TensorT<T>& x,
                                 const std::string& layer_id, const LogitSelectorT<T>& selector) {
  const int li = model.net.layer_index(layer_id);
  TapeT<T> tape;
  TensorT<T> z = model.net.forward(x, &tape);
  TensorT<T> dlogits = selector.grad(z);
  FeatureGradT<T> out;
  out.features = tape.outputs[static_cast<size_t>(li)];
  // cotangent arriving at layer li = d(scalar)/d(features)
  std::vector<std::vector<TensorT<T>>> scratch;
  TensorT<T> d = dlogits;
  const int last = model.net.size() - 1;
  for (int i = last; i > li; --i) {
    const TensorT<T>& x_in = (i == 0) ? tape.input : tape.outputs[static_cast<size_t>(i - 1)];
    d = model.net.layer(i).backward(d, x_in, tape.outputs[static_cast<size_t>(i)],
                                    tape.saved[static_cast<size_t>(i)], nullptr);
  }
  out.d_scalar_d_feat = d;
  out.d_scalar_d_input = model.net.backward_from(li, d, tape);
  return out;
}

}  // namespace geadv::nn
