#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "geadv/nn/model.hpp"
#include "geadv/rng.hpp"

namespace geadv::nn {

struct TrainConfig {
  int epochs = 20;
  int batch_size = 64;
  double learning_rate = 1e-3;
  uint64_t seed = 0;

  void validate() const {
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (batch_size <= 0) throw ConfigError("batch_size must be positive");
    if (learning_rate <= 0) throw ConfigError("learning_rate must be positive");
  }
};

template <class T>
class AdamT {
 public:
  explicit AdamT(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<TensorT<T>*>& params, const std::vector<TensorT<T>>& grads,
            double lr) {
    if (m_.empty()) {
      for (auto* p : params) {
        m_.emplace_back(p->shape());
        v_.emplace_back(p->shape());
      }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, double(t_));
    const double bc2 = 1.0 - std::pow(beta2_, double(t_));
    for (size_t i = 0; i < params.size(); ++i) {
      TensorT<T>& p = *params[i];
      const TensorT<T>& g = grads[i];
      for (int64_t j = 0; j < p.numel(); ++j) {
        double gj = double(g[j]);
        double m = beta1_ * double(m_[i][j]) + (1.0 - beta1_) * gj;
        double v = beta2_ * double(v_[i][j]) + (1.0 - beta2_) * gj * gj;
        m_[i][j] = static_cast<T>(m);
        v_[i][j] = static_cast<T>(v);
        p[j] -= static_cast<T>(lr * (m / bc1) / (std::sqrt(v / bc2) + eps_));
      }
    }
  }

 private:
  double beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::vector<TensorT<T>> m_, v_;
};

using Adam = AdamT<float>;

template <class T>
void sgd_step(const std::vector<TensorT<T>*>& params, const std::vector<TensorT<T>>& grads,
              double lr) {
  for (size_t i = 0; i < params.size(); ++i) {
    TensorT<T>& p = *params[i];
    for (int64_t j = 0; j < p.numel(); ++j) p[j] -= static_cast<T>(lr * double(grads[i][j]));
  }
}

struct TrainMetrics {
  std::vector<double> loss_curve;  // mean loss per epoch
  double final_train_accuracy = 0.0;
  double final_test_accuracy = 0.0;
};

template <class T>
TensorT<T> gather_images(const TensorT<T>& data, const std::vector<int>& idx, int lo, int hi) {
  const int c = data.dim(1), h = data.dim(2), w = data.dim(3);
  const int64_t stride = int64_t(c) * h * w;
  TensorT<T> out({hi - lo, c, h, w});
  for (int i = lo; i < hi; ++i) {
    const T* src = data.data() + int64_t(idx[static_cast<size_t>(i)]) * stride;
    std::copy(src, src + stride, out.data() + int64_t(i - lo) * stride);
  }
  return out;
}

/// Trains a private copy of the classifier with Adam on mean cross-entropy.
/// Deterministic for fixed seeds. Throws TrainingError naming the epoch if the
/// loss goes non-finite.
template <class T>
std::pair<ClassifierT<T>, TrainMetrics> train_classifier(const ClassifierT<T>& model,
                                                         const ImageBatchT<T>& train,
                                                         const ImageBatchT<T>& test,
                                                         const TrainConfig& cfg) {
  cfg.validate();
  ClassifierT<T> m = model;
  TrainMetrics metrics;
  AdamT<T> opt;
  Rng rng(cfg.seed);
  const int n = train.size();
  std::vector<int> idx(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng = rng.child("shuffle", static_cast<uint64_t>(epoch));
    shuffle_rng.shuffle(idx);
    double epoch_loss = 0.0;
    int batches = 0;
    for (int lo = 0; lo < n; lo += cfg.batch_size) {
      const int hi = std::min(n, lo + cfg.batch_size);
      TensorT<T> x = gather_images(train.data, idx, lo, hi);
      std::vector<int> y(static_cast<size_t>(hi - lo));
      for (int i = lo; i < hi; ++i) y[static_cast<size_t>(i - lo)] = train.labels[static_cast<size_t>(idx[static_cast<size_t>(i)])];
      TapeT<T> tape;
      TensorT<T> z = m.net.forward(x, &tape);
      auto [loss, dlogits] = softmax_cross_entropy(z, y);
      if (!std::isfinite(loss)) {
        throw TrainingError("loss diverged at epoch " + std::to_string(epoch));
      }
      std::vector<TensorT<T>> grads;
      m.net.backward(dlogits, tape, &grads);
      opt.step(m.net.parameters(), grads, cfg.learning_rate);
      epoch_loss += loss;
      ++batches;
    }
    metrics.loss_curve.push_back(batches ? epoch_loss / batches : 0.0);
  }
  metrics.final_train_accuracy = m.accuracy(train);
  metrics.final_test_accuracy = m.accuracy(test);
  return {std::move(m), metrics};
}

}  // namespace geadv::nn
