#pragma once

#include <string>
#include <vector>

#include "geadv/nn/model.hpp"

namespace geadv::attribution {

using nn::ClassifierT;
using nn::TapeT;
using nn::TargetClassLogit;

enum class PathKind { straight, nonlinear };

struct AttributionConfig {
  std::string layer_id;
  int steps = 30;  // path discretization n
  double beta = 1.0;
  PathKind path_kind = PathKind::straight;
  double path_lr = 2.0 / 255.0;  // ascent step for the nonlinear path
  // f_p and f_n are identity; the baseline is the black image.

  void validate() const {
    if (steps < 1) throw ConfigError("attribution steps must be >= 1");
    if (beta < 0) throw ConfigError("attribution beta must be >= 0");
    if (path_lr < 0) throw ConfigError("attribution path_lr must be >= 0");
  }
};

namespace detail {

/// Gradient of the batch-summed target-class logit with respect to the input.
template <class T>
TensorT<T> target_logit_input_grad(const ClassifierT<T>& model, const TensorT<T>& x,
                                   const std::vector<int>& y) {
  TapeT<T> tape;
  TensorT<T> z = model.net.forward(x, &tape);
  TargetClassLogit<T> sel(y);
  return model.net.backward(sel.grad(z), tape);
}

}  // namespace detail

/// Discretization points of the integration path, right-endpoint rule.
/// Straight: b + (m/n)(x - b) from the black baseline, m = 1..n.
/// Nonlinear: n ascent steps x_{t+1} = clip01(x_t + lr * sign(grad logit)).
template <class T>
std::vector<TensorT<T>> path_points(const TensorT<T>& x, const AttributionConfig& cfg,
                                    const ClassifierT<T>& model, const std::vector<int>& y) {
  cfg.validate();
  std::vector<TensorT<T>> points;
  points.reserve(static_cast<size_t>(cfg.steps));
  if (cfg.path_kind == PathKind::straight) {
    for (int m = 1; m <= cfg.steps; ++m) {
      TensorT<T> p = x;
      p *= static_cast<T>(double(m) / cfg.steps);
      points.push_back(std::move(p));
    }
  } else {
    TensorT<T> cur = x;
    for (int t = 0; t < cfg.steps; ++t) {
      if (cfg.path_lr > 0) {
        TensorT<T> g = detail::target_logit_input_grad(model, cur, y);
        for (int64_t i = 0; i < cur.numel(); ++i) {
          T step = g[i] > 0 ? T(1) : (g[i] < 0 ? T(-1) : T(0));
          cur[i] = std::min(T(1), std::max(T(0), cur[i] + static_cast<T>(cfg.path_lr) * step));
        }
      }
      points.push_back(cur);
    }
  }
  return points;
}

/// W = sum_{A>=0} A - beta * sum_{A<0} (-A), with identity transfer functions.
/// Positively homogeneous of degree 1 in A.
template <class T>
double weighted_attribution(const TensorT<T>& a, double beta) {
  double pos = 0.0, neg = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) {
    if (a[i] >= 0) {
      pos += double(a[i]);
    } else {
      neg += double(-a[i]);
    }
  }
  return pos - beta * neg;
}

template <class T>
struct AttributionResultT {
  TensorT<T> per_feature;  // A, shaped like the layer activation
  double weighted = 0.0;   // W
  TensorT<T> input_grad;   // dW/dx
};

using AttributionResult = AttributionResultT<float>;

/// Feature attribution at the configured layer and the input gradient of its
/// weighted sum W.
///
/// Straight path: A_j = (phi_j(x) - phi_j(b)) * IA_j with IA the path-averaged
/// gradient of the target logit at the layer; dW/dx flows through phi(x) with
/// the IA weights held fixed.
///
/// Nonlinear path: the path ascends the target logit from x; A_j =
/// (y_j(end) - y_j(x)) * gamma_j with gamma the path-averaged layer gradient.
/// dW/dx flows through both endpoints (the sign steps between them have zero
/// derivative almost everywhere), so a zero-length path gives exactly zero.
template <class T>
AttributionResultT<T> attribute(const ClassifierT<T>& model, const TensorT<T>& x,
                                const std::vector<int>& y, const AttributionConfig& cfg) {
  cfg.validate();
  const int li = model.net.layer_index(cfg.layer_id);
  TargetClassLogit<T> sel(y);

  // cotangent of the batch-summed target logit at the layer activation
  auto layer_grad = [&](const TensorT<T>& point, TapeT<T>* tape_out) {
    TapeT<T> local;
    TapeT<T>& tape = tape_out ? *tape_out : local;
    TensorT<T> z = model.net.forward(point, &tape);
    TensorT<T> d = sel.grad(z);
    const int last = model.net.size() - 1;
    for (int i = last; i > li; --i) {
      const TensorT<T>& x_in = (i == 0) ? tape.input : tape.outputs[static_cast<size_t>(i - 1)];
      d = model.net.layer(i).backward(d, x_in, tape.outputs[static_cast<size_t>(i)],
                                      tape.saved[static_cast<size_t>(i)], nullptr);
    }
    return d;
  };

  const auto points = path_points(x, cfg, model, y);
  TensorT<T> avg_grad;  // IA (straight) or gamma (nonlinear)
  for (const auto& p : points) {
    TensorT<T> g = layer_grad(p, nullptr);
    if (avg_grad.empty()) {
      avg_grad = std::move(g);
    } else {
      avg_grad += g;
    }
  }
  avg_grad *= static_cast<T>(1.0 / cfg.steps);

  AttributionResultT<T> res;
  TapeT<T> tape_x;
  model.net.forward(x, &tape_x);
  const TensorT<T>& feat_x = tape_x.outputs[static_cast<size_t>(li)];

  if (cfg.path_kind == PathKind::straight) {
    TensorT<T> b = TensorT<T>::zeros_like(x);
    TapeT<T> tape_b;
    model.net.forward(b, &tape_b);
    const TensorT<T>& feat_b = tape_b.outputs[static_cast<size_t>(li)];
    res.per_feature = feat_x;
    res.per_feature -= feat_b;
    for (int64_t i = 0; i < res.per_feature.numel(); ++i) res.per_feature[i] *= avg_grad[i];
    res.weighted = weighted_attribution(res.per_feature, cfg.beta);
    TensorT<T> cot = avg_grad;
    for (int64_t i = 0; i < cot.numel(); ++i) {
      if (res.per_feature[i] < 0) cot[i] *= static_cast<T>(cfg.beta);
    }
    res.input_grad = model.net.backward_from(li, cot, tape_x);
  } else {
    const TensorT<T>& end = points.back();
    TapeT<T> tape_end;
    model.net.forward(end, &tape_end);
    const TensorT<T>& feat_end = tape_end.outputs[static_cast<size_t>(li)];
    res.per_feature = feat_end;
    res.per_feature -= feat_x;
    for (int64_t i = 0; i < res.per_feature.numel(); ++i) res.per_feature[i] *= avg_grad[i];
    res.weighted = weighted_attribution(res.per_feature, cfg.beta);
    TensorT<T> cot = avg_grad;
    for (int64_t i = 0; i < cot.numel(); ++i) {
      if (res.per_feature[i] < 0) cot[i] *= static_cast<T>(cfg.beta);
    }
    res.input_grad = model.net.backward_from(li, cot, tape_end);
    res.input_grad -= model.net.backward_from(li, cot, tape_x);
  }
  return res;
}

/// Integrated gradients of the target-class logit from the black baseline,
/// right-endpoint rule: IG = x .* (1/n) sum_m grad f_y(m/n * x).
template <class T>
TensorT<T> integrated_gradients(const ClassifierT<T>& model, const TensorT<T>& x,
                                const std::vector<int>& y, int n) {
  if (n < 1) throw ConfigError("integrated_gradients needs n >= 1");
  TensorT<T> acc(x.shape());
  for (int m = 1; m <= n; ++m) {
    TensorT<T> p = x;
    p *= static_cast<T>(double(m) / n);
    acc += detail::target_logit_input_grad(model, p, y);
  }
  acc *= static_cast<T>(1.0 / n);
  for (int64_t i = 0; i < acc.numel(); ++i) acc[i] *= x[i];  // (x - b) with b = 0
  return acc;
}

}  // namespace geadv::attribution
