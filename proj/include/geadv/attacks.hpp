#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "geadv/io.hpp"
#include "geadv/nn/model.hpp"
#include "geadv/oracles.hpp"
#include "geadv/rng.hpp"

namespace geadv::attacks {

using nn::Classifier;
using nn::ImageBatch;

struct AttackBudget {
  double epsilon = 16.0 / 255.0;  // L-inf radius in [0,1] intensity units
  double step_alpha = 1.6 / 255.0;
  int iterations = 10;
  bool random_start = false;
  uint64_t seed = 0;

  void validate() const {
    if (!(epsilon > 0 && epsilon <= 1)) throw ConfigError("epsilon must lie in (0,1]");
    if (step_alpha <= 0) throw ConfigError("step_alpha must be positive");
    if (step_alpha > epsilon + 1e-12) throw ConfigError("step_alpha must not exceed epsilon");
    if (iterations < 1) throw ConfigError("iterations must be >= 1");
  }
};

struct AdversarialResult {
  Tensor x_adv;
  Tensor delta;                  // x_adv - x0
  std::vector<uint8_t> success;  // prediction flipped on the crafting model
  std::vector<double> trace;     // per-iteration mean loss on the crafting model
};

/// Projection onto the L-inf ball around x0 intersected with [0,1].
inline Tensor clip_project(const Tensor& x, const Tensor& x0, double eps) {
  if (!x.same_shape(x0)) throw ContractError("clip_project: shape mismatch");
  Tensor out = x;
  const float e = static_cast<float>(eps);
  for (int64_t i = 0; i < out.numel(); ++i) {
    float v = std::min(out[i], x0[i] + e);
    v = std::max(v, x0[i] - e);
    out[i] = std::min(1.0f, std::max(0.0f, v));
  }
  return out;
}

/// Uniform draw inside the eps-ball around x0, already projected.
inline Tensor random_start(const Tensor& x0, double eps, uint64_t seed) {
  Rng rng = Rng(seed).child("random_start");
  Tensor x = x0;
  for (int64_t i = 0; i < x.numel(); ++i) {
    x[i] += static_cast<float>(rng.uniform(-eps, eps));
  }
  return clip_project(x, x0, eps);
}

/// First-order descent toward an approximate stationary point of the given
/// loss, constrained to the eps-ball around the start. Stops early when the
/// gradient max-norm drops below grad_tol.
template <class LossGradFn>
Tensor stationary_point_search_fn(LossGradFn&& loss_grad, const Tensor& x, double eps,
                                  int max_steps, double grad_tol, double lr) {
  Tensor cur = x;
  for (int step = 0; step < max_steps; ++step) {
    auto [loss, g] = loss_grad(cur);
    (void)loss;
    if (double(max_abs(g)) < grad_tol) break;
    Tensor next = cur;
    for (int64_t i = 0; i < next.numel(); ++i) next[i] -= static_cast<float>(lr) * g[i];
    cur = clip_project(next, x, eps);
  }
  return cur;
}

inline Tensor stationary_point_search(const Classifier& model, const Tensor& x,
                                      const std::vector<int>& y, double eps, int max_steps,
                                      double grad_tol, double lr) {
  return stationary_point_search_fn(
      [&](const Tensor& p) { return nn::loss_and_input_grad(model, p, y); }, x, eps, max_steps,
      grad_tol, lr);
}

/// Clipped sign-step driver: x <- clip_project(x + alpha * sign(g)) for K
/// iterations, with sign(0) = 0. The oracle must be freshly reset. For a
/// frequency/stationary-point oracle the frozen base point is searched once,
/// right before the first step that needs it.
inline AdversarialResult iterative_attack(const Classifier& surrogate, const Tensor& x0,
                                          const std::vector<int>& y,
                                          oracles::GradientOracle& oracle,
                                          const AttackBudget& budget) {
  budget.validate();
  if (oracle.state().k != 0) {
    throw ContractError("iterative_attack: oracle not freshly reset (k != 0)");
  }
  const auto clean_pred = surrogate.predict(x0);
  Tensor x = budget.random_start ? random_start(x0, budget.epsilon, budget.seed) : x0;
  AdversarialResult res;
  const float alpha = static_cast<float>(budget.step_alpha);
  for (int k = 0; k < budget.iterations; ++k) {
    if (oracle.needs_stationary_point(k)) {
      const auto& cfg = oracle.config();
      oracle.set_stationary_point(stationary_point_search(surrogate, x0, y, budget.epsilon,
                                                          cfg.fsps_sp_max_steps,
                                                          cfg.fsps_sp_grad_tol, cfg.fsps_sp_lr));
    }
    oracles::OracleStep step = oracle.step(x, x0, y);
    if (!all_finite(step.g)) {
      throw AttackError("non-finite direction from '" +
                        std::string(oracles::method_name(oracle.config().method)) +
                        "' at iteration " + std::to_string(k));
    }
    Tensor next = x;
    for (int64_t i = 0; i < next.numel(); ++i) {
      const float gi = step.g[i];
      next[i] += alpha * (gi > 0 ? 1.0f : (gi < 0 ? -1.0f : 0.0f));
    }
    x = clip_project(next, x0, budget.epsilon);
    res.trace.push_back(nn::softmax_cross_entropy(surrogate.logits(x), y).first);
  }
  res.x_adv = x;
  res.delta = x;
  res.delta -= x0;
  const auto adv_pred = surrogate.predict(x);
  res.success.resize(adv_pred.size());
  for (size_t i = 0; i < adv_pred.size(); ++i) {
    res.success[i] = adv_pred[i] != clean_pred[i] ? 1 : 0;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Brute-force optimality certificate for the one-step sign attack on a binary
// logistic model (d <= 12 inputs).

struct BinaryLogistic {
  std::vector<double> w;
  double b = 0.0;

  /// log(1 + exp(-yhat * margin)) with yhat in {-1,+1} mapped from y in {0,1}.
  double loss(const std::vector<double>& x, int y) const {
    double m = b;
    for (size_t i = 0; i < w.size(); ++i) m += w[i] * x[i];
    const double z = (y == 1 ? 1.0 : -1.0) * m;
    return z > 0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
  }

  std::vector<double> loss_grad(const std::vector<double>& x, int y) const {
    double m = b;
    for (size_t i = 0; i < w.size(); ++i) m += w[i] * x[i];
    const double yh = y == 1 ? 1.0 : -1.0;
    const double sig = 1.0 / (1.0 + std::exp(yh * m));  // sigmoid(-yh*m)
    std::vector<double> g(w.size());
    for (size_t i = 0; i < w.size(); ++i) g[i] = -yh * sig * w[i];
    return g;
  }
};

/// Verifies by corner enumeration that the single sign step attains the
/// maximum loss over the 2^d corners of the L-inf ball (up to tie_tol).
inline bool fgsm_optimality_check(const BinaryLogistic& model, const std::vector<double>& x0,
                                  int y, double eps, double tie_tol = 1e-9) {
  const size_t d = model.w.size();
  if (d > 12) throw ConfigError("fgsm_optimality_check supports at most 12 dims");
  if (x0.size() != d) throw ContractError("x0 dimension mismatch");
  const auto g = model.loss_grad(x0, y);
  std::vector<double> x_step = x0;
  for (size_t i = 0; i < d; ++i) {
    x_step[i] += eps * (g[i] > 0 ? 1.0 : (g[i] < 0 ? -1.0 : 0.0));
  }
  const double step_loss = model.loss(x_step, y);
  double best = -1e300;
  std::vector<double> corner(d);
  for (uint32_t mask = 0; mask < (uint32_t(1) << d); ++mask) {
    for (size_t i = 0; i < d; ++i) {
      corner[i] = x0[i] + ((mask >> i) & 1 ? eps : -eps);
    }
    best = std::max(best, model.loss(corner, y));
  }
  return step_loss >= best - tie_tol;
}

// ---------------------------------------------------------------------------
// Persistence: adversarial batch tensors with a JSON sidecar.

inline void save_adversarial_batch(const std::filesystem::path& dir, const AdversarialResult& res,
                                   const std::string& method, const AttackBudget& budget,
                                   const Json& extra = Json::object(),
                                   const Tensor* x_clean = nullptr) {
  std::filesystem::create_directories(dir);
  getf::write(dir / "x_adv.getf", res.x_adv);
  getf::write(dir / "delta.getf", res.delta);
  if (x_clean) getf::write(dir / "x_clean.getf", *x_clean);
  Json side;
  side["method"] = method;
  side["epsilon"] = budget.epsilon;
  side["step_alpha"] = budget.step_alpha;
  side["iterations"] = budget.iterations;
  side["random_start"] = budget.random_start;
  side["seed"] = budget.seed;
  side["success"] = res.success;
  if (!extra.empty()) side["config"] = extra;
  write_json_file(dir / "sidecar.json", side);
}

inline std::pair<AdversarialResult, Json> load_adversarial_batch(const std::filesystem::path& dir) {
  AdversarialResult res;
  res.x_adv = getf::read(dir / "x_adv.getf");
  res.delta = getf::read(dir / "delta.getf");
  Json side = read_json_file(dir / "sidecar.json");
  for (const auto& s : side.value("success", std::vector<int>{})) {
    res.success.push_back(static_cast<uint8_t>(s));
  }
  return {std::move(res), std::move(side)};
}

}  // namespace geadv::attacks
