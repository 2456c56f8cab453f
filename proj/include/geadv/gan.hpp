#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "geadv/attacks.hpp"
#include "geadv/io.hpp"
#include "geadv/nn/model.hpp"
#include "geadv/nn/train.hpp"
#include "geadv/oracles.hpp"

namespace geadv::gan {

using nn::Classifier;
using nn::ImageBatch;
using nn::Sequential;
using nn::Tape;

struct GeneratorHandle {
  std::vector<int> input_shape;  // (C,H,W)
  uint64_t seed = 0;
  Sequential net;  // ends in tanh, so raw outputs live in (-1,1)

  int64_t param_count() const { return net.param_count(); }
  Tensor raw(const Tensor& x) const { return net.forward(x); }
};

struct DiscriminatorHandle {
  std::vector<int> input_shape;
  uint64_t seed = 0;
  Sequential net;  // produces one logit per image

  /// Per-image probability, strictly inside (0,1).
  Tensor prob(const Tensor& x) const {
    Tensor z = net.forward(x);
    for (int64_t i = 0; i < z.numel(); ++i) {
      float p = 1.0f / (1.0f + std::exp(-z[i]));
      z[i] = std::min(1.0f - 1e-6f, std::max(1e-6f, p));
    }
    return z;
  }
};

namespace detail {
inline void init_weights(Tensor& w, int fan_in, Rng& rng, double gain = 2.0) {
  rng.fill_normal(w, 0.0, std::sqrt(gain / double(fan_in)));
}
}  // namespace detail

/// Small encoder-decoder perturbation generator. Deliberately tiny: its
/// parameter count stays well below every classifier in the zoo.
inline GeneratorHandle build_generator(const std::vector<int>& input_shape, uint64_t seed) {
  using namespace nn;
  if (input_shape.size() != 3) throw ConfigError("generator input_shape must be (C,H,W)");
  const int c = input_shape[0];
  if (input_shape[1] % 2 || input_shape[2] % 2) {
    throw ConfigError("generator needs even H,W");
  }
  GeneratorHandle g;
  g.input_shape = input_shape;
  g.seed = seed;
  Rng rng = Rng(seed).child("gen_init");
  auto conv = [&](std::string name, int ic, int oc, int k, int stride, int pad) {
    auto l = std::make_unique<Conv2d<float>>(std::move(name), ic, oc, k, stride, pad);
    detail::init_weights(l->weight(), ic * k * k, rng);
    return l;
  };
  g.net.add(conv("enc1", c, 8, 3, 1, 1))
      .add(std::make_unique<ReLU<float>>("enc1_relu"))
      .add(conv("enc2", 8, 16, 3, 2, 1))
      .add(std::make_unique<ReLU<float>>("enc2_relu"))
      .add(conv("mid", 16, 16, 3, 1, 1))
      .add(std::make_unique<ReLU<float>>("mid_relu"))
      .add(std::make_unique<Upsample2x<float>>("up"))
      .add(conv("dec1", 16, 8, 3, 1, 1))
      .add(std::make_unique<ReLU<float>>("dec1_relu"))
      .add(conv("dec2", 8, c, 3, 1, 1))
      .add(std::make_unique<Tanh<float>>("bound"));
  return g;
}

inline DiscriminatorHandle build_discriminator(const std::vector<int>& input_shape, uint64_t seed) {
  using namespace nn;
  if (input_shape.size() != 3) throw ConfigError("discriminator input_shape must be (C,H,W)");
  const int c = input_shape[0], h = input_shape[1], w = input_shape[2];
  if (h % 4 || w % 4) throw ConfigError("discriminator needs H,W divisible by 4");
  DiscriminatorHandle d;
  d.input_shape = input_shape;
  d.seed = seed;
  Rng rng = Rng(seed).child("disc_init");
  auto conv = [&](std::string name, int ic, int oc, int k, int stride, int pad) {
    auto l = std::make_unique<Conv2d<float>>(std::move(name), ic, oc, k, stride, pad);
    detail::init_weights(l->weight(), ic * k * k, rng);
    return l;
  };
  auto head = std::make_unique<Linear<float>>("head", 16 * (h / 4) * (w / 4), 1);
  detail::init_weights(head->weight(), 16 * (h / 4) * (w / 4), rng, 1.0);
  d.net.add(conv("d1", c, 8, 3, 2, 1))
      .add(std::make_unique<ReLU<float>>("d1_relu"))
      .add(conv("d2", 8, 16, 3, 2, 1))
      .add(std::make_unique<ReLU<float>>("d2_relu"))
      .add(std::make_unique<Flatten<float>>("flat"))
      .add(std::move(head));
  return d;
}

/// Fast generation path: delta is the eps-scaled bounded generator output, so
/// the L-inf budget holds by construction; no gradient work happens here.
inline attacks::AdversarialResult generate_adversarial(const GeneratorHandle& g, const Tensor& x,
                                                       double eps) {
  Tensor raw = g.net.forward(x);
  attacks::AdversarialResult res;
  res.x_adv = x;
  for (int64_t i = 0; i < raw.numel(); ++i) {
    float v = x[i] + static_cast<float>(eps) * raw[i];
    res.x_adv[i] = std::min(1.0f, std::max(0.0f, v));
  }
  res.delta = res.x_adv;
  res.delta -= x;
  return res;
}

/// Discriminator and (non-saturating) generator GAN losses on probabilities,
/// logs guarded at 1e-12.
inline std::pair<double, double> gan_losses(const DiscriminatorHandle& d, const Tensor& x_real,
                                            const Tensor& x_adv) {
  const Tensor p_real = d.prob(x_real);
  const Tensor p_adv = d.prob(x_adv);
  double l_d = 0.0, l_g = 0.0;
  const int n = p_real.dim(0);
  for (int i = 0; i < n; ++i) {
    l_d -= std::log(std::max(1e-12, double(p_real[i])));
    l_d -= std::log(std::max(1e-12, 1.0 - double(p_adv[i])));
    l_g -= std::log(std::max(1e-12, double(p_adv[i])));
  }
  return {l_d / n, l_g / n};
}

/// mean over the batch of max(0, ||delta_i||_2 - bound).
inline double hinge_loss(const Tensor& delta, double bound) {
  const int n = delta.dim(0);
  const int64_t stride = delta.numel() / n;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    double sq = 0.0;
    const float* p = delta.data() + int64_t(i) * stride;
    for (int64_t j = 0; j < stride; ++j) sq += double(p[j]) * p[j];
    total += std::max(0.0, std::sqrt(sq) - bound);
  }
  return total / n;
}

enum class GanOptimizer { adam, sgd };

struct GanTrainConfig {
  int epochs = 60;
  int batch_size = 64;
  double alpha = 1.0;       // weight of the GAN term in the generator objective
  double beta = 1.0;        // weight of the hinge term
  double adv_lambda = 10.0; // weight of the adversarial / edited term
  std::array<double, 2> eta_g = {1e-4, 1e-4};  // learning rates before/after the first threshold
  std::array<double, 2> eta_d = {1e-4, 1e-4};
  std::vector<int> change_thresholds = {20, 40};
  std::array<int, 2> d_steps = {1, 1};  // per-batch update counts before/after the first threshold
  std::array<int, 2> g_steps = {2, 1};
  double hinge_bound = 0.0;  // 0 resolves to 0.3 * eps * sqrt(C*H*W)
  double epsilon = 16.0 / 255.0;
  bool sign_cotangent = false;  // inject sign(g) instead of the L1-normalized direction
  GanOptimizer optimizer = GanOptimizer::adam;
  oracles::OracleConfig oracle = oracles::oracle_defaults(oracles::Method::fsps);
  uint64_t seed = 0;

  void validate() const {
    if (epochs < 1) throw ConfigError("gan epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("gan batch_size must be >= 1");
    if (alpha < 0 || beta < 0 || adv_lambda < 0) throw ConfigError("gan loss weights must be >= 0");
    for (double e : eta_g)
      if (e <= 0) throw ConfigError("eta_g entries must be positive");
    for (double e : eta_d)
      if (e <= 0) throw ConfigError("eta_d entries must be positive");
    int prev = -1;
    for (int t : change_thresholds) {
      if (t <= prev) throw ConfigError("change_thresholds must be strictly increasing");
      if (t >= epochs) throw ConfigError("change_thresholds must be below epochs");
      prev = t;
    }
    for (int s : d_steps)
      if (s < 0) throw ConfigError("d_steps must be >= 0");
    for (int s : g_steps)
      if (s < 0) throw ConfigError("g_steps must be >= 0");
    if (!(epsilon > 0 && epsilon <= 1)) throw ConfigError("gan epsilon must lie in (0,1]");
    if (hinge_bound < 0) throw ConfigError("hinge_bound must be >= 0");
  }

  int phase(int epoch) const {
    return (!change_thresholds.empty() && epoch >= change_thresholds[0]) ? 1 : 0;
  }

  double resolved_hinge_bound(const std::vector<int>& shape) const {
    if (hinge_bound > 0) return hinge_bound;
    const double dims = double(shape[0]) * shape[1] * shape[2];
    return 0.3 * epsilon * std::sqrt(dims);
  }
};

struct GanTrainResult {
  GeneratorHandle generator;
  DiscriminatorHandle discriminator;
  std::vector<double> d_loss_curve;      // per-epoch means
  std::vector<double> g_gan_loss_curve;  // GAN part of the generator objective
  std::vector<double> hinge_curve;
};

namespace detail {

enum class GanMode { baseline, edited };

inline GanTrainResult train_gan(GeneratorHandle g, DiscriminatorHandle d,
                                const Classifier& surrogate, const ImageBatch& data,
                                const GanTrainConfig& cfg, GanMode mode) {
  cfg.validate();
  const double hinge_c = cfg.resolved_hinge_bound(g.input_shape);
  GanTrainResult out;
  nn::Adam opt_g, opt_d;
  Rng rng(cfg.seed);
  std::unique_ptr<oracles::GradientOracle> oracle;
  if (mode == GanMode::edited && cfg.adv_lambda > 0) {
    oracle = std::make_unique<oracles::GradientOracle>(cfg.oracle, &surrogate);
  }

  const int n = data.size();
  std::vector<int> idx(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const int phase = cfg.phase(epoch);
    Rng shuffle_rng = rng.child("shuffle", static_cast<uint64_t>(epoch));
    shuffle_rng.shuffle(idx);
    double ep_d = 0.0, ep_g = 0.0, ep_h = 0.0;
    int batches = 0;
    for (int lo = 0; lo < n; lo += cfg.batch_size, ++batches) {
      const int hi = std::min(n, lo + cfg.batch_size);
      const int bn = hi - lo;
      Tensor x = nn::gather_images(data.data, idx, lo, hi);
      std::vector<int> y(static_cast<size_t>(bn));
      for (int i = lo; i < hi; ++i) y[static_cast<size_t>(i - lo)] = data.labels[static_cast<size_t>(idx[static_cast<size_t>(i)])];

      // discriminator updates
      for (int ds = 0; ds < cfg.d_steps[static_cast<size_t>(phase)]; ++ds) {
        Tensor x_adv = generate_adversarial(g, x, cfg.epsilon).x_adv;
        Tape tr, tf;
        Tensor zr = d.net.forward(x, &tr);
        Tensor zf = d.net.forward(x_adv, &tf);
        Tensor dzr(zr.shape()), dzf(zf.shape());
        double loss_d = 0.0;
        for (int i = 0; i < bn; ++i) {
          const double sr = 1.0 / (1.0 + std::exp(-double(zr[i])));
          const double sf = 1.0 / (1.0 + std::exp(-double(zf[i])));
          loss_d += -std::log(std::max(1e-12, sr)) - std::log(std::max(1e-12, 1.0 - sf));
          dzr[i] = static_cast<float>(-(1.0 - sr) / bn);
          dzf[i] = static_cast<float>(sf / bn);
        }
        std::vector<Tensor> gr, gf;
        d.net.backward(dzr, tr, &gr);
        d.net.backward(dzf, tf, &gf);
        for (size_t i = 0; i < gr.size(); ++i) gr[i] += gf[i];
        if (cfg.optimizer == GanOptimizer::adam) {
          opt_d.step(d.net.parameters(), gr, cfg.eta_d[static_cast<size_t>(phase)]);
        } else {
          nn::sgd_step(d.net.parameters(), gr, cfg.eta_d[static_cast<size_t>(phase)]);
        }
        ep_d += loss_d / bn;
      }

      // generator updates
      for (int gs = 0; gs < cfg.g_steps[static_cast<size_t>(phase)]; ++gs) {
        Tape tg;
        Tensor raw = g.net.forward(x, &tg);
        Tensor delta = raw;
        delta *= static_cast<float>(cfg.epsilon);
        Tensor x_adv = x;
        Tensor mask(x.shape());
        for (int64_t i = 0; i < x.numel(); ++i) {
          const float v = x[i] + delta[i];
          mask[i] = (v >= 0.0f && v <= 1.0f) ? 1.0f : 0.0f;
          x_adv[i] = std::min(1.0f, std::max(0.0f, v));
        }

        Tensor cot_xadv(x.shape());
        if (cfg.adv_lambda > 0) {
          if (mode == GanMode::edited) {
            oracle->reset(mix_seed(cfg.seed, hash_tag("oracle"), static_cast<uint64_t>(epoch),
                                   static_cast<uint64_t>(batches)));
            if (oracle->needs_stationary_point(0)) {
              const auto& ocfg = oracle->config();
              oracle->set_stationary_point(attacks::stationary_point_search(
                  surrogate, x, y, cfg.epsilon, ocfg.fsps_sp_max_steps, ocfg.fsps_sp_grad_tol,
                  ocfg.fsps_sp_lr));
            }
            oracles::OracleStep step = oracle->step(x_adv, x, y);
            if (!all_finite(step.g)) {
              throw TrainingError("oracle produced non-finite direction at epoch " +
                                  std::to_string(epoch) + " batch " + std::to_string(batches));
            }
            Tensor u = cfg.sign_cotangent ? sign(step.g) : l1_normalize_per_image(step.g);
            u *= static_cast<float>(-cfg.adv_lambda);
            cot_xadv += u;
          } else {
            auto [ce, grad_ce] = nn::loss_and_input_grad(surrogate, x_adv, y);
            (void)ce;
            grad_ce *= static_cast<float>(-cfg.adv_lambda);
            cot_xadv += grad_ce;
          }
        }

        double gan_val = 0.0;
        if (cfg.alpha > 0) {
          Tape td;
          Tensor zf = d.net.forward(x_adv, &td);
          Tensor dzf(zf.shape());
          for (int i = 0; i < bn; ++i) {
            const double sf = 1.0 / (1.0 + std::exp(-double(zf[i])));
            gan_val += -std::log(std::max(1e-12, sf));
            dzf[i] = static_cast<float>(-(1.0 - sf) / bn);
          }
          gan_val /= bn;
          Tensor dxadv = d.net.backward(dzf, td, nullptr);
          dxadv *= static_cast<float>(cfg.alpha);
          cot_xadv += dxadv;
        }

        // through the [0,1] clamp to delta, plus the hinge contribution
        Tensor cot_delta = cot_xadv;
        for (int64_t i = 0; i < cot_delta.numel(); ++i) cot_delta[i] *= mask[i];
        double hinge_val = 0.0;
        if (cfg.beta > 0) {
          const int64_t stride = delta.numel() / bn;
          for (int i = 0; i < bn; ++i) {
            double sq = 0.0;
            const float* p = delta.data() + int64_t(i) * stride;
            for (int64_t j = 0; j < stride; ++j) sq += double(p[j]) * p[j];
            const double norm = std::sqrt(sq);
            if (norm > hinge_c) {
              hinge_val += norm - hinge_c;
              const float coef = static_cast<float>(cfg.beta / (norm * bn));
              float* dst = cot_delta.data() + int64_t(i) * stride;
              for (int64_t j = 0; j < stride; ++j) dst[j] += coef * p[j];
            }
          }
          hinge_val /= bn;
        }
        Tensor cot_raw = cot_delta;
        cot_raw *= static_cast<float>(cfg.epsilon);
        std::vector<Tensor> grads;
        g.net.backward(cot_raw, tg, &grads);
        if (cfg.optimizer == GanOptimizer::adam) {
          opt_g.step(g.net.parameters(), grads, cfg.eta_g[static_cast<size_t>(phase)]);
        } else {
          nn::sgd_step(g.net.parameters(), grads, cfg.eta_g[static_cast<size_t>(phase)]);
        }
        ep_g += gan_val;
        ep_h += hinge_val;
      }
    }
    const double denom = std::max(1, batches);
    out.d_loss_curve.push_back(ep_d / denom);
    out.g_gan_loss_curve.push_back(ep_g / denom);
    out.hinge_curve.push_back(ep_h / denom);
  }
  out.generator = std::move(g);
  out.discriminator = std::move(d);
  return out;
}

}  // namespace detail

/// AdvGAN reference trainer: the generator objective is
/// adv_lambda * (-L(f(x+delta), y)) + alpha * L_GAN + beta * L_hinge,
/// with true surrogate-loss gradients flowing into the generator.
inline GanTrainResult train_advgan_baseline(const GeneratorHandle& g, const DiscriminatorHandle& d,
                                            const Classifier& surrogate, const ImageBatch& data,
                                            const GanTrainConfig& cfg) {
  return detail::train_gan(g, d, surrogate, data, cfg, detail::GanMode::baseline);
}

/// Gradient-edited trainer: the surrogate-loss gradient at x+delta is replaced
/// by the configured oracle's direction, injected as an L1-normalized upstream
/// cotangent (the map from delta to x+delta is the identity, so it propagates
/// straight into the generator). The oracle state is reset per batch, so every
/// query is a single-step direction for the current batch.
inline GanTrainResult train_ge_advgan(const GeneratorHandle& g, const DiscriminatorHandle& d,
                                      const Classifier& surrogate, const ImageBatch& data,
                                      const GanTrainConfig& cfg) {
  return detail::train_gan(g, d, surrogate, data, cfg, detail::GanMode::edited);
}

/// Human-readable tag: the frequency/stationary-point oracle instance is the
/// flagship configuration and carries the ++ name.
inline std::string method_tag(oracles::Method m) {
  if (m == oracles::Method::fsps) return "ge_advgan++(fsps)";
  return std::string("ge_advgan(") + oracles::method_name(m) + ")";
}

// ---------------------------------------------------------------------------
// Checkpoints (manifest + one tensor file per parameter, plus provenance).

inline void save_generator(const std::filesystem::path& dir, const GeneratorHandle& g,
                           const Json& provenance = Json::object()) {
  std::filesystem::create_directories(dir);
  Json manifest;
  manifest["format"] = "geadv-checkpoint";
  manifest["version"] = 1;
  manifest["kind"] = "generator";
  manifest["input_shape"] = g.input_shape;
  manifest["seed"] = g.seed;
  manifest["provenance"] = provenance;
  Json tensors = Json::array();
  auto params = g.net.parameters();
  for (size_t i = 0; i < params.size(); ++i) {
    const std::string file = "param_" + std::to_string(i) + ".getf";
    getf::write(dir / file, *params[i]);
    tensors.push_back(file);
  }
  manifest["tensors"] = tensors;
  write_json_file(dir / "manifest.json", manifest);
}

inline GeneratorHandle load_generator(const std::filesystem::path& dir) {
  Json manifest = read_json_file(dir / "manifest.json");
  if (manifest.value("format", "") != "geadv-checkpoint" ||
      manifest.value("kind", "") != "generator") {
    throw ParseError("not a generator checkpoint: " + dir.string());
  }
  GeneratorHandle g = build_generator(manifest.at("input_shape").get<std::vector<int>>(),
                                      manifest.value("seed", uint64_t(0)));
  const auto files = manifest.at("tensors").get<std::vector<std::string>>();
  auto params = g.net.parameters();
  if (files.size() != params.size()) throw ParseError("generator checkpoint tensor count mismatch");
  for (size_t i = 0; i < files.size(); ++i) {
    Tensor t = getf::read(dir / files[i]);
    if (t.shape() != params[i]->shape()) throw ParseError("generator tensor shape mismatch");
    *params[i] = std::move(t);
  }
  return g;
}

inline Json generator_provenance(const std::filesystem::path& dir) {
  return read_json_file(dir / "manifest.json").value("provenance", Json::object());
}

}  // namespace geadv::gan
