#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "geadv/attribution.hpp"
#include "geadv/freq.hpp"
#include "geadv/nn/model.hpp"
#include "geadv/parallel.hpp"
#include "geadv/rng.hpp"

namespace geadv::oracles {

using nn::Classifier;
using nn::loss_and_input_grad;

enum class Method { bim, pgd, mim, gra, dim, tim, sinim, fsps, sia, naa, danaa, mig };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::bim: return "bim";
    case Method::pgd: return "pgd";
    case Method::mim: return "mim";
    case Method::gra: return "gra";
    case Method::dim: return "dim";
    case Method::tim: return "tim";
    case Method::sinim: return "sinim";
    case Method::fsps: return "fsps";
    case Method::sia: return "sia";
    case Method::naa: return "naa";
    case Method::danaa: return "danaa";
    case Method::mig: return "mig";
  }
  return "?";
}

inline Method method_from_name(const std::string& s) {
  for (Method m : {Method::bim, Method::pgd, Method::mim, Method::gra, Method::dim, Method::tim,
                   Method::sinim, Method::fsps, Method::sia, Method::naa, Method::danaa,
                   Method::mig}) {
    if (s == method_name(m)) return m;
  }
  throw ConfigError("unknown oracle method '" + s + "'");
}

enum class SiaTransform { identity, hflip, vflip, rot90, scale, noise };

struct OracleConfig {
  Method method = Method::bim;
  double mu = 0.0;  // momentum factor; see oracle_defaults for per-method values
  // gra
  double gra_temperature = 1.0;
  int gra_neighbors = 20;
  double gra_radius = 16.0 / 255.0;
  // dim
  double dim_prob = 0.5;
  double dim_resize_low = 0.85;
  double dim_resize_high = 1.0;
  int dim_copies = 10;
  // tim
  int tim_max_shift = 3;
  int tim_copies = 10;
  bool tim_exact = false;  // enumerate all shifts instead of sampling
  // sinim
  double sinim_sigma = 0.05;
  int sinim_copies = 10;
  // fsps
  freq::FreqExploreConfig fsps_freq;
  int fsps_warmup = 5;
  int fsps_sp_max_steps = 50;
  double fsps_sp_grad_tol = 1e-4;
  double fsps_sp_lr = 1.6 / 255.0;
  // sia
  int sia_blocks = 3;
  int sia_copies = 10;
  std::vector<SiaTransform> sia_pool = {SiaTransform::identity, SiaTransform::hflip,
                                        SiaTransform::vflip,    SiaTransform::rot90,
                                        SiaTransform::scale,    SiaTransform::noise};
  // naa / danaa / mig
  attribution::AttributionConfig attribution;
  int mig_steps = 20;

  uint64_t seed = 0;

  void validate() const {
    if (mu < 0 || mu > 1) throw ConfigError("mu must lie in [0,1]");
    switch (method) {
      case Method::gra:
        if (gra_neighbors < 1) throw ConfigError("gra_neighbors must be >= 1");
        if (gra_temperature <= 0) throw ConfigError("gra_temperature must be positive");
        if (gra_radius <= 0) throw ConfigError("gra_radius must be positive");
        break;
      case Method::dim:
        if (dim_prob < 0 || dim_prob > 1) throw ConfigError("dim_prob must lie in [0,1]");
        if (!(dim_resize_low > 0 && dim_resize_low <= dim_resize_high && dim_resize_high <= 1)) {
          throw ConfigError("dim resize range must satisfy 0 < low <= high <= 1");
        }
        if (dim_copies < 1) throw ConfigError("dim_copies must be >= 1");
        break;
      case Method::tim:
        if (tim_max_shift < 0) throw ConfigError("tim_max_shift must be >= 0");
        if (tim_copies < 1) throw ConfigError("tim_copies must be >= 1");
        break;
      case Method::sinim:
        if (sinim_sigma < 0) throw ConfigError("sinim_sigma must be >= 0");
        if (sinim_copies < 1) throw ConfigError("sinim_copies must be >= 1");
        break;
      case Method::fsps:
        fsps_freq.validate();
        if (fsps_warmup < 0) throw ConfigError("fsps_warmup must be >= 0");
        if (fsps_sp_max_steps < 0) throw ConfigError("fsps_sp_max_steps must be >= 0");
        break;
      case Method::sia:
        if (sia_blocks < 1) throw ConfigError("sia_blocks must be >= 1");
        if (sia_copies < 1) throw ConfigError("sia_copies must be >= 1");
        if (sia_pool.empty()) throw ConfigError("sia_pool must not be empty");
        break;
      case Method::naa:
      case Method::danaa:
        attribution.validate();
        if (attribution.layer_id.empty()) {
          throw ConfigError(std::string(method_name(method)) + " requires attribution.layer_id");
        }
        break;
      case Method::mig:
        if (mig_steps < 1) throw ConfigError("mig_steps must be >= 1");
        break;
      default:
        break;
    }
  }
};

/// Per-method defaults: momentum-family methods accumulate with mu = 1,
/// the input-transformation family runs plain expectation form.
inline OracleConfig oracle_defaults(Method m) {
  OracleConfig cfg;
  cfg.method = m;
  switch (m) {
    case Method::mim:
    case Method::gra:
    case Method::naa:
    case Method::danaa:
    case Method::mig:
      cfg.mu = 1.0;
      break;
    default:
      cfg.mu = 0.0;
      break;
  }
  if (m == Method::danaa) cfg.attribution.path_kind = attribution::PathKind::nonlinear;
  return cfg;
}

namespace detail {

/// Per-image softmax weights over cosine similarities between the center
/// gradient and each probe gradient. Rows sum to 1.
inline std::vector<std::vector<double>> gra_weights(const Tensor& g_center,
                                                    const std::vector<Tensor>& grads,
                                                    double temperature) {
  const int batch = g_center.dim(0);
  const int n = static_cast<int>(grads.size());
  const int64_t stride = g_center.numel() / batch;
  std::vector<std::vector<double>> weights(static_cast<size_t>(batch),
                                           std::vector<double>(static_cast<size_t>(n)));
  for (int img = 0; img < batch; ++img) {
    const float* gc = g_center.data() + int64_t(img) * stride;
    double norm_c = 0.0;
    for (int64_t j = 0; j < stride; ++j) norm_c += double(gc[j]) * gc[j];
    norm_c = std::sqrt(norm_c);
    std::vector<double> logits(static_cast<size_t>(n));
    double mx = -1e300;
    for (int i = 0; i < n; ++i) {
      const float* gi = grads[static_cast<size_t>(i)].data() + int64_t(img) * stride;
      double dot = 0.0, norm_i = 0.0;
      for (int64_t j = 0; j < stride; ++j) {
        dot += double(gc[j]) * gi[j];
        norm_i += double(gi[j]) * gi[j];
      }
      norm_i = std::sqrt(norm_i);
      logits[static_cast<size_t>(i)] = (dot / (norm_c * norm_i + 1e-12)) / temperature;
      mx = std::max(mx, logits[static_cast<size_t>(i)]);
    }
    double sum = 0.0;
    for (double& l : logits) {
      l = std::exp(l - mx);
      sum += l;
    }
    for (int i = 0; i < n; ++i) {
      weights[static_cast<size_t>(img)][static_cast<size_t>(i)] = logits[static_cast<size_t>(i)] / sum;
    }
  }
  return weights;
}

/// Integer translation with zero fill.
inline Tensor translate(const Tensor& x, int dy, int dx) {
  if (dy == 0 && dx == 0) return x;
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor out(x.shape());
  for (int img = 0; img < n; ++img)
    for (int ch = 0; ch < c; ++ch)
      for (int i = 0; i < h; ++i) {
        const int si = i - dy;
        if (si < 0 || si >= h) continue;
        for (int j = 0; j < w; ++j) {
          const int sj = j - dx;
          if (sj >= 0 && sj < w) out.at(img, ch, i, j) = x.at(img, ch, si, sj);
        }
      }
  return out;
}

struct ResizePadDraw {
  bool apply = false;
  int h2 = 0, w2 = 0, oy = 0, ox = 0;
};

inline void bilinear_coords(int out_idx, int out_size, int in_size, int& lo, int& hi,
                            double& frac) {
  double src = (out_idx + 0.5) * double(in_size) / double(out_size) - 0.5;
  src = std::max(0.0, std::min(double(in_size - 1), src));
  lo = static_cast<int>(std::floor(src));
  hi = std::min(in_size - 1, lo + 1);
  frac = src - lo;
}

/// x_t[img] = zero-pad(bilinear-resize(x[img], h2 x w2)) at offset (oy, ox).
inline void apply_resize_pad(const Tensor& x, Tensor& xt, int img, const ResizePadDraw& d) {
  const int c = x.dim(1), h = x.dim(2), w = x.dim(3);
  for (int ch = 0; ch < c; ++ch) {
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) xt.at(img, ch, i, j) = 0.0f;
    for (int oi = 0; oi < d.h2; ++oi) {
      for (int oj = 0; oj < d.w2; ++oj) {
        int i0, i1, j0, j1;
        double wi, wj;
        bilinear_coords(oi, d.h2, h, i0, i1, wi);
        bilinear_coords(oj, d.w2, w, j0, j1, wj);
        const double v = (1 - wi) * ((1 - wj) * x.at(img, ch, i0, j0) + wj * x.at(img, ch, i0, j1)) +
                         wi * ((1 - wj) * x.at(img, ch, i1, j0) + wj * x.at(img, ch, i1, j1));
        xt.at(img, ch, d.oy + oi, d.ox + oj) = static_cast<float>(v);
      }
    }
  }
}

/// Exact adjoint of apply_resize_pad: crop the padded region, then scatter
/// through the transposed bilinear weights.
inline void adjoint_resize_pad(const Tensor& gt, Tensor& out, int img, const ResizePadDraw& d) {
  const int c = gt.dim(1), h = gt.dim(2), w = gt.dim(3);
  for (int ch = 0; ch < c; ++ch) {
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) out.at(img, ch, i, j) = 0.0f;
    for (int oi = 0; oi < d.h2; ++oi) {
      for (int oj = 0; oj < d.w2; ++oj) {
        const float g = gt.at(img, ch, d.oy + oi, d.ox + oj);
        if (g == 0.0f) continue;
        int i0, i1, j0, j1;
        double wi, wj;
        bilinear_coords(oi, d.h2, h, i0, i1, wi);
        bilinear_coords(oj, d.w2, w, j0, j1, wj);
        out.at(img, ch, i0, j0) += static_cast<float>((1 - wi) * (1 - wj)) * g;
        out.at(img, ch, i0, j1) += static_cast<float>((1 - wi) * wj) * g;
        out.at(img, ch, i1, j0) += static_cast<float>(wi * (1 - wj)) * g;
        out.at(img, ch, i1, j1) += static_cast<float>(wi * wj) * g;
      }
    }
  }
}

/// One random transform per grid block, drawn from the pool. rot90 drops out
/// of the pool for non-square blocks.
inline void sia_transform_image(Tensor& xt, int img, int blocks,
                                const std::vector<SiaTransform>& pool_in, Rng& rng) {
  const int c = xt.dim(1), h = xt.dim(2), w = xt.dim(3);
  for (int bi = 0; bi < blocks; ++bi) {
    for (int bj = 0; bj < blocks; ++bj) {
      const int r0 = bi * h / blocks, r1 = (bi + 1) * h / blocks;
      const int c0 = bj * w / blocks, c1 = (bj + 1) * w / blocks;
      const int bh = r1 - r0, bw = c1 - c0;
      if (bh <= 0 || bw <= 0) continue;
      std::vector<SiaTransform> pool = pool_in;
      if (bh != bw) {
        pool.erase(std::remove(pool.begin(), pool.end(), SiaTransform::rot90), pool.end());
        if (pool.empty()) pool.push_back(SiaTransform::identity);
      }
      const SiaTransform t =
          pool[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(pool.size()) - 1))];
      switch (t) {
        case SiaTransform::identity: break;
        case SiaTransform::hflip:
          for (int ch = 0; ch < c; ++ch)
            for (int i = r0; i < r1; ++i)
              for (int j = 0; j < bw / 2; ++j) {
                std::swap(xt.at(img, ch, i, c0 + j), xt.at(img, ch, i, c1 - 1 - j));
              }
          break;
        case SiaTransform::vflip:
          for (int ch = 0; ch < c; ++ch)
            for (int i = 0; i < bh / 2; ++i)
              for (int j = c0; j < c1; ++j) {
                std::swap(xt.at(img, ch, r0 + i, j), xt.at(img, ch, r1 - 1 - i, j));
              }
          break;
        case SiaTransform::rot90: {
          for (int ch = 0; ch < c; ++ch) {
            std::vector<float> block(static_cast<size_t>(bh) * bw);
            for (int i = 0; i < bh; ++i)
              for (int j = 0; j < bw; ++j) {
                block[static_cast<size_t>(i * bw + j)] = xt.at(img, ch, r0 + i, c0 + j);
              }
            for (int i = 0; i < bh; ++i)
              for (int j = 0; j < bw; ++j) {
                xt.at(img, ch, r0 + i, c0 + j) = block[static_cast<size_t>((bh - 1 - j) * bw + i)];
              }
          }
          break;
        }
        case SiaTransform::scale: {
          const float f = static_cast<float>(rng.uniform(0.7, 1.3));
          for (int ch = 0; ch < c; ++ch)
            for (int i = r0; i < r1; ++i)
              for (int j = c0; j < c1; ++j) xt.at(img, ch, i, j) *= f;
          break;
        }
        case SiaTransform::noise:
          for (int ch = 0; ch < c; ++ch)
            for (int i = r0; i < r1; ++i)
              for (int j = c0; j < c1; ++j) {
                xt.at(img, ch, i, j) += static_cast<float>(rng.uniform(-0.1, 0.1));
              }
          break;
      }
    }
  }
}

}  // namespace detail

struct OracleState {
  Tensor g;                  // accumulated direction g^(k); empty means zero
  int k = 0;                 // completed steps
  std::optional<Tensor> sp;  // frozen stationary point (fsps only)
};

struct OracleStep {
  Tensor g;  // loss-ascent direction g^(k+1), shaped like the input
  int k;     // step index this direction belongs to (post-increment count)
};

/// Stateful per-attack direction generator. One instance drives one attack
/// run; distinct instances are independent and may run in parallel.
class GradientOracle {
 public:
  GradientOracle(OracleConfig cfg, const Classifier* surrogate)
      : cfg_(std::move(cfg)), surrogate_(surrogate) {
    if (!surrogate_) throw ConfigError("oracle requires a surrogate model");
    cfg_.validate();
    if (cfg_.method == Method::naa || cfg_.method == Method::danaa) {
      surrogate_->net.layer_index(cfg_.attribution.layer_id);  // throws if missing
    }
  }

  const OracleConfig& config() const { return cfg_; }
  const OracleState& state() const { return state_; }
  const Classifier& surrogate() const { return *surrogate_; }

  void reset(uint64_t seed) {
    state_ = OracleState{};
    seed_ = seed;
  }

  /// True when the driver must supply the frozen base point before step k.
  bool needs_stationary_point(int upcoming_k) const {
    return cfg_.method == Method::fsps && upcoming_k >= cfg_.fsps_warmup && !state_.sp;
  }

  void set_stationary_point(Tensor sp) { state_.sp = std::move(sp); }

  OracleStep step(const Tensor& x_k, const Tensor& x0, const std::vector<int>& y) {
    if (!x_k.same_shape(x0)) throw ContractError("oracle step: x_k and x0 shapes differ");
    Tensor g;
    switch (cfg_.method) {
      case Method::bim:
      case Method::pgd: g = raw_grad(x_k, y); break;
      case Method::mim: g = accumulate(raw_grad(x_k, y), /*normalize=*/true); break;
      case Method::gra: g = step_gra(x_k, y); break;
      case Method::dim: g = accumulate(mean_dim(x_k, y), cfg_.mu > 0); break;
      case Method::tim: g = accumulate(mean_tim(x_k, y), cfg_.mu > 0); break;
      case Method::sinim: g = accumulate(mean_sinim(x_k, y), cfg_.mu > 0); break;
      case Method::fsps: g = mean_fsps(x_k, y); break;
      case Method::sia: g = accumulate(mean_sia(x_k, y), cfg_.mu > 0); break;
      case Method::naa:
      case Method::danaa: g = step_attribution(x_k, y); break;
      case Method::mig: g = step_mig(x_k, y); break;
    }
    state_.k += 1;
    if (cfg_.method != Method::bim && cfg_.method != Method::pgd && cfg_.method != Method::fsps) {
      state_.g = g;
    }
    return OracleStep{std::move(g), state_.k};
  }

 private:
  Tensor raw_grad(const Tensor& x, const std::vector<int>& y) const {
    return loss_and_input_grad(*surrogate_, x, y).second;
  }

  /// g_new = mu * g_prev + inc, with the increment L1-normalized per image for
  /// the momentum-family methods and whenever momentum is active. With mu = 0
  /// and normalize = false this passes the raw expectation through.
  Tensor accumulate(Tensor inc, bool normalize) {
    if (normalize) inc = l1_normalize_per_image(inc);
    if (cfg_.mu > 0 && !state_.g.empty()) {
      Tensor g = state_.g;
      g *= static_cast<float>(cfg_.mu);
      g += inc;
      return g;
    }
    return inc;
  }

  Rng step_rng(const char* tag) const {
    return Rng(mix_seed(seed_, hash_tag(tag), static_cast<uint64_t>(state_.k)));
  }

  /// Mean over precomputed probe inputs of the per-probe input gradient,
  /// optionally remapped, computed in a fixed reduction order.
  Tensor mean_grad_over(const std::vector<Tensor>& probes, const std::vector<int>& y,
                        const std::function<Tensor(int, Tensor)>& remap = nullptr) const {
    std::vector<Tensor> grads(probes.size());
    parallel_for(0, static_cast<int64_t>(probes.size()), [&](int64_t i) {
      Tensor gi = loss_and_input_grad(*surrogate_, probes[static_cast<size_t>(i)], y).second;
      grads[static_cast<size_t>(i)] =
          remap ? remap(static_cast<int>(i), std::move(gi)) : std::move(gi);
    });
    Tensor acc = Tensor::zeros_like(grads[0]);
    for (const auto& gi : grads) acc += gi;
    acc *= 1.0f / static_cast<float>(grads.size());
    return acc;
  }

  // -- gra -------------------------------------------------------------

  Tensor step_gra(const Tensor& x, const std::vector<int>& y) {
    const int n = cfg_.gra_neighbors;
    Rng rng = step_rng("gra");
    std::vector<Tensor> probes(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      Tensor xi = x;
      for (int64_t j = 0; j < xi.numel(); ++j) {
        xi[j] += static_cast<float>(rng.uniform(-cfg_.gra_radius, cfg_.gra_radius));
      }
      probes[static_cast<size_t>(i)] = std::move(xi);
    }
    std::vector<Tensor> grads(probes.size());
    parallel_for(0, static_cast<int64_t>(probes.size()), [&](int64_t i) {
      grads[static_cast<size_t>(i)] =
          loss_and_input_grad(*surrogate_, probes[static_cast<size_t>(i)], y).second;
    });
    const Tensor g_center = raw_grad(x, y);
    const auto weights = detail::gra_weights(g_center, grads, cfg_.gra_temperature);
    const int batch = x.dim(0);
    const int64_t stride = x.numel() / batch;
    Tensor relevance = Tensor::zeros_like(x);
    for (int i = 0; i < n; ++i) {
      const Tensor& gi = grads[static_cast<size_t>(i)];
      for (int img = 0; img < batch; ++img) {
        const float w = static_cast<float>(weights[static_cast<size_t>(img)][static_cast<size_t>(i)]);
        float* dst = relevance.data() + int64_t(img) * stride;
        const float* src = gi.data() + int64_t(img) * stride;
        for (int64_t j = 0; j < stride; ++j) dst[j] += w * src[j];
      }
    }
    return accumulate(std::move(relevance), /*normalize=*/true);
  }

  // -- dim -------------------------------------------------------------

  Tensor mean_dim(const Tensor& x, const std::vector<int>& y) {
    const int batch = x.dim(0), h = x.dim(2), w = x.dim(3);
    Rng rng = step_rng("dim");
    std::vector<std::vector<detail::ResizePadDraw>> draws(static_cast<size_t>(cfg_.dim_copies));
    std::vector<Tensor> probes(static_cast<size_t>(cfg_.dim_copies));
    for (int copy = 0; copy < cfg_.dim_copies; ++copy) {
      auto& cd = draws[static_cast<size_t>(copy)];
      cd.resize(static_cast<size_t>(batch));
      Tensor xt = x;
      for (int img = 0; img < batch; ++img) {
        detail::ResizePadDraw d;
        d.apply = rng.uniform(0.0, 1.0) < cfg_.dim_prob;
        if (d.apply) {
          const double frac = rng.uniform(cfg_.dim_resize_low, cfg_.dim_resize_high);
          d.h2 = std::max(1, static_cast<int>(std::lround(h * frac)));
          d.w2 = std::max(1, static_cast<int>(std::lround(w * frac)));
          d.oy = d.h2 < h ? rng.uniform_int(0, h - d.h2) : 0;
          d.ox = d.w2 < w ? rng.uniform_int(0, w - d.w2) : 0;
          if (d.h2 == h && d.w2 == w) {
            d.apply = false;  // full-size resize is the identity
          } else {
            detail::apply_resize_pad(x, xt, img, d);
          }
        }
        cd[static_cast<size_t>(img)] = d;
      }
      probes[static_cast<size_t>(copy)] = std::move(xt);
    }
    return mean_grad_over(probes, y, [&](int copy, Tensor gt) {
      Tensor mapped = gt;
      for (int img = 0; img < batch; ++img) {
        const detail::ResizePadDraw& d = draws[static_cast<size_t>(copy)][static_cast<size_t>(img)];
        if (d.apply) detail::adjoint_resize_pad(gt, mapped, img, d);
      }
      return mapped;
    });
  }

  // -- tim -------------------------------------------------------------

  Tensor mean_tim(const Tensor& x, const std::vector<int>& y) {
    const int m = cfg_.tim_max_shift;
    std::vector<std::pair<int, int>> shifts;
    if (cfg_.tim_exact) {
      for (int dy = -m; dy <= m; ++dy)
        for (int dx = -m; dx <= m; ++dx) shifts.emplace_back(dy, dx);
    } else {
      Rng rng = step_rng("tim");
      for (int copy = 0; copy < cfg_.tim_copies; ++copy) {
        shifts.emplace_back(rng.uniform_int(-m, m), rng.uniform_int(-m, m));
      }
    }
    std::vector<Tensor> probes(shifts.size());
    for (size_t i = 0; i < shifts.size(); ++i) {
      probes[i] = detail::translate(x, shifts[i].first, shifts[i].second);
    }
    return mean_grad_over(probes, y, [&](int i, Tensor gt) {
      return detail::translate(gt, -shifts[static_cast<size_t>(i)].first,
                               -shifts[static_cast<size_t>(i)].second);
    });
  }

  // -- sinim -----------------------------------------------------------

  Tensor mean_sinim(const Tensor& x, const std::vector<int>& y) {
    Rng rng = step_rng("sinim");
    std::vector<Tensor> probes(static_cast<size_t>(cfg_.sinim_copies));
    for (int copy = 0; copy < cfg_.sinim_copies; ++copy) {
      Tensor xt = x;
      if (cfg_.sinim_sigma > 0) {
        for (int64_t j = 0; j < xt.numel(); ++j) {
          xt[j] += static_cast<float>(rng.normal(0.0, cfg_.sinim_sigma));
        }
      }
      probes[static_cast<size_t>(copy)] = std::move(xt);
    }
    return mean_grad_over(probes, y);
  }

  // -- fsps ------------------------------------------------------------

  Tensor mean_fsps(const Tensor& x, const std::vector<int>& y) {
    const Tensor* base = &x;
    if (state_.k >= cfg_.fsps_warmup) {
      if (!state_.sp) {
        throw ContractError("fsps: stationary point not set; driver must precompute it");
      }
      base = &*state_.sp;
    }
    freq::FreqExploreConfig fc = cfg_.fsps_freq;
    fc.seed = mix_seed(seed_, hash_tag("fsps"), static_cast<uint64_t>(state_.k));
    const auto variants = freq::spectrum_variants(*base, fc);
    return mean_grad_over(variants, y);
  }

  // -- sia -------------------------------------------------------------

  Tensor mean_sia(const Tensor& x, const std::vector<int>& y) {
    const int batch = x.dim(0);
    const int s = cfg_.sia_blocks;
    Rng rng = step_rng("sia");
    std::vector<Tensor> probes(static_cast<size_t>(cfg_.sia_copies));
    for (int copy = 0; copy < cfg_.sia_copies; ++copy) {
      Tensor xt = x;
      for (int img = 0; img < batch; ++img) {
        detail::sia_transform_image(xt, img, s, cfg_.sia_pool, rng);
      }
      probes[static_cast<size_t>(copy)] = std::move(xt);
    }
    // per the expectation form, gradients are taken at the transformed inputs
    // without pulling them back through the transforms
    return mean_grad_over(probes, y);
  }

  // -- attribution family ------------------------------------------------

  Tensor step_attribution(const Tensor& x, const std::vector<int>& y) {
    attribution::AttributionConfig acfg = cfg_.attribution;
    acfg.path_kind = cfg_.method == Method::danaa ? attribution::PathKind::nonlinear
                                                  : attribution::PathKind::straight;
    auto res = attribution::attribute(*surrogate_, x, y, acfg);
    // attack the supporting attributions: descend W, which is loss ascent
    Tensor inc = res.input_grad;
    inc *= -1.0f;
    return accumulate(std::move(inc), /*normalize=*/true);
  }

  Tensor step_mig(const Tensor& x, const std::vector<int>& y) {
    Tensor ig = attribution::integrated_gradients(*surrogate_, x, y, cfg_.mig_steps);
    // the integrated gradient supports the target class; the ascent direction
    // for the classification loss is its negation
    ig *= -1.0f;
    return accumulate(std::move(ig), /*normalize=*/true);
  }

  OracleConfig cfg_;
  const Classifier* surrogate_;
  OracleState state_;
  uint64_t seed_ = 0;
};

inline GradientOracle make_oracle(const OracleConfig& cfg, const Classifier& surrogate) {
  GradientOracle oracle(cfg, &surrogate);
  oracle.reset(cfg.seed);
  return oracle;
}

}  // namespace geadv::oracles
