#pragma once

#include <Eigen/Core>
#include <cmath>
#include <vector>

#include "geadv/rng.hpp"
#include "geadv/tensor.hpp"

namespace geadv::freq {

/// Orthonormal type-II DCT basis: row k holds the k-th basis vector, so the
/// transform of a length-n signal v is C*v and the inverse is C^T*u. With this
/// normalization the matrix is orthogonal and energy is preserved exactly.
template <class T>
Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> dct_basis(int n) {
  Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> c(n, n);
  const double pi = 3.14159265358979323846;
  for (int k = 0; k < n; ++k) {
    const double scale = (k == 0) ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    for (int i = 0; i < n; ++i) {
      c(k, i) = static_cast<T>(scale * std::cos(pi * (2 * i + 1) * k / (2.0 * n)));
    }
  }
  return c;
}

/// Per-channel separable 2-D DCT-II of an (N,C,H,W) tensor, rows then columns.
template <class T>
TensorT<T> dct2(const TensorT<T>& x) {
  if (x.ndim() != 4) throw ContractError("dct2 expects (N,C,H,W)");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const auto ch_mat = dct_basis<T>(h);
  const auto cw_mat = dct_basis<T>(w);
  TensorT<T> out(x.shape());
  for (int i = 0; i < n; ++i) {
    for (int ch = 0; ch < c; ++ch) {
      const int64_t off = (int64_t(i) * c + ch) * h * w;
      Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> img(
          x.data() + off, h, w);
      Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> spec(
          out.data() + off, h, w);
      spec.noalias() = ch_mat * img * cw_mat.transpose();
    }
  }
  return out;
}

/// Exact inverse of dct2 up to float rounding.
template <class T>
TensorT<T> idct2(const TensorT<T>& spec) {
  if (spec.ndim() != 4) throw ContractError("idct2 expects (N,C,H,W)");
  const int n = spec.dim(0), c = spec.dim(1), h = spec.dim(2), w = spec.dim(3);
  const auto ch_mat = dct_basis<T>(h);
  const auto cw_mat = dct_basis<T>(w);
  TensorT<T> out(spec.shape());
  for (int i = 0; i < n; ++i) {
    for (int ch = 0; ch < c; ++ch) {
      const int64_t off = (int64_t(i) * c + ch) * h * w;
      Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> sm(
          spec.data() + off, h, w);
      Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> img(
          out.data() + off, h, w);
      img.noalias() = ch_mat.transpose() * sm * cw_mat;
    }
  }
  return out;
}

struct FreqExploreConfig {
  int num_variants = 10;
  double sigma = 0.5;              // std of the multiplicative spectrum noise N(1, sigma)
  double pixel_noise_scale = 16.0 / 255.0;  // std scale of the additive pixel noise
  uint64_t seed = 0;

  void validate() const {
    if (num_variants < 1) throw ConfigError("num_variants must be >= 1");
    if (sigma < 0) throw ConfigError("sigma must be >= 0");
    if (pixel_noise_scale < 0) throw ConfigError("pixel_noise_scale must be >= 0");
  }
};

/// Frequency-domain sample variants of x:
///   variant_i = clip01( idct2( dct2(x + n_i * pixel_noise_scale) .* m_i ) )
/// with n_i standard normal per pixel and m_i ~ N(1, sigma) per coefficient.
/// Deterministic for a given (cfg.seed, variant index).
template <class T>
std::vector<TensorT<T>> spectrum_variants(const TensorT<T>& x, const FreqExploreConfig& cfg) {
  cfg.validate();
  std::vector<TensorT<T>> variants;
  variants.reserve(static_cast<size_t>(cfg.num_variants));
  Rng base(cfg.seed);
  for (int v = 0; v < cfg.num_variants; ++v) {
    Rng rng = base.child("variant", static_cast<uint64_t>(v));
    TensorT<T> noisy = x;
    if (cfg.pixel_noise_scale > 0) {
      for (int64_t i = 0; i < noisy.numel(); ++i) {
        noisy[i] += static_cast<T>(rng.normal(0.0, 1.0) * cfg.pixel_noise_scale);
      }
    }
    TensorT<T> spec = dct2(noisy);
    if (cfg.sigma > 0) {
      for (int64_t i = 0; i < spec.numel(); ++i) {
        spec[i] *= static_cast<T>(rng.normal(1.0, cfg.sigma));
      }
    }
    TensorT<T> img = idct2(spec);
    clamp01_inplace(img);
    variants.push_back(std::move(img));
  }
  return variants;
}

}  // namespace geadv::freq
