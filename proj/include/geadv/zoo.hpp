#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "geadv/io.hpp"
#include "geadv/nn/model.hpp"
#include "geadv/nn/train.hpp"
#include "geadv/rng.hpp"

namespace geadv::zoo {

using nn::Classifier;
using nn::ClassifierT;
using nn::ImageBatch;
using nn::ImageBatchT;

inline const std::vector<std::string>& arch_ids() {
  static const std::vector<std::string> ids = {"small_cnn_a", "small_cnn_b", "small_mlp",
                                               "tiny_attention"};
  return ids;
}

namespace detail {

template <class T>
void init_kaiming(TensorT<T>& w, int fan_in, Rng& rng, double gain = 2.0) {
  rng.fill_normal(w, 0.0, std::sqrt(gain / double(fan_in)));
}

}  // namespace detail

/// Builds an initialized classifier. Two CNN topologies, an MLP, and a small
/// attention model give the evaluation harness architecturally distinct
/// transfer pairs. Initialization is deterministic by seed.
template <class T>
ClassifierT<T> build_model_t(const std::string& arch_id, int num_classes,
                             const std::vector<int>& input_shape, uint64_t seed) {
  using namespace nn;
  if (input_shape.size() != 3) throw ConfigError("input_shape must be (C,H,W)");
  const int c = input_shape[0], h = input_shape[1], w = input_shape[2];
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
  ClassifierT<T> m;
  m.arch_id = arch_id;
  m.num_classes = num_classes;
  m.input_shape = input_shape;
  m.seed = seed;
  Rng rng = Rng(seed).child("init");

  auto conv = [&](std::string name, int ic, int oc, int k, int pad) {
    auto l = std::make_unique<Conv2d<T>>(std::move(name), ic, oc, k, 1, pad);
    detail::init_kaiming(l->weight(), ic * k * k, rng);
    return l;
  };
  auto dense = [&](std::string name, int in, int out, double gain = 2.0) {
    auto l = std::make_unique<Linear<T>>(std::move(name), in, out);
    detail::init_kaiming(l->weight(), in, rng, gain);
    return l;
  };

  if (arch_id == "small_cnn_a") {
    if (h % 8 || w % 8) throw ConfigError("small_cnn_a needs H,W divisible by 8");
    m.net.add(conv("conv1", c, 8, 3, 1))
        .add(std::make_unique<ReLU<T>>("relu1"))
        .add(std::make_unique<MaxPool2x2<T>>("pool1"))
        .add(conv("conv2", 8, 16, 3, 1))
        .add(std::make_unique<ReLU<T>>("relu2"))
        .add(std::make_unique<MaxPool2x2<T>>("pool2"))
        .add(conv("conv3", 16, 32, 3, 1))
        .add(std::make_unique<ReLU<T>>("relu3"))
        .add(std::make_unique<MaxPool2x2<T>>("pool3"))
        .add(std::make_unique<Flatten<T>>("flatten"))
        .add(dense("fc1", 32 * (h / 8) * (w / 8), 64))
        .add(std::make_unique<ReLU<T>>("relu4"))
        .add(dense("logits", 64, num_classes, 1.0));
  } else if (arch_id == "small_cnn_b") {
    if (h % 4 || w % 4) throw ConfigError("small_cnn_b needs H,W divisible by 4");
    m.net.add(conv("conv1", c, 12, 5, 2))
        .add(std::make_unique<ReLU<T>>("relu1"))
        .add(std::make_unique<MaxPool2x2<T>>("pool1"))
        .add(conv("conv2", 12, 24, 3, 1))
        .add(std::make_unique<ReLU<T>>("relu2"))
        .add(std::make_unique<MaxPool2x2<T>>("pool2"))
        .add(std::make_unique<Flatten<T>>("flatten"))
        .add(dense("fc1", 24 * (h / 4) * (w / 4), 96))
        .add(std::make_unique<ReLU<T>>("relu3"))
        .add(dense("logits", 96, num_classes, 1.0));
  } else if (arch_id == "small_mlp") {
    m.net.add(std::make_unique<Flatten<T>>("flatten"))
        .add(dense("fc1", c * h * w, 128))
        .add(std::make_unique<ReLU<T>>("relu1"))
        .add(dense("fc2", 128, 64))
        .add(std::make_unique<ReLU<T>>("relu2"))
        .add(dense("logits", 64, num_classes, 1.0));
  } else if (arch_id == "tiny_attention") {
    const int patch = 8;
    if (h % patch || w % patch) throw ConfigError("tiny_attention needs H,W divisible by 8");
    const int dim = 32;
    auto attn = std::make_unique<SelfAttention<T>>("attn", dim);
    for (auto* p : attn->params()) {
      if (p->ndim() == 2) detail::init_kaiming(*p, dim, rng, 1.0);
    }
    m.net.add(std::make_unique<Patchify<T>>("patchify", patch))
        .add(dense("embed", c * patch * patch, dim, 1.0))
        .add(std::move(attn))
        .add(std::make_unique<ReLU<T>>("relu1"))
        .add(std::make_unique<MeanPoolTokens<T>>("pool"))
        .add(dense("logits", dim, num_classes, 1.0));
  } else {
    throw ConfigError("unknown arch_id '" + arch_id + "'");
  }
  return m;
}

inline Classifier build_model(const std::string& arch_id, int num_classes,
                              const std::vector<int>& input_shape, uint64_t seed) {
  return build_model_t<float>(arch_id, num_classes, input_shape, seed);
}

/// First affine layer of each architecture; attribution paths through this
/// layer stay affine in the input, which keeps path integrals well behaved.
inline std::string default_attribution_layer(const std::string& arch_id) {
  if (arch_id == "small_cnn_a" || arch_id == "small_cnn_b") return "conv1";
  if (arch_id == "small_mlp") return "fc1";
  if (arch_id == "tiny_attention") return "embed";
  throw ConfigError("unknown arch_id '" + arch_id + "'");
}

// ---------------------------------------------------------------------------
// Synthetic dataset: procedural colored shapes with class-keyed texture.

struct SyntheticDatasetConfig {
  int num_classes = 10;
  int samples_per_class = 200;
  std::vector<int> image_size = {3, 32, 32};  // (C,H,W)
  uint64_t seed = 0;

  void validate() const {
    if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
    if (samples_per_class <= 0) throw ConfigError("samples_per_class must be positive");
    if (image_size.size() != 3 || image_size[0] != 3 || image_size[1] < 8 || image_size[2] < 8) {
      throw ConfigError("image_size must be (3,H,W) with H,W >= 8");
    }
  }
};

namespace detail {

inline std::array<double, 3> hsv_to_rgb(double hue, double sat, double val) {
  const double h6 = hue * 6.0;
  const int i = static_cast<int>(h6) % 6;
  const double f = h6 - std::floor(h6);
  const double p = val * (1 - sat), q = val * (1 - sat * f), t = val * (1 - sat * (1 - f));
  switch (i) {
    case 0: return {val, t, p};
    case 1: return {q, val, p};
    case 2: return {p, val, t};
    case 3: return {p, q, val};
    case 4: return {t, p, val};
    default: return {val, p, q};
  }
}

inline double fract(double x) { return x - std::floor(x); }

/// Renders one sample. Keyed by (seed, class, instance) so the dataset is
/// bit-identical for a given config regardless of generation order, and the
/// train/test split is disjoint by instance index.
template <class T>
void render_sample(TensorT<T>& data, int slot, int cls, int instance,
                   const SyntheticDatasetConfig& cfg) {
  const int h = cfg.image_size[1], w = cfg.image_size[2];
  Rng rng(mix_seed(cfg.seed, hash_tag("synthetic"), static_cast<uint64_t>(cls),
                   static_cast<uint64_t>(instance)));
  // class style
  const auto rgb = hsv_to_rgb(fract(0.13 + cls * 0.618034), 0.55 + 0.35 * fract(cls * 0.382),
                              0.85);
  const int shape_id = cls % 6;
  const double tex_freq = 2.0 + double((cls / 6 + cls) % 4);
  const double tex_theta = double(cls % 4) * (3.14159265358979 / 4.0);
  // instance variation
  const double s = std::min(h, w);
  const double cx = 0.5 * w + rng.uniform(-0.12, 0.12) * s;
  const double cy = 0.5 * h + rng.uniform(-0.12, 0.12) * s;
  const double radius = (0.30 + rng.uniform(-0.05, 0.05)) * s;
  const double phase = rng.uniform(0.0, 6.2831853);
  const double brightness = rng.uniform(0.85, 1.15);
  const double bg = rng.uniform(0.08, 0.22);

  auto inside = [&](double du, double dv) {
    switch (shape_id) {
      case 0: return du * du + dv * dv <= 1.0;
      case 1: return std::max(std::abs(du), std::abs(dv)) <= 0.9;
      case 2: {
        double r = std::sqrt(du * du + dv * dv);
        return r >= 0.55 && r <= 1.0;
      }
      case 3:
        return (std::abs(du) <= 0.35 && std::abs(dv) <= 1.0) ||
               (std::abs(dv) <= 0.35 && std::abs(du) <= 1.0);
      case 4: return std::abs(du) + std::abs(dv) <= 1.1;
      default:
        return std::abs(du) <= 1.0 &&
               (std::abs(dv - 0.5) <= 0.22 || std::abs(dv + 0.5) <= 0.22);
    }
  };

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double du = (x - cx) / radius, dv = (y - cy) / radius;
      double px[3];
      if (inside(du, dv)) {
        const double t = 0.75 + 0.25 * std::sin(tex_freq * (du * std::cos(tex_theta) +
                                                            dv * std::sin(tex_theta)) *
                                                    3.14159265 +
                                                phase);
        for (int ch = 0; ch < 3; ++ch) px[ch] = rgb[static_cast<size_t>(ch)] * t * brightness;
      } else {
        for (int ch = 0; ch < 3; ++ch) px[ch] = bg;
      }
      for (int ch = 0; ch < 3; ++ch) {
        double v = px[ch] + rng.normal(0.0, 0.02);
        data.at(slot, ch, y, x) = static_cast<T>(std::min(1.0, std::max(0.0, v)));
      }
    }
  }
}

}  // namespace detail

/// Generates the class-separable procedural dataset with a disjoint train/test
/// split (test gets max(1, samples_per_class/4) extra instances per class).
template <class T>
std::pair<ImageBatchT<T>, ImageBatchT<T>> make_synthetic_dataset_t(
    const SyntheticDatasetConfig& cfg) {
  cfg.validate();
  const int test_per_class = std::max(1, cfg.samples_per_class / 4);
  const int c = cfg.image_size[0], h = cfg.image_size[1], w = cfg.image_size[2];
  ImageBatchT<T> train, test;
  train.data = TensorT<T>({cfg.num_classes * cfg.samples_per_class, c, h, w});
  test.data = TensorT<T>({cfg.num_classes * test_per_class, c, h, w});
  for (int cls = 0; cls < cfg.num_classes; ++cls) {
    for (int i = 0; i < cfg.samples_per_class; ++i) {
      const int slot = cls * cfg.samples_per_class + i;
      detail::render_sample(train.data, slot, cls, i, cfg);
      train.labels.push_back(cls);
    }
    for (int i = 0; i < test_per_class; ++i) {
      const int slot = cls * test_per_class + i;
      detail::render_sample(test.data, slot, cls, cfg.samples_per_class + i, cfg);
      test.labels.push_back(cls);
    }
  }
  return {std::move(train), std::move(test)};
}

inline std::pair<ImageBatch, ImageBatch> make_synthetic_dataset(const SyntheticDatasetConfig& cfg) {
  return make_synthetic_dataset_t<float>(cfg);
}

/// Loads a dataset from a directory holding images.getf (N,C,H,W) and
/// labels.json (array of ints). An escape hatch for real data; the synthetic
/// generator is the default path.
inline ImageBatch load_tensor_dataset(const std::filesystem::path& dir) {
  ImageBatch batch;
  batch.data = getf::read(dir / "images.getf");
  Json labels = read_json_file(dir / "labels.json");
  if (!labels.is_array()) throw ParseError("labels.json must be an array");
  for (const auto& l : labels) batch.labels.push_back(l.get<int>());
  if (static_cast<int>(batch.labels.size()) != batch.data.dim(0)) {
    throw ParseError("labels.json length != image count");
  }
  return batch;
}

inline void save_tensor_dataset(const std::filesystem::path& dir, const ImageBatch& batch) {
  std::filesystem::create_directories(dir);
  getf::write(dir / "images.getf", batch.data);
  write_json_file(dir / "labels.json", Json(batch.labels));
}

// ---------------------------------------------------------------------------
// Checkpoints: manifest.json + one tensor file per parameter.

inline void save_checkpoint(const Classifier& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  Json manifest;
  manifest["format"] = "geadv-checkpoint";
  manifest["version"] = 1;
  manifest["kind"] = "classifier";
  manifest["arch_id"] = model.arch_id;
  manifest["num_classes"] = model.num_classes;
  manifest["input_shape"] = model.input_shape;
  manifest["layer_names"] = model.layer_names();
  manifest["seed"] = model.seed;
  Json tensors = Json::array();
  auto params = model.net.parameters();
  for (size_t i = 0; i < params.size(); ++i) {
    const std::string file = "param_" + std::to_string(i) + ".getf";
    getf::write(dir / file, *params[i]);
    tensors.push_back(file);
  }
  manifest["tensors"] = tensors;
  write_json_file(dir / "manifest.json", manifest);
}

inline Classifier load_checkpoint(const std::filesystem::path& dir) {
  Json manifest = read_json_file(dir / "manifest.json");
  if (manifest.value("format", "") != "geadv-checkpoint" || manifest.value("kind", "") != "classifier") {
    throw ParseError("not a classifier checkpoint: " + dir.string());
  }
  if (manifest.value("version", 0) != 1) throw ParseError("unsupported checkpoint version");
  Classifier model = build_model(manifest.at("arch_id").get<std::string>(),
                                 manifest.at("num_classes").get<int>(),
                                 manifest.at("input_shape").get<std::vector<int>>(),
                                 manifest.value("seed", uint64_t(0)));
  const auto names = manifest.at("layer_names").get<std::vector<std::string>>();
  if (names != model.layer_names()) {
    throw ParseError("checkpoint layer names do not match arch '" + model.arch_id + "'");
  }
  const auto files = manifest.at("tensors").get<std::vector<std::string>>();
  auto params = model.net.parameters();
  if (files.size() != params.size()) {
    throw ParseError("checkpoint tensor count does not match arch '" + model.arch_id + "'");
  }
  for (size_t i = 0; i < files.size(); ++i) {
    Tensor t = getf::read(dir / files[i]);
    if (t.shape() != params[i]->shape()) {
      throw ParseError("checkpoint tensor " + files[i] + " shape mismatch for arch '" +
                       model.arch_id + "'");
    }
    *params[i] = std::move(t);
  }
  return model;
}

}  // namespace geadv::zoo
