#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "geadv/tensor.hpp"

namespace geadv {

/// Mixes a seed with tag words so independent concerns (data shuffling, noise
/// draws, weight init) get decorrelated deterministic streams.
inline uint64_t mix_seed(uint64_t seed, uint64_t a = 0, uint64_t b = 0, uint64_t c = 0) {
  auto split = [](uint64_t& s) {
    s += 0x9e3779b97f4a7c15ULL;
    uint64_t z = s;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  uint64_t s = seed;
  uint64_t h = split(s);
  s ^= a * 0xff51afd7ed558ccdULL;
  h ^= split(s);
  s ^= b * 0xc4ceb9fe1a85ec53ULL;
  h ^= split(s);
  s ^= c * 0x2545f4914f6cdd1dULL;
  h ^= split(s);
  return h;
}

inline uint64_t hash_tag(std::string_view tag) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (char ch : tag) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seeded random source. Deterministic for a given seed on one platform.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), engine_(seed) {}

  uint64_t seed() const { return seed_; }

  /// Child stream for a named concern. Derivation uses the construction seed,
  /// not the engine state, so child streams are independent of draw counts.
  Rng child(std::string_view tag, uint64_t a = 0, uint64_t b = 0) const {
    return Rng(mix_seed(seed_, hash_tag(tag), a, b));
  }

  std::mt19937_64& engine() { return engine_; }

  double uniform(double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    return d(engine_);
  }

  int uniform_int(int lo, int hi) {  // inclusive bounds
    std::uniform_int_distribution<int> d(lo, hi);
    return d(engine_);
  }

  double normal(double mean = 0.0, double stddev = 1.0) {
    std::normal_distribution<double> d(mean, stddev);
    return d(engine_);
  }

  template <class T>
  void fill_normal(TensorT<T>& t, double mean, double stddev) {
    std::normal_distribution<double> d(mean, stddev);
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(d(engine_));
  }

  template <class T>
  void fill_uniform(TensorT<T>& t, double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(d(engine_));
  }

  /// Fisher-Yates shuffle with this stream.
  template <class V>
  void shuffle(V& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(0, static_cast<int>(i - 1)));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace geadv
