#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <vector>

#include "geadv/common.hpp"

namespace geadv {

/// Dense row-major tensor of up to 4 dimensions. Value semantics throughout;
/// all shapes are runtime values. The scalar type is a template parameter so
/// tests can run reference computations in double against the float build.
template <class T>
class TensorT {
 public:
  TensorT() = default;

  explicit TensorT(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<size_t>(numel_of(shape_)), T(0));
  }

  TensorT(std::initializer_list<int> shape) : TensorT(std::vector<int>(shape)) {}

  static TensorT zeros_like(const TensorT& other) { return TensorT(other.shape_); }

  static TensorT full(std::vector<int> shape, T value) {
    TensorT t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
  }

  const std::vector<int>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  T& at(int n, int c, int h, int w) {
    return data_[static_cast<size_t>(((int64_t(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
  }
  const T& at(int n, int c, int h, int w) const {
    return data_[static_cast<size_t>(((int64_t(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
  }
  T& at(int r, int c) { return data_[static_cast<size_t>(int64_t(r) * shape_[1] + c)]; }
  const T& at(int r, int c) const { return data_[static_cast<size_t>(int64_t(r) * shape_[1] + c)]; }
  T& at(int n, int t, int d) {
    return data_[static_cast<size_t>((int64_t(n) * shape_[1] + t) * shape_[2] + d)];
  }
  const T& at(int n, int t, int d) const {
    return data_[static_cast<size_t>((int64_t(n) * shape_[1] + t) * shape_[2] + d)];
  }

  /// Reinterprets the buffer with a new shape of equal element count.
  TensorT reshaped(std::vector<int> shape) const {
    if (numel_of(shape) != numel()) {
      throw ContractError("reshape from " + shape_str(shape_) + " to " + shape_str(shape) +
                          " changes element count");
    }
    TensorT out = *this;
    out.shape_ = std::move(shape);
    return out;
  }

  void set_shape(std::vector<int> shape) {
    if (numel_of(shape) != numel()) throw ContractError("set_shape changes element count");
    shape_ = std::move(shape);
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  bool same_shape(const TensorT& other) const { return shape_ == other.shape_; }

  TensorT& operator+=(const TensorT& o) {
    check_same(o, "+=");
    for (size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  TensorT& operator-=(const TensorT& o) {
    check_same(o, "-=");
    for (size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  TensorT& operator*=(T s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

  friend TensorT operator+(TensorT a, const TensorT& b) { return a += b; }
  friend TensorT operator-(TensorT a, const TensorT& b) { return a -= b; }
  friend TensorT operator*(TensorT a, T s) { return a *= s; }

  static int64_t numel_of(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) {
      if (d < 0) throw ContractError("negative dimension");
      n *= d;
    }
    return shape.empty() ? 0 : n;
  }

  static std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ")";
    return os.str();
  }

 private:
  void check_same(const TensorT& o, const char* op) const {
    if (!same_shape(o)) {
      throw ContractError(std::string(op) + " shape mismatch " + shape_str(shape_) + " vs " +
                          shape_str(o.shape_));
    }
  }

  std::vector<int> shape_;
  std::vector<T> data_;
};

using Tensor = TensorT<float>;

template <class T>
bool all_finite(const TensorT<T>& t) {
  for (int64_t i = 0; i < t.numel(); ++i) {
    if (!std::isfinite(t[i])) return false;
  }
  return true;
}

template <class T>
T max_abs(const TensorT<T>& t) {
  T m = 0;
  for (int64_t i = 0; i < t.numel(); ++i) m = std::max(m, std::abs(t[i]));
  return m;
}

template <class T>
T max_abs_diff(const TensorT<T>& a, const TensorT<T>& b) {
  if (!a.same_shape(b)) throw ContractError("max_abs_diff shape mismatch");
  T m = 0;
  for (int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

template <class T>
void clamp01_inplace(TensorT<T>& t) {
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = std::min(T(1), std::max(T(0), t[i]));
}

template <class T>
TensorT<T> sign(const TensorT<T>& t) {
  TensorT<T> out = TensorT<T>::zeros_like(t);
  for (int64_t i = 0; i < t.numel(); ++i) out[i] = t[i] > 0 ? T(1) : (t[i] < 0 ? T(-1) : T(0));
  return out;
}

/// Per-image L1 norms of an (N,...) tensor, accumulated in double.
template <class T>
std::vector<double> l1_norm_per_image(const TensorT<T>& t) {
  int n = t.ndim() > 0 ? t.dim(0) : 0;
  int64_t stride = n > 0 ? t.numel() / n : 0;
  std::vector<double> norms(static_cast<size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    const T* p = t.data() + int64_t(i) * stride;
    for (int64_t j = 0; j < stride; ++j) s += std::abs(double(p[j]));
    norms[static_cast<size_t>(i)] = s;
  }
  return norms;
}

/// Divides each image slice by its L1 norm, guarded against zero norms.
template <class T>
TensorT<T> l1_normalize_per_image(const TensorT<T>& t, double guard = 1e-12) {
  TensorT<T> out = t;
  const auto norms = l1_norm_per_image(t);
  int n = t.dim(0);
  int64_t stride = n > 0 ? t.numel() / n : 0;
  for (int i = 0; i < n; ++i) {
    T inv = static_cast<T>(1.0 / (norms[static_cast<size_t>(i)] + guard));
    T* p = out.data() + int64_t(i) * stride;
    for (int64_t j = 0; j < stride; ++j) p[j] *= inv;
  }
  return out;
}

/// Max over images of the per-image L-infinity distance.
template <class T>
T linf_distance(const TensorT<T>& a, const TensorT<T>& b) {
  return max_abs_diff(a, b);
}

template <class T, class U>
TensorT<U> cast_tensor(const TensorT<T>& t) {
  TensorT<U> out(t.shape());
  for (int64_t i = 0; i < t.numel(); ++i) out[i] = static_cast<U>(t[i]);
  return out;
}

}  // namespace geadv
