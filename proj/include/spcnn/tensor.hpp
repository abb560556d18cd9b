#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "spcnn/errors.hpp"

namespace spcnn {

/// Dense N-dimensional array, row-major. 4-D activations use the
/// [sample, channel, height, width] layout.
template <typename T>
class TensorT {
 public:
  TensorT() = default;

  explicit TensorT(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(numel(shape_), T(0));
  }

  TensorT(std::vector<int> shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (static_cast<size_t>(numel(shape_)) != data_.size())
      throw ConfigError("tensor: data length does not match shape product");
  }

  static int64_t numel(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) {
      if (d <= 0) throw ConfigError("tensor: non-positive dimension " + std::to_string(d));
      n *= d;
    }
    return n;
  }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // Flat index for a 4-D [n, c, h, w] tensor.
  int64_t index4(int n, int c, int y, int x) const {
    return ((static_cast<int64_t>(n) * shape_[1] + c) * shape_[2] + y) * shape_[3] + x;
  }
  T& at4(int n, int c, int y, int x) { return data_[static_cast<size_t>(index4(n, c, y, x))]; }
  const T& at4(int n, int c, int y, int x) const {
    return data_[static_cast<size_t>(index4(n, c, y, x))];
  }

  T& at2(int r, int c) { return data_[static_cast<size_t>(r) * shape_[1] + c]; }
  const T& at2(int r, int c) const { return data_[static_cast<size_t>(r) * shape_[1] + c]; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const TensorT& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (const T& v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  TensorT reshaped(std::vector<int> shape) const {
    if (numel(shape) != size()) throw ConfigError("tensor: reshape changes element count");
    TensorT out;
    out.shape_ = std::move(shape);
    out.data_ = data_;
    return out;
  }

  template <typename U>
  TensorT<U> cast() const {
    TensorT<U> out(shape_);
    for (int64_t i = 0; i < size(); ++i) out[i] = static_cast<U>(data_[static_cast<size_t>(i)]);
    return out;
  }

  bool operator==(const TensorT& o) const { return shape_ == o.shape_ && data_ == o.data_; }

  std::string shape_str() const {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
    os << ']';
    return os.str();
  }

 private:
  std::vector<int> shape_;
  std::vector<T> data_;
};

using Tensor = TensorT<float>;

}  // namespace spcnn
