#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "mitonet/error.hpp"

namespace mito {

using Shape = std::vector<int>;

inline std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

inline std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) fail(ErrorCategory::shape, "negative extent in shape " + to_string(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

/// Dense row-major tensor. Activations are laid out batch, channel, row,
/// column; convolution weights out-channel, in-channel, kernel row, kernel
/// column. The gradient buffer is allocated on demand and always matches
/// the value buffer in length.
template <class T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape, T fill = T{0})
      : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

  BasicTensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)), data_(std::move(values)) {
    if (data_.size() != element_count(shape_))
      fail(ErrorCategory::shape, "value count " + std::to_string(data_.size()) + " does not match shape " +
                                     to_string(shape_));
  }

  const Shape& shape() const noexcept { return shape_; }
  int rank() const noexcept { return static_cast<int>(shape_.size()); }
  int dim(int axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  // Activation-layout accessors; only meaningful for rank-4 tensors.
  int batch() const { return dim(0); }
  int channels() const { return dim(1); }
  int height() const { return dim(2); }
  int width() const { return dim(3); }
  std::size_t plane() const { return static_cast<std::size_t>(dim(2)) * static_cast<std::size_t>(dim(3)); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& at(int b, int c, int y, int x) { return data_[offset(b, c, y, x)]; }
  const T& at(int b, int c, int y, int x) const { return data_[offset(b, c, y, x)]; }

  std::size_t offset(int b, int c, int y, int x) const {
    return ((static_cast<std::size_t>(b) * shape_[1] + c) * shape_[2] + y) * shape_[3] + x;
  }

  bool has_grad() const noexcept { return !grad_.empty(); }
  std::span<T> grad() {
    if (grad_.size() != data_.size()) grad_.assign(data_.size(), T{0});
    return grad_;
  }
  std::span<const T> grad() const { return grad_; }
  void zero_grad() { grad_.assign(data_.size(), T{0}); }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  /// Same values under a new shape with equal element count.
  BasicTensor reshaped(Shape shape) const& { return BasicTensor(std::move(shape), data_); }

  template <class U>
  BasicTensor<U> cast() const {
    return BasicTensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<T> data_;
  std::vector<T> grad_;
};

using Tensor = BasicTensor<float>;

inline void require_rank(const Shape& shape, int rank, const char* what) {
  if (static_cast<int>(shape.size()) != rank)
    fail(ErrorCategory::shape, std::string(what) + ": expected rank " + std::to_string(rank) + ", got shape " +
                                   to_string(shape));
}

}  // namespace mito
