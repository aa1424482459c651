#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "cuenet/errors.hpp"

namespace cuenet {

enum class Precision : std::uint8_t { f32 = 0, f64 = 1 };

template <typename Scalar>
concept Real = std::is_same_v<Scalar, float> || std::is_same_v<Scalar, double>;

template <Real Scalar>
constexpr Precision precision_of() {
  return std::is_same_v<Scalar, float> ? Precision::f32 : Precision::f64;
}

constexpr std::size_t precision_width(Precision p) { return p == Precision::f32 ? 4 : 8; }

inline const char* precision_name(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }

using Shape = std::vector<std::size_t>;

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

/// Row-major flat index of a multi-index. Throws BoundsError on rank or range mismatch.
inline std::size_t flatten_index(const Shape& shape, std::span<const std::size_t> index) {
  if (index.size() != shape.size()) {
    throw BoundsError("index rank " + std::to_string(index.size()) + " does not match tensor rank " +
                      std::to_string(shape.size()));
  }
  std::size_t flat = 0;
  for (std::size_t axis = 0; axis < shape.size(); ++axis) {
    if (index[axis] >= shape[axis]) {
      throw BoundsError("index " + std::to_string(index[axis]) + " out of range on axis " +
                        std::to_string(axis) + " of " + shape_string(shape));
    }
    flat = flat * shape[axis] + index[axis];
  }
  return flat;
}

inline Shape unflatten_index(const Shape& shape, std::size_t flat) {
  if (flat >= shape_size(shape)) throw BoundsError("flat index out of range for " + shape_string(shape));
  Shape index(shape.size());
  for (std::size_t axis = shape.size(); axis-- > 0;) {
    index[axis] = flat % shape[axis];
    flat /= shape[axis];
  }
  return index;
}

/// Dense row-major tensor of real samples.
///
/// Extents are all >= 1 and the payload length always equals their product.
template <Real Scalar>
class Tensor {
 public:
  using value_type = Scalar;

  /// Zero-filled tensor of the given shape.
  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    validate_shape();
    data_.assign(shape_size(shape_), Scalar{0});
  }

  Tensor(Shape shape, std::vector<Scalar> data) : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape();
    if (data_.size() != shape_size(shape_)) {
      throw DimensionError("payload of " + std::to_string(data_.size()) + " elements does not fill shape " +
                           shape_string(shape_));
    }
  }

  static Tensor full(Shape shape, Scalar value) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
  }

  static Tensor matrix(std::initializer_list<std::initializer_list<Scalar>> rows) {
    const std::size_t m = rows.size();
    const std::size_t n = m ? rows.begin()->size() : 0;
    std::vector<Scalar> data;
    data.reserve(m * n);
    for (const auto& row : rows) {
      if (row.size() != n) throw DimensionError("ragged matrix literal");
      data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor({m, n}, std::move(data));
  }

  static Tensor vector(std::initializer_list<Scalar> values) {
    return Tensor({values.size()}, std::vector<Scalar>(values));
  }

  static constexpr Precision precision() { return precision_of<Scalar>(); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }

  std::span<Scalar> data() { return data_; }
  std::span<const Scalar> data() const { return data_; }
  const std::vector<Scalar>& values() const { return data_; }

  Scalar& operator[](std::size_t flat) { return data_[flat]; }
  const Scalar& operator[](std::size_t flat) const { return data_[flat]; }

  template <typename... Idx>
    requires(std::is_convertible_v<Idx, std::size_t> && ...)
  Scalar& operator()(Idx... idx) {
    const std::size_t index[] = {static_cast<std::size_t>(idx)...};
    return data_[flatten_index(shape_, index)];
  }

  template <typename... Idx>
    requires(std::is_convertible_v<Idx, std::size_t> && ...)
  const Scalar& operator()(Idx... idx) const {
    const std::size_t index[] = {static_cast<std::size_t>(idx)...};
    return data_[flatten_index(shape_, index)];
  }

  /// Same payload under a new shape of equal element count.
  Tensor reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

  /// Element-converting copy.
  template <Real Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, std::vector<Other>(data_.begin(), data_.end()));
  }

  bool operator==(const Tensor& other) const = default;

 private:
  void validate_shape() const {
    if (shape_.empty()) throw DimensionError("tensor rank must be at least 1");
    for (std::size_t e : shape_) {
      if (e == 0) throw DimensionError("tensor extents must be >= 1, got " + shape_string(shape_));
    }
  }

  Shape shape_;
  std::vector<Scalar> data_;
};

/// Non-owning strided row-major matrix view.
template <typename Scalar>
struct MatView {
  Scalar* ptr;
  std::size_t rows;
  std::size_t cols;
  std::size_t stride;

  Scalar* row(std::size_t i) const { return ptr + i * stride; }
  Scalar& operator()(std::size_t i, std::size_t j) const { return ptr[i * stride + j]; }

  MatView block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const {
    return {ptr + r0 * stride + c0, nr, nc, stride};
  }
  operator MatView<const Scalar>() const { return {ptr, rows, cols, stride}; }
};

template <Real Scalar>
MatView<Scalar> as_matrix(Tensor<Scalar>& t) {
  const std::size_t cols = t.shape().back();
  return {t.data().data(), t.size() / cols, cols, cols};
}

template <Real Scalar>
MatView<const Scalar> as_matrix(const Tensor<Scalar>& t) {
  const std::size_t cols = t.shape().back();
  return {t.data().data(), t.size() / cols, cols, cols};
}

template <typename Scalar>
MatView<const Scalar> as_matrix(std::span<const Scalar> values, std::size_t rows, std::size_t cols) {
  return {values.data(), rows, cols, cols};
}

}  // namespace cuenet
