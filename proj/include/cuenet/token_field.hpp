#pragma once

#include <cstddef>

#include "cuenet/tensor.hpp"

namespace cuenet {

struct GridDims {
  std::size_t frames = 1;
  std::size_t height = 1;
  std::size_t width = 1;
  std::size_t hidden = 1;

  std::size_t spatial_tokens() const { return height * width; }
  std::size_t tokens_per_frame() const { return height * width + 1; }
  std::size_t token_count() const { return frames * tokens_per_frame(); }
  bool operator==(const GridDims&) const = default;
};

/// Tokens laid out as (frames, 1 + H*W, d): the class token of each frame sits at index 0,
/// followed by the spatial tokens in row-major (h, w) order.
template <Real Scalar>
class TokenField {
 public:
  explicit TokenField(GridDims dims)
      : dims_(dims), data_({dims.frames, dims.tokens_per_frame(), dims.hidden}) {}

  TokenField(GridDims dims, Tensor<Scalar> data) : dims_(dims), data_(std::move(data)) {
    const Shape want{dims.frames, dims.tokens_per_frame(), dims.hidden};
    if (data_.shape() != want) {
      throw DimensionError("token field: data " + shape_string(data_.shape()) + " does not match " +
                           shape_string(want));
    }
  }

  const GridDims& dims() const { return dims_; }
  const Tensor<Scalar>& tensor() const { return data_; }
  Tensor<Scalar>& tensor() { return data_; }

  Scalar* token(std::size_t frame, std::size_t index) {
    return data_.data().data() + (frame * dims_.tokens_per_frame() + index) * dims_.hidden;
  }
  const Scalar* token(std::size_t frame, std::size_t index) const {
    return data_.data().data() + (frame * dims_.tokens_per_frame() + index) * dims_.hidden;
  }

  /// All tokens as an (n, d) matrix, time-major then token index.
  Tensor<Scalar> flattened() const { return data_.reshaped({dims_.token_count(), dims_.hidden}); }

  /// Spatial tokens as a (T, H, W, d) grid; class tokens are dropped.
  Tensor<Scalar> spatial_grid() const {
    Tensor<Scalar> grid({dims_.frames, dims_.height, dims_.width, dims_.hidden});
    const std::size_t S = dims_.spatial_tokens(), d = dims_.hidden;
    for (std::size_t t = 0; t < dims_.frames; ++t) {
      std::copy(token(t, 1), token(t, 1) + S * d, grid.data().data() + t * S * d);
    }
    return grid;
  }

  /// Overwrites the spatial tokens from a (T, H, W, d) grid.
  void set_spatial_grid(const Tensor<Scalar>& grid) {
    const Shape want{dims_.frames, dims_.height, dims_.width, dims_.hidden};
    if (grid.shape() != want) {
      throw DimensionError("token field: grid " + shape_string(grid.shape()) + " does not match " + shape_string(want));
    }
    const std::size_t S = dims_.spatial_tokens(), d = dims_.hidden;
    for (std::size_t t = 0; t < dims_.frames; ++t) {
      std::copy(grid.data().data() + t * S * d, grid.data().data() + (t + 1) * S * d, token(t, 1));
    }
  }

  bool operator==(const TokenField&) const = default;

 private:
  GridDims dims_;
  Tensor<Scalar> data_;
};

template <Real Scalar>
TokenField<Scalar> with_data(const TokenField<Scalar>& like, Tensor<Scalar> data) {
  return TokenField<Scalar>(like.dims(), std::move(data));
}

}  // namespace cuenet
