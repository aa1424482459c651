#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "cuenet/errors.hpp"
#include "cuenet/exec.hpp"
#include "cuenet/tensor.hpp"

namespace cuenet {

namespace kernels {

inline constexpr std::size_t kDepthTile = 256;
inline constexpr std::size_t kColumnTile = 128;

/// c = a * b (or c += a * b). Each c(i,j) accumulates over the inner index in increasing order.
template <typename Scalar>
void gemm(MatView<const Scalar> a, MatView<const Scalar> b, MatView<Scalar> c, bool accumulate = false) {
  const std::size_t k = a.cols;
  const std::size_t n = b.cols;
  exec::parallel_for(
      a.rows,
      [&](std::size_t r0, std::size_t r1) {
        if (!accumulate) {
          for (std::size_t i = r0; i < r1; ++i) std::fill(c.row(i), c.row(i) + n, Scalar{0});
        }
        for (std::size_t t0 = 0; t0 < k; t0 += kDepthTile) {
          const std::size_t t1 = std::min(k, t0 + kDepthTile);
          for (std::size_t i = r0; i < r1; ++i) {
            Scalar* __restrict crow = c.row(i);
            const Scalar* arow = a.row(i);
            for (std::size_t t = t0; t < t1; ++t) {
              const Scalar av = arow[t];
              const Scalar* __restrict brow = b.row(t);
              for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
            exec::count_macs(static_cast<std::uint64_t>(t1 - t0) * n);
          }
        }
      },
      16);
}

/// c = a * b^T with b given as n x k. Each c(i,j) accumulates over k in increasing order.
template <typename Scalar>
void gemm_abt(MatView<const Scalar> a, MatView<const Scalar> b, MatView<Scalar> c) {
  const std::size_t k = a.cols;
  const std::size_t n = b.rows;
  exec::parallel_for(
      a.rows,
      [&](std::size_t r0, std::size_t r1) {
        std::vector<Scalar> tile(k * kColumnTile);
        for (std::size_t j0 = 0; j0 < n; j0 += kColumnTile) {
          const std::size_t jn = std::min(n, j0 + kColumnTile) - j0;
          for (std::size_t jj = 0; jj < jn; ++jj) {
            const Scalar* brow = b.row(j0 + jj);
            for (std::size_t t = 0; t < k; ++t) tile[t * jn + jj] = brow[t];
          }
          for (std::size_t i = r0; i < r1; ++i) {
            Scalar* __restrict crow = c.row(i) + j0;
            const Scalar* arow = a.row(i);
            std::fill(crow, crow + jn, Scalar{0});
            for (std::size_t t = 0; t < k; ++t) {
              const Scalar av = arow[t];
              const Scalar* __restrict trow = tile.data() + t * jn;
              for (std::size_t jj = 0; jj < jn; ++jj) crow[jj] += av * trow[jj];
            }
            exec::count_macs(static_cast<std::uint64_t>(k) * jn);
          }
        }
      },
      16);
}

template <typename Scalar>
Scalar dot(const Scalar* a, const Scalar* b, std::size_t n) {
  Scalar acc{0};
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  exec::count_macs(n);
  return acc;
}

/// y += alpha * x
template <typename Scalar>
void axpy(Scalar alpha, const Scalar* __restrict x, Scalar* __restrict y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
  exec::count_macs(n);
}

template <typename Scalar>
void add_bias_rows(MatView<Scalar> m, const Scalar* bias) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    Scalar* row = m.row(i);
    for (std::size_t j = 0; j < m.cols; ++j) row[j] += bias[j];
  }
}

template <typename Scalar>
void softmax_row_inplace(Scalar* row, std::size_t n, Scalar scale = Scalar{1}) {
  Scalar peak = -std::numeric_limits<Scalar>::infinity();
  for (std::size_t j = 0; j < n; ++j) peak = std::max(peak, row[j] * scale);
  Scalar sum{0};
  for (std::size_t j = 0; j < n; ++j) {
    row[j] = std::exp(row[j] * scale - peak);
    sum += row[j];
  }
  const Scalar inv = Scalar{1} / sum;
  for (std::size_t j = 0; j < n; ++j) row[j] *= inv;
}

}  // namespace kernels

template <Real Scalar>
Tensor<Scalar> matmul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.extent(1) != b.extent(0)) {
    throw DimensionError("matmul: cannot multiply " + shape_string(a.shape()) + " by " +
                         shape_string(b.shape()));
  }
  Tensor<Scalar> c({a.extent(0), b.extent(1)});
  kernels::gemm<Scalar>(as_matrix(a), as_matrix(b), as_matrix(c));
  return c;
}

/// x * w + bias over the last axis of x. The bias may be omitted by passing nullptr.
template <Real Scalar>
Tensor<Scalar> linear(const Tensor<Scalar>& x, const Tensor<Scalar>& w, const Tensor<Scalar>* bias = nullptr) {
  if (w.rank() != 2 || x.shape().back() != w.extent(0)) {
    throw DimensionError("linear: input " + shape_string(x.shape()) + " does not match weight " +
                         shape_string(w.shape()));
  }
  if (bias && bias->size() != w.extent(1)) {
    throw DimensionError("linear: bias " + shape_string(bias->shape()) + " does not match weight " +
                         shape_string(w.shape()));
  }
  Shape out_shape = x.shape();
  out_shape.back() = w.extent(1);
  Tensor<Scalar> y(out_shape);
  auto ym = as_matrix(y);
  kernels::gemm<Scalar>(as_matrix(x), as_matrix(w), ym);
  if (bias) kernels::add_bias_rows(ym, bias->data().data());
  return y;
}

template <Real Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("add: shapes " + shape_string(a.shape()) + " and " + shape_string(b.shape()) +
                         " differ");
  }
  Tensor<Scalar> c = a;
  auto cv = c.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < cv.size(); ++i) cv[i] += bv[i];
  return c;
}

/// Normalizes every last-axis row to zero mean and unit population variance, then applies gamma and beta.
template <Real Scalar>
Tensor<Scalar> layer_norm(const Tensor<Scalar>& x, const Tensor<Scalar>& gamma, const Tensor<Scalar>& beta,
                          Scalar eps = Scalar(1e-6)) {
  const std::size_t d = x.shape().back();
  if (gamma.size() != d || beta.size() != d) {
    throw DimensionError("layer_norm: row width " + std::to_string(d) + " does not match gamma " +
                         shape_string(gamma.shape()) + " / beta " + shape_string(beta.shape()));
  }
  if (!(eps > 0)) throw ParameterError("layer_norm: eps must be positive");
  Tensor<Scalar> y(x.shape());
  const auto in = as_matrix(x);
  auto out = as_matrix(y);
  const Scalar* g = gamma.data().data();
  const Scalar* b = beta.data().data();
  for (std::size_t i = 0; i < in.rows; ++i) {
    const Scalar* row = in.row(i);
    Scalar mean{0};
    for (std::size_t j = 0; j < d; ++j) mean += row[j];
    mean /= static_cast<Scalar>(d);
    Scalar var{0};
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<Scalar>(d);
    const Scalar inv = Scalar{1} / std::sqrt(var + eps);
    Scalar* o = out.row(i);
    for (std::size_t j = 0; j < d; ++j) o[j] = g[j] * ((row[j] - mean) * inv) + b[j];
  }
  return y;
}

template <Real Scalar>
Scalar gelu(Scalar x) {
  return Scalar(0.5) * x * (Scalar{1} + std::erf(x / std::sqrt(Scalar{2})));
}

/// Exact (erf-based) Gaussian error linear unit, elementwise.
template <Real Scalar>
Tensor<Scalar> gelu(const Tensor<Scalar>& x) {
  Tensor<Scalar> y = x;
  for (auto& v : y.data()) v = gelu(v);
  return y;
}

template <Real Scalar>
Tensor<Scalar> softmax_rows(const Tensor<Scalar>& x) {
  Tensor<Scalar> y = x;
  auto m = as_matrix(y);
  for (std::size_t i = 0; i < m.rows; ++i) kernels::softmax_row_inplace(m.row(i), m.cols);
  return y;
}

struct Conv3dGeometry {
  std::array<int, 3> stride{1, 1, 1};
  std::array<int, 3> padding{0, 0, 0};
};

/// Number of kernel taps that land inside [0, extent) summed over all output positions of one axis.
inline std::size_t valid_taps_1d(std::size_t extent, std::size_t kernel, std::size_t pad, std::size_t stride,
                                 std::size_t out_extent) {
  std::size_t total = 0;
  for (std::size_t o = 0; o < out_extent; ++o) {
    const long start = static_cast<long>(o * stride) - static_cast<long>(pad);
    const long lo = std::max<long>(0, start);
    const long hi = std::min<long>(static_cast<long>(extent), start + static_cast<long>(kernel));
    if (hi > lo) total += static_cast<std::size_t>(hi - lo);
  }
  return total;
}

inline std::size_t conv_out_extent(std::size_t extent, std::size_t kernel, std::size_t pad, std::size_t stride) {
  return (extent + 2 * pad - kernel) / stride + 1;
}

/// Cross-correlation of a (T, H, W, c_in) volume with a (kt, kh, kw, c_in, c_out) kernel over a zero-padded input.
template <Real Scalar>
Tensor<Scalar> conv3d(const Tensor<Scalar>& x, const Tensor<Scalar>& kernel, Conv3dGeometry geo = {}) {
  if (x.rank() != 4 || kernel.rank() != 5 || kernel.extent(3) != x.extent(3)) {
    throw DimensionError("conv3d: input " + shape_string(x.shape()) + " incompatible with kernel " +
                         shape_string(kernel.shape()));
  }
  for (int axis = 0; axis < 3; ++axis) {
    if (geo.stride[axis] <= 0) throw ParameterError("conv3d: stride must be positive");
    if (geo.padding[axis] < 0) throw ParameterError("conv3d: padding must be non-negative");
    if (kernel.extent(axis) > x.extent(axis) + 2 * static_cast<std::size_t>(geo.padding[axis])) {
      throw ParameterError("conv3d: kernel " + shape_string(kernel.shape()) + " exceeds padded input " +
                           shape_string(x.shape()));
    }
  }
  const std::size_t cin = x.extent(3);
  const std::size_t cout = kernel.extent(4);
  std::array<std::size_t, 3> in{}, k{}, out{}, s{}, p{};
  for (int a = 0; a < 3; ++a) {
    in[a] = x.extent(a);
    k[a] = kernel.extent(a);
    s[a] = static_cast<std::size_t>(geo.stride[a]);
    p[a] = static_cast<std::size_t>(geo.padding[a]);
    out[a] = conv_out_extent(in[a], k[a], p[a], s[a]);
  }
  Tensor<Scalar> y({out[0], out[1], out[2], cout});
  const Scalar* xd = x.data().data();
  const Scalar* kd = kernel.data().data();
  Scalar* yd = y.data().data();
  exec::parallel_for(out[0], [&](std::size_t t0, std::size_t t1) {
    for (std::size_t ot = t0; ot < t1; ++ot) {
      for (std::size_t oh = 0; oh < out[1]; ++oh) {
        for (std::size_t ow = 0; ow < out[2]; ++ow) {
          Scalar* acc = yd + ((ot * out[1] + oh) * out[2] + ow) * cout;
          for (std::size_t dt = 0; dt < k[0]; ++dt) {
            const long it = static_cast<long>(ot * s[0] + dt) - static_cast<long>(p[0]);
            if (it < 0 || it >= static_cast<long>(in[0])) continue;
            for (std::size_t dh = 0; dh < k[1]; ++dh) {
              const long ih = static_cast<long>(oh * s[1] + dh) - static_cast<long>(p[1]);
              if (ih < 0 || ih >= static_cast<long>(in[1])) continue;
              for (std::size_t dw = 0; dw < k[2]; ++dw) {
                const long iw = static_cast<long>(ow * s[2] + dw) - static_cast<long>(p[2]);
                if (iw < 0 || iw >= static_cast<long>(in[2])) continue;
                const Scalar* xin = xd + ((static_cast<std::size_t>(it) * in[1] + static_cast<std::size_t>(ih)) * in[2] +
                                          static_cast<std::size_t>(iw)) * cin;
                const Scalar* slab = kd + ((dt * k[1] + dh) * k[2] + dw) * cin * cout;
                for (std::size_t ci = 0; ci < cin; ++ci) {
                  const Scalar xv = xin[ci];
                  const Scalar* __restrict krow = slab + ci * cout;
                  for (std::size_t co = 0; co < cout; ++co) acc[co] += xv * krow[co];
                }
                exec::count_macs(static_cast<std::uint64_t>(cin) * cout);
              }
            }
          }
        }
      }
    }
  });
  return y;
}

/// Depthwise (per-channel) 3D convolution, stride 1, zero padding of half the kernel so the shape is preserved.
template <Real Scalar>
Tensor<Scalar> dwconv3d(const Tensor<Scalar>& x, const Tensor<Scalar>& kernel) {
  if (x.rank() != 4 || kernel.rank() != 4 || kernel.extent(3) != x.extent(3)) {
    throw DimensionError("dwconv3d: input " + shape_string(x.shape()) + " incompatible with kernel " +
                         shape_string(kernel.shape()));
  }
  for (std::size_t a = 0; a < 3; ++a) {
    if (kernel.extent(a) % 2 == 0) {
      throw ParameterError("dwconv3d: kernel extents must be odd, got " + shape_string(kernel.shape()));
    }
  }
  const std::size_t T = x.extent(0), H = x.extent(1), W = x.extent(2), d = x.extent(3);
  const std::size_t kt = kernel.extent(0), kh = kernel.extent(1), kw = kernel.extent(2);
  const long pt = static_cast<long>(kt / 2), ph = static_cast<long>(kh / 2), pw = static_cast<long>(kw / 2);
  Tensor<Scalar> y(x.shape());
  const Scalar* xd = x.data().data();
  const Scalar* kd = kernel.data().data();
  Scalar* yd = y.data().data();
  exec::parallel_for(T, [&](std::size_t t0, std::size_t t1) {
    for (std::size_t t = t0; t < t1; ++t) {
      for (std::size_t h = 0; h < H; ++h) {
        for (std::size_t w = 0; w < W; ++w) {
          Scalar* __restrict acc = yd + ((t * H + h) * W + w) * d;
          for (std::size_t dt = 0; dt < kt; ++dt) {
            const long it = static_cast<long>(t + dt) - pt;
            if (it < 0 || it >= static_cast<long>(T)) continue;
            for (std::size_t dh = 0; dh < kh; ++dh) {
              const long ih = static_cast<long>(h + dh) - ph;
              if (ih < 0 || ih >= static_cast<long>(H)) continue;
              for (std::size_t dw = 0; dw < kw; ++dw) {
                const long iw = static_cast<long>(w + dw) - pw;
                if (iw < 0 || iw >= static_cast<long>(W)) continue;
                const Scalar* __restrict xin =
                    xd + ((static_cast<std::size_t>(it) * H + static_cast<std::size_t>(ih)) * W +
                          static_cast<std::size_t>(iw)) * d;
                const Scalar* __restrict tap = kd + ((dt * kh + dh) * kw + dw) * d;
                for (std::size_t c = 0; c < d; ++c) acc[c] += xin[c] * tap[c];
                exec::count_macs(d);
              }
            }
          }
        }
      }
    }
  });
  return y;
}

}  // namespace cuenet
