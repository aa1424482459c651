#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "cuenet/exec.hpp"
#include "cuenet/ops.hpp"
#include "cuenet/token_field.hpp"

namespace cuenet {

template <Real Scalar>
struct FusionParams {
  Tensor<Scalar> beta;  // [1, d] gate logits
  Tensor<Scalar> proj;  // [d, classes]
  Tensor<Scalar> bias;  // [classes]

  FusionParams(std::size_t d, std::size_t classes) : beta({1, d}), proj({d, classes}), bias({classes}) {}
};

template <Real Scalar>
Scalar sigmoid(Scalar x) {
  return x >= 0 ? Scalar{1} / (Scalar{1} + std::exp(-x)) : std::exp(x) / (Scalar{1} + std::exp(x));
}

/// Video class token: mean over frames of each frame's class token.
template <Real Scalar>
Tensor<Scalar> extract_class_token(const TokenField<Scalar>& v3) {
  const GridDims& g = v3.dims();
  Tensor<Scalar> out({1, g.hidden});
  Scalar* o = out.data().data();
  for (std::size_t t = 0; t < g.frames; ++t) {
    const Scalar* cls = v3.token(t, 0);
    for (std::size_t j = 0; j < g.hidden; ++j) o[j] += cls[j];
  }
  for (std::size_t j = 0; j < g.hidden; ++j) o[j] /= static_cast<Scalar>(g.frames);
  return out;
}

/// Z = (1 - sigmoid(beta)) * global + sigmoid(beta) * cls, elementwise.
template <Real Scalar>
Tensor<Scalar> fuse(const Tensor<Scalar>& global, const Tensor<Scalar>& cls, const Tensor<Scalar>& beta) {
  const std::size_t d = global.size();
  if (cls.size() != d || beta.size() != d) {
    throw DimensionError("fuse: tokens " + shape_string(global.shape()) + ", " + shape_string(cls.shape()) +
                         " and gate " + shape_string(beta.shape()) + " differ in width");
  }
  Tensor<Scalar> z({1, d});
  for (std::size_t j = 0; j < d; ++j) {
    const Scalar gate = sigmoid(beta[j]);
    const Scalar mixed = (Scalar{1} - gate) * global[j] + gate * cls[j];
    // Rounding may step a fraction of an ulp outside the segment; keep Z on it.
    z[j] = std::clamp(mixed, std::min(global[j], cls[j]), std::max(global[j], cls[j]));
  }
  exec::count_macs(2 * static_cast<std::uint64_t>(d));
  return z;
}

/// Class logits z * proj + bias.
template <Real Scalar>
Tensor<Scalar> classify(const Tensor<Scalar>& z, const FusionParams<Scalar>& p) {
  return linear(z.reshaped({1, z.size()}), p.proj, &p.bias).reshaped({p.bias.size()});
}

template <Real Scalar>
std::size_t argmax(const Tensor<Scalar>& logits) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return best;
}

/// d<upstream, fuse(global, cls, beta)>/d beta.
template <Real Scalar>
Tensor<Scalar> fuse_grad_beta(const Tensor<Scalar>& global, const Tensor<Scalar>& cls, const Tensor<Scalar>& beta,
                              const Tensor<Scalar>& upstream) {
  Tensor<Scalar> g({1, beta.size()});
  for (std::size_t j = 0; j < beta.size(); ++j) {
    const Scalar s = sigmoid(beta[j]);
    g[j] = upstream[j] * s * (Scalar{1} - s) * (cls[j] - global[j]);
  }
  return g;
}

template <Real Scalar>
struct ClassifyGrads {
  Tensor<Scalar> proj;
  Tensor<Scalar> bias;
  Tensor<Scalar> z;
};

/// Gradients of <upstream, classify(z)> for the projection, the bias and the input.
template <Real Scalar>
ClassifyGrads<Scalar> classify_grad(const Tensor<Scalar>& z, const FusionParams<Scalar>& p,
                                    const Tensor<Scalar>& upstream) {
  const std::size_t d = z.size(), k = p.bias.size();
  ClassifyGrads<Scalar> g{Tensor<Scalar>({d, k}), upstream.reshaped({k}), Tensor<Scalar>({1, d})};
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      g.proj(i, c) = z[i] * upstream[c];
      g.z[i] += p.proj(i, c) * upstream[c];
    }
  }
  return g;
}

}  // namespace cuenet
