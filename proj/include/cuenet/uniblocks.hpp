#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include "cuenet/attention.hpp"
#include "cuenet/exec.hpp"
#include "cuenet/ops.hpp"
#include "cuenet/token_field.hpp"

namespace cuenet {

template <Real Scalar>
struct LayerNormParams {
  Tensor<Scalar> gamma;
  Tensor<Scalar> beta;

  explicit LayerNormParams(std::size_t d) : gamma(Tensor<Scalar>::full({d}, Scalar{1})), beta({d}) {}
};

template <Real Scalar>
Tensor<Scalar> layer_norm(const Tensor<Scalar>& x, const LayerNormParams<Scalar>& p) {
  return layer_norm(x, p.gamma, p.beta);
}

/// Two linear maps around an exact GeLU.
template <Real Scalar>
struct FfnParams {
  Tensor<Scalar> w_in;   // [d, r*d]
  Tensor<Scalar> b_in;   // [r*d]
  Tensor<Scalar> w_out;  // [r*d, d]
  Tensor<Scalar> b_out;  // [d]

  FfnParams(std::size_t d, std::size_t hidden) : w_in({d, hidden}), b_in({hidden}), w_out({hidden, d}), b_out({d}) {}
};

inline std::size_t ffn_hidden(std::size_t d, double ratio) {
  if (!(ratio > 0)) throw ConfigError("ffn ratio must be positive");
  const double h = ratio * static_cast<double>(d);
  if (std::abs(h - std::round(h)) > 1e-9 || h < 1) {
    throw ConfigError("ffn ratio " + std::to_string(ratio) + " does not give a whole hidden width for d=" +
                      std::to_string(d));
  }
  return static_cast<std::size_t>(std::llround(h));
}

/// Local temporal relation aggregator: per-head value maps (concatenated into `value`),
/// a depthwise temporal convolution as the local affinity, then the fusion matrix.
template <Real Scalar>
struct LtParams {
  Tensor<Scalar> value;   // [d, d], column block n is head n's map
  Tensor<Scalar> kernel;  // [kt, d]
  Tensor<Scalar> fuse;    // [d, d]
  std::size_t heads = 1;

  LtParams(std::size_t d, std::size_t heads_, std::size_t kt)
      : value({d, d}), kernel({kt, d}), fuse({d, d}), heads(heads_) {}
};

template <Real Scalar>
struct LocalBlockParams {
  LayerNormParams<Scalar> ln1, ln2, ln3;
  LtParams<Scalar> lt;
  AttentionKind kind = AttentionKind::self_attention;
  SelfAttentionParams<Scalar> gs;
  MeaaParams<Scalar> additive;  // used when kind is meaa or eaa_original
  FfnParams<Scalar> ffn;

  LocalBlockParams(std::size_t d, std::size_t heads, std::size_t kt, std::size_t ffn_width)
      : ln1(d), ln2(d), ln3(d), lt(d, heads, kt), gs(d, heads), additive(d), ffn(d, ffn_width) {}
};

/// Feed-forward network applied to every token (last axis).
template <Real Scalar>
Tensor<Scalar> ffn(const Tensor<Scalar>& x, const FfnParams<Scalar>& p) {
  return linear(gelu(linear(x, p.w_in, &p.b_in)), p.w_out, &p.b_out);
}

template <Real Scalar>
TokenField<Scalar> ffn(const TokenField<Scalar>& v, const FfnParams<Scalar>& p) {
  return with_data(v, ffn(v.tensor(), p));
}

/// Local temporal MHRA. Class tokens skip the temporal convolution (identity affinity).
template <Real Scalar>
TokenField<Scalar> lt_mhra(const TokenField<Scalar>& v, const LtParams<Scalar>& p) {
  const std::size_t d = v.dims().hidden;
  if (p.heads == 0 || d % p.heads != 0) {
    throw ConfigError("lt_mhra: head count " + std::to_string(p.heads) + " does not divide " + std::to_string(d));
  }
  if (p.kernel.rank() != 2 || p.kernel.extent(1) != d) {
    throw DimensionError("lt_mhra: temporal kernel " + shape_string(p.kernel.shape()) + " is not kt x d");
  }
  TokenField<Scalar> values = with_data(v, linear(v.tensor(), p.value));
  const Tensor<Scalar> kernel = p.kernel.reshaped({p.kernel.extent(0), 1, 1, d});
  values.set_spatial_grid(dwconv3d(values.spatial_grid(), kernel));
  return with_data(v, linear(values.tensor(), p.fuse));
}

/// Global spatial MHRA: self-attention among the tokens of each frame, never across frames.
template <Real Scalar>
TokenField<Scalar> gs_mhra(const TokenField<Scalar>& v, const SelfAttentionParams<Scalar>& p) {
  p.validate();
  const GridDims& g = v.dims();
  if (p.hidden() != g.hidden) throw DimensionError("gs_mhra: parameter width does not match token width");
  const std::size_t s = g.tokens_per_frame(), d = g.hidden;
  TokenField<Scalar> out(g);
  for (std::size_t t = 0; t < g.frames; ++t) {
    const Tensor<Scalar> frame({s, d}, std::vector<Scalar>(v.token(t, 0), v.token(t, 0) + s * d));
    const Tensor<Scalar> mixed = self_attention(frame, p);
    std::copy(mixed.data().begin(), mixed.data().end(), out.token(t, 0));
  }
  return out;
}

/// Per-frame additive attention rows (modified or original), used when the local block's
/// spatial mixer is switched away from self-attention.
template <Real Scalar>
TokenField<Scalar> additive_mixer(const TokenField<Scalar>& v, const MeaaParams<Scalar>& p, AttentionKind kind) {
  const GridDims& g = v.dims();
  const std::size_t s = g.tokens_per_frame(), d = g.hidden;
  TokenField<Scalar> out(g);
  for (std::size_t t = 0; t < g.frames; ++t) {
    const Tensor<Scalar> frame({s, d}, std::vector<Scalar>(v.token(t, 0), v.token(t, 0) + s * d));
    const Tensor<Scalar> mixed =
        kind == AttentionKind::meaa ? meaa_rows(p.query, frame, p) : eaa_original_rows(frame, p);
    std::copy(mixed.data().begin(), mixed.data().end(), out.token(t, 0));
  }
  return out;
}

template <Real Scalar>
TokenField<Scalar> local_mixer(const TokenField<Scalar>& v, const LocalBlockParams<Scalar>& p) {
  if (p.kind == AttentionKind::self_attention) return gs_mhra(v, p.gs);
  return additive_mixer(v, p.additive, p.kind);
}

/// One local block with pre-norm residual branches:
///   V1 = V0 + LT(LN(V0)),  V2 = V1 + mixer(LN(V1)),  V3 = V2 + FFN(LN(V2)).
/// `stage_prefix` labels the three branches for MAC counting.
template <Real Scalar>
TokenField<Scalar> local_uniblock_forward(const TokenField<Scalar>& v0, const LocalBlockParams<Scalar>& p,
                                          const std::string& stage_prefix = "local") {
  TokenField<Scalar> v1 = v0;
  {
    exec::StageScope stage(stage_prefix + ".lt");
    v1 = with_data(v0, add(v0.tensor(), lt_mhra(with_data(v0, layer_norm(v0.tensor(), p.ln1)), p.lt).tensor()));
  }
  TokenField<Scalar> v2 = v1;
  {
    exec::StageScope stage(stage_prefix + ".attention");
    v2 = with_data(v1, add(v1.tensor(), local_mixer(with_data(v1, layer_norm(v1.tensor(), p.ln2)), p).tensor()));
  }
  exec::StageScope stage(stage_prefix + ".ffn");
  return with_data(v2, add(v2.tensor(), ffn(layer_norm(v2.tensor(), p.ln3), p.ffn)));
}

}  // namespace cuenet
