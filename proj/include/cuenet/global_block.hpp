#pragma once

#include <cstddef>
#include <optional>

#include "cuenet/attention.hpp"
#include "cuenet/uniblocks.hpp"

namespace cuenet {

template <Real Scalar>
struct GlobalBlockParams {
  Tensor<Scalar> dpe_kernel;  // [3, 3, 3, d] depthwise
  LayerNormParams<Scalar> ln_query, ln_tokens, ln_ffn;
  AttentionKind kind = AttentionKind::meaa;
  MeaaParams<Scalar> additive;  // meaa (uses additive.query) and eaa_original
  SelfAttentionParams<Scalar> self;
  FfnParams<Scalar> ffn;

  GlobalBlockParams(std::size_t d, std::size_t heads, std::size_t ffn_width)
      : dpe_kernel({3, 3, 3, d}),
        ln_query(d),
        ln_tokens(d),
        ln_ffn(d),
        additive(d),
        self(d, heads),
        ffn(d, ffn_width) {}
};

/// Dynamic positional embedding: V4 = V3 + DWConv3D(V3) over the spatial token grid.
/// Class tokens take the residual path only.
template <Real Scalar>
TokenField<Scalar> dpe(const TokenField<Scalar>& v3, const Tensor<Scalar>& kernel) {
  if (kernel.rank() != 4) throw DimensionError("dpe: kernel must be kt x kh x kw x d");
  for (std::size_t a = 0; a < 3; ++a) {
    if (kernel.extent(a) % 2 == 0) throw ConfigError("dpe: kernel extents must be odd, got " + shape_string(kernel.shape()));
  }
  const Tensor<Scalar> grid = v3.spatial_grid();
  TokenField<Scalar> v4 = v3;
  v4.set_spatial_grid(add(grid, dwconv3d(grid, kernel)));
  return v4;
}

/// Global token mixer selected by `kind`, over n flattened (already normed) tokens. Returns 1 x d.
template <Real Scalar>
Tensor<Scalar> global_attention(const Tensor<Scalar>& normed_query, const Tensor<Scalar>& normed_tokens,
                                const GlobalBlockParams<Scalar>& p) {
  switch (p.kind) {
    case AttentionKind::meaa: return meaa(normed_query, normed_tokens, p.additive);
    case AttentionKind::eaa_original: return eaa_original(normed_tokens, p.additive);
    case AttentionKind::self_attention: return self_attention_pooled(normed_tokens, p.self);
  }
  throw ConfigError("unknown global attention kind");
}

template <Real Scalar>
struct GlobalTrace {
  std::optional<TokenField<Scalar>> v4;
  std::optional<Tensor<Scalar>> v5;
};

/// Global block: V4 = V3 + DPE(V3); V5 = attention(LN(q), LN(V4)); V6 = V5 + FFN(LN(V5)). Returns V6 (1 x d).
template <Real Scalar>
Tensor<Scalar> global_uniblock_forward(const TokenField<Scalar>& v3, const GlobalBlockParams<Scalar>& p,
                                       GlobalTrace<Scalar>* trace = nullptr) {
  TokenField<Scalar> v4 = v3;
  {
    exec::StageScope stage("global.dpe");
    v4 = dpe(v3, p.dpe_kernel);
  }
  Tensor<Scalar> v5({1, v3.dims().hidden});
  {
    exec::StageScope stage("global.attention");
    const Tensor<Scalar> tokens = layer_norm(v4.flattened(), p.ln_tokens);
    const Tensor<Scalar> query = layer_norm(p.additive.query, p.ln_query);
    v5 = global_attention(query, tokens, p);
  }
  exec::StageScope stage("global.ffn");
  Tensor<Scalar> v6 = add(v5, ffn(layer_norm(v5, p.ln_ffn), p.ffn));
  if (trace) {
    trace->v4 = std::move(v4);
    trace->v5 = std::move(v5);
  }
  return v6;
}

}  // namespace cuenet
