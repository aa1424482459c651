#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "cuenet/errors.hpp"
#include "cuenet/exec.hpp"
#include "cuenet/ops.hpp"
#include "cuenet/tensor.hpp"

namespace cuenet {

enum class AttentionKind { self_attention, meaa, eaa_original };

inline const char* attention_name(AttentionKind k) {
  switch (k) {
    case AttentionKind::self_attention: return "self";
    case AttentionKind::meaa: return "meaa";
    case AttentionKind::eaa_original: return "eaa";
  }
  return "?";
}

inline AttentionKind parse_attention(const std::string& s) {
  if (s == "self" || s == "self_attention") return AttentionKind::self_attention;
  if (s == "meaa") return AttentionKind::meaa;
  if (s == "eaa" || s == "eaa_original") return AttentionKind::eaa_original;
  throw ConfigError("unknown attention kind '" + s + "' (expected self, meaa or eaa)");
}

/// Parameters of the additive attention family. Linear maps act on row vectors (x * W).
/// `query` is the learnable 1 x d query of the modified variant; the original variant
/// projects its queries from the tokens and ignores it.
template <Real Scalar>
struct MeaaParams {
  Tensor<Scalar> query;  // [1, d]
  Tensor<Scalar> wq;     // [d, d]
  Tensor<Scalar> wk;     // [d, d]
  Tensor<Scalar> w_a;    // [d]
  Tensor<Scalar> w1;     // [d, d]
  Tensor<Scalar> b1;     // [d]
  Tensor<Scalar> w2;     // [d, d]
  Tensor<Scalar> b2;     // [d]

  explicit MeaaParams(std::size_t d)
      : query({1, d}), wq({d, d}), wk({d, d}), w_a({d}), w1({d, d}), b1({d}), w2({d, d}), b2({d}) {}

  std::size_t hidden() const { return w_a.size(); }

  void validate() const {
    const std::size_t d = hidden();
    const Shape sq{d, d};
    const bool ok = query.shape() == Shape{1, d} && wq.shape() == sq && wk.shape() == sq && w1.shape() == sq &&
                    w2.shape() == sq && b1.size() == d && b2.size() == d;
    if (!ok) throw DimensionError("additive attention parameters are not all of hidden size " + std::to_string(d));
  }
};

/// Multi-head softmax self-attention: per-head column slices of wq/wk/wv, fused by `fuse`.
template <Real Scalar>
struct SelfAttentionParams {
  Tensor<Scalar> wq;    // [d, d]
  Tensor<Scalar> wk;    // [d, d]
  Tensor<Scalar> wv;    // [d, d]
  Tensor<Scalar> fuse;  // [d, d]
  std::size_t heads = 1;

  SelfAttentionParams(std::size_t d, std::size_t heads_)
      : wq({d, d}), wk({d, d}), wv({d, d}), fuse({d, d}), heads(heads_) {}

  std::size_t hidden() const { return wq.extent(0); }

  void validate() const {
    const std::size_t d = hidden();
    if (heads == 0 || d % heads != 0) {
      throw ConfigError("head count " + std::to_string(heads) + " does not divide hidden size " + std::to_string(d));
    }
    const Shape sq{d, d};
    if (wq.shape() != sq || wk.shape() != sq || wv.shape() != sq || fuse.shape() != sq) {
      throw DimensionError("self-attention maps must all be " + shape_string(sq));
    }
  }
};

namespace detail {

template <Real Scalar>
void check_tokens(const Tensor<Scalar>& tokens, std::size_t d, const char* who) {
  if (tokens.rank() != 2 || tokens.extent(1) != d) {
    throw DimensionError(std::string(who) + ": tokens " + shape_string(tokens.shape()) +
                         " do not have hidden size " + std::to_string(d));
  }
}

template <Real Scalar>
MatView<Scalar> view(exec::Scratch<Scalar>& s, std::size_t rows, std::size_t cols) {
  return {s.data(), rows, cols, cols};
}

template <Real Scalar>
MatView<const Scalar> cview(const exec::Scratch<Scalar>& s, std::size_t rows, std::size_t cols) {
  return {s.data(), rows, cols, cols};
}

/// Copies (n, d) rows out, or their mean as a (1, d) row.
template <Real Scalar>
Tensor<Scalar> emit_rows(const exec::Scratch<Scalar>& rows, std::size_t n, std::size_t d, bool pool) {
  if (!pool) return Tensor<Scalar>({n, d}, std::vector<Scalar>(rows.data(), rows.data() + n * d));
  Tensor<Scalar> out({1, d});
  Scalar* o = out.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    const Scalar* r = rows.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) o[j] += r[j];
  }
  for (std::size_t j = 0; j < d; ++j) o[j] /= static_cast<Scalar>(n);
  return out;
}

template <Real Scalar>
Tensor<Scalar> meaa_impl(const Tensor<Scalar>& query, const Tensor<Scalar>& tokens, const MeaaParams<Scalar>& p,
                         bool pool) {
  p.validate();
  const std::size_t d = p.hidden();
  check_tokens(tokens, d, "meaa");
  if (query.size() != d) throw DimensionError("meaa: query " + shape_string(query.shape()) + " is not 1 x d");
  const std::size_t n = tokens.extent(0);

  exec::Scratch<Scalar> qs(d);
  kernels::gemm<Scalar>({query.data().data(), 1, d, d}, as_matrix(p.wq), view(qs, 1, d));
  exec::Scratch<Scalar> keys(n * d);
  kernels::gemm<Scalar>(as_matrix(tokens), as_matrix(p.wk), view(keys, n, d));

  // Scalar attention weight of the single query; no normalization across tokens.
  exec::Scratch<Scalar> alpha(1);
  alpha[0] = kernels::dot(qs.data(), p.w_a.data().data(), d) / std::sqrt(static_cast<Scalar>(d));
  exec::Scratch<Scalar> global_query(d);
  for (std::size_t j = 0; j < d; ++j) global_query[j] = alpha[0] * qs[j];
  exec::count_macs(d);

  exec::Scratch<Scalar> fused(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) fused[i * d + j] = global_query[j] * keys[i * d + j];
  }
  exec::count_macs(static_cast<std::uint64_t>(n) * d);
  keys.release();
  global_query.release();
  alpha.release();

  exec::Scratch<Scalar> hidden(n * d);
  kernels::gemm<Scalar>(cview(fused, n, d), as_matrix(p.w1), view(hidden, n, d));
  const Scalar* b1 = p.b1.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) hidden[i * d + j] += b1[j] + qs[j];
  }
  fused.release();
  qs.release();

  exec::Scratch<Scalar> out(n * d);
  kernels::gemm<Scalar>(cview(hidden, n, d), as_matrix(p.w2), view(out, n, d));
  kernels::add_bias_rows(view(out, n, d), p.b2.data().data());
  hidden.release();
  return emit_rows(out, n, d, pool);
}

template <Real Scalar>
Tensor<Scalar> eaa_impl(const Tensor<Scalar>& tokens, const MeaaParams<Scalar>& p, bool pool) {
  p.validate();
  const std::size_t d = p.hidden();
  check_tokens(tokens, d, "eaa_original");
  const std::size_t n = tokens.extent(0);

  exec::Scratch<Scalar> queries(n * d);
  kernels::gemm<Scalar>(as_matrix(tokens), as_matrix(p.wq), view(queries, n, d));
  exec::Scratch<Scalar> keys(n * d);
  kernels::gemm<Scalar>(as_matrix(tokens), as_matrix(p.wk), view(keys, n, d));

  // One weight per token, normalized across the sequence.
  exec::Scratch<Scalar> weights(n);
  const Scalar inv_sqrt_d = Scalar{1} / std::sqrt(static_cast<Scalar>(d));
  for (std::size_t i = 0; i < n; ++i) {
    weights[i] = kernels::dot(queries.data() + i * d, p.w_a.data().data(), d) * inv_sqrt_d;
  }
  kernels::softmax_row_inplace(weights.data(), n);

  exec::Scratch<Scalar> global_query(d);
  for (std::size_t i = 0; i < n; ++i) kernels::axpy(weights[i], queries.data() + i * d, global_query.data(), d);

  exec::Scratch<Scalar> fused(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) fused[i * d + j] = global_query[j] * keys[i * d + j];
  }
  exec::count_macs(static_cast<std::uint64_t>(n) * d);
  weights.release();
  keys.release();
  global_query.release();

  exec::Scratch<Scalar> hidden(n * d);
  kernels::gemm<Scalar>(cview(fused, n, d), as_matrix(p.w1), view(hidden, n, d));
  const Scalar* b1 = p.b1.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) hidden[i * d + j] += b1[j] + queries[i * d + j];
  }
  queries.release();
  fused.release();

  exec::Scratch<Scalar> out(n * d);
  kernels::gemm<Scalar>(cview(hidden, n, d), as_matrix(p.w2), view(out, n, d));
  kernels::add_bias_rows(view(out, n, d), p.b2.data().data());
  hidden.release();
  return emit_rows(out, n, d, pool);
}

template <Real Scalar>
Tensor<Scalar> self_attention_impl(const Tensor<Scalar>& tokens, const SelfAttentionParams<Scalar>& p, bool pool,
                                   std::size_t query_block) {
  p.validate();
  const std::size_t d = p.hidden();
  check_tokens(tokens, d, "self_attention");
  const std::size_t n = tokens.extent(0);
  const std::size_t hd = d / p.heads;
  const std::size_t block = query_block == 0 ? n : std::min(query_block, n);

  exec::Scratch<Scalar> q(n * d), k(n * d), v(n * d);
  kernels::gemm<Scalar>(as_matrix(tokens), as_matrix(p.wq), view(q, n, d));
  kernels::gemm<Scalar>(as_matrix(tokens), as_matrix(p.wk), view(k, n, d));
  kernels::gemm<Scalar>(as_matrix(tokens), as_matrix(p.wv), view(v, n, d));
  exec::Scratch<Scalar> heads_out(n * d);
  exec::Scratch<Scalar> scores(block * n);
  const Scalar scale = Scalar{1} / std::sqrt(static_cast<Scalar>(hd));
  const MatView<Scalar> qm = view(q, n, d), km = view(k, n, d), vm = view(v, n, d), cm = view(heads_out, n, d);
  for (std::size_t h = 0; h < p.heads; ++h) {
    for (std::size_t i0 = 0; i0 < n; i0 += block) {
      const std::size_t rows = std::min(block, n - i0);
      MatView<Scalar> s{scores.data(), rows, n, n};
      kernels::gemm_abt<Scalar>(qm.block(i0, h * hd, rows, hd), km.block(0, h * hd, n, hd), s);
      for (std::size_t r = 0; r < rows; ++r) kernels::softmax_row_inplace(s.row(r), n, scale);
      kernels::gemm<Scalar>(s, vm.block(0, h * hd, n, hd), cm.block(i0, h * hd, rows, hd));
    }
  }
  scores.release();
  q.release();
  k.release();
  v.release();

  exec::Scratch<Scalar> out(n * d);
  kernels::gemm<Scalar>(cview(heads_out, n, d), as_matrix(p.fuse), view(out, n, d));
  heads_out.release();
  return emit_rows(out, n, d, pool);
}

}  // namespace detail

/// Modified efficient additive attention pooled over tokens: one learnable query, a scalar
/// attention weight, and a mean over the n fused rows. `query` and `tokens` are expected
/// already layer-normed. Returns 1 x d.
template <Real Scalar>
Tensor<Scalar> meaa(const Tensor<Scalar>& query, const Tensor<Scalar>& tokens, const MeaaParams<Scalar>& p) {
  return detail::meaa_impl(query, tokens, p, true);
}

/// Same as meaa() over a flat row-major token buffer, which may be empty.
template <Real Scalar>
Tensor<Scalar> meaa(const Tensor<Scalar>& query, std::span<const Scalar> tokens, const MeaaParams<Scalar>& p) {
  const std::size_t d = p.hidden();
  if (tokens.empty()) throw EmptySequenceError("meaa: no tokens");
  if (tokens.size() % d != 0) throw DimensionError("meaa: token buffer is not a whole number of rows");
  return detail::meaa_impl(query, Tensor<Scalar>({tokens.size() / d, d}, {tokens.begin(), tokens.end()}), p, true);
}

/// Per-token rows of the modified additive attention (no pooling), n x d.
template <Real Scalar>
Tensor<Scalar> meaa_rows(const Tensor<Scalar>& query, const Tensor<Scalar>& tokens, const MeaaParams<Scalar>& p) {
  return detail::meaa_impl(query, tokens, p, false);
}

/// Original efficient additive attention with an n x d query matrix and softmax-normalized
/// per-token weights, mean-pooled to 1 x d.
template <Real Scalar>
Tensor<Scalar> eaa_original(const Tensor<Scalar>& tokens, const MeaaParams<Scalar>& p) {
  return detail::eaa_impl(tokens, p, true);
}

template <Real Scalar>
Tensor<Scalar> eaa_original_rows(const Tensor<Scalar>& tokens, const MeaaParams<Scalar>& p) {
  return detail::eaa_impl(tokens, p, false);
}

/// Multi-head self-attention over n tokens, n x d. Scores are materialized `query_block`
/// query rows at a time (0 = all n rows at once).
template <Real Scalar>
Tensor<Scalar> self_attention(const Tensor<Scalar>& tokens, const SelfAttentionParams<Scalar>& p,
                              std::size_t query_block = 0) {
  return detail::self_attention_impl(tokens, p, false, query_block);
}

/// Self-attention rows mean-pooled to 1 x d.
template <Real Scalar>
Tensor<Scalar> self_attention_pooled(const Tensor<Scalar>& tokens, const SelfAttentionParams<Scalar>& p,
                                     std::size_t query_block = 0) {
  return detail::self_attention_impl(tokens, p, true, query_block);
}

/// Gradients of <upstream, meaa(query, tokens)> with respect to every input.
template <Real Scalar>
struct MeaaGrads {
  MeaaParams<Scalar> params;
  Tensor<Scalar> tokens;

  MeaaGrads(std::size_t n, std::size_t d) : params(d), tokens({n, d}) {}
};

/// Reverse-mode gradients of the pooled modified additive attention.
template <Real Scalar>
MeaaGrads<Scalar> meaa_grad(const Tensor<Scalar>& query, const Tensor<Scalar>& tokens, const MeaaParams<Scalar>& p,
                            const Tensor<Scalar>& upstream) {
  p.validate();
  const std::size_t d = p.hidden();
  detail::check_tokens(tokens, d, "meaa_grad");
  if (upstream.size() != d) throw DimensionError("meaa_grad: upstream must be 1 x d");
  const std::size_t n = tokens.extent(0);
  if (n == 0) throw EmptySequenceError("meaa_grad: no tokens");
  const Scalar root_d = std::sqrt(static_cast<Scalar>(d));
  const Scalar inv_n = Scalar{1} / static_cast<Scalar>(n);

  const auto row = [d](const Tensor<Scalar>& t) { return t.reshaped({1, d}); };
  const auto transpose = [](const Tensor<Scalar>& m) {
    Tensor<Scalar> t({m.extent(1), m.extent(0)});
    for (std::size_t i = 0; i < m.extent(0); ++i)
      for (std::size_t j = 0; j < m.extent(1); ++j) t(j, i) = m(i, j);
    return t;
  };
  const auto outer = [](const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
    Tensor<Scalar> m({a.size(), b.size()});
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < b.size(); ++j) m(i, j) = a[i] * b[j];
    return m;
  };
  const auto column_sum = [n, d](const Tensor<Scalar>& m) {
    Tensor<Scalar> s({1, d});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) s[j] += m[i * d + j];
    return s;
  };

  // Forward intermediates.
  const Tensor<Scalar> qs = matmul(row(query), p.wq);
  const Tensor<Scalar> keys = matmul(tokens, p.wk);
  Scalar alpha{0};
  for (std::size_t j = 0; j < d; ++j) alpha += qs[j] * p.w_a[j];
  alpha /= root_d;
  Tensor<Scalar> g({1, d});
  for (std::size_t j = 0; j < d; ++j) g[j] = alpha * qs[j];
  Tensor<Scalar> fused({n, d});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) fused[i * d + j] = g[j] * keys[i * d + j];
  Tensor<Scalar> hidden = linear(fused, p.w1, &p.b1);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) hidden[i * d + j] += qs[j];

  MeaaGrads<Scalar> gr(n, d);
  // Every output row receives upstream / n, so row-independent terms collapse to column sums.
  gr.params.b2 = upstream.reshaped({d});
  Tensor<Scalar> hidden_mean = column_sum(hidden);
  for (auto& v : hidden_mean.data()) v *= inv_n;
  gr.params.w2 = outer(hidden_mean, upstream);
  const Tensor<Scalar> d_hidden_total = matmul(row(upstream), transpose(p.w2));  // sum over rows of dH_i
  Tensor<Scalar> d_hidden_row = d_hidden_total;
  for (auto& v : d_hidden_row.data()) v *= inv_n;

  gr.params.b1 = d_hidden_total.reshaped({d});
  Tensor<Scalar> d_qs = d_hidden_total;
  gr.params.w1 = outer(column_sum(fused), d_hidden_row);
  const Tensor<Scalar> d_fused_row = matmul(d_hidden_row, transpose(p.w1));

  const Tensor<Scalar> key_sum = column_sum(keys);
  Tensor<Scalar> d_g({1, d});
  Tensor<Scalar> d_key_row({1, d});
  for (std::size_t j = 0; j < d; ++j) {
    d_g[j] = d_fused_row[j] * key_sum[j];
    d_key_row[j] = d_fused_row[j] * g[j];
  }
  gr.params.wk = outer(column_sum(tokens), d_key_row);
  const Tensor<Scalar> d_token_row = matmul(d_key_row, transpose(p.wk));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) gr.tokens[i * d + j] = d_token_row[j];

  Scalar d_alpha{0};
  for (std::size_t j = 0; j < d; ++j) d_alpha += d_g[j] * qs[j];
  for (std::size_t j = 0; j < d; ++j) {
    d_qs[j] += alpha * d_g[j] + d_alpha * p.w_a[j] / root_d;
    gr.params.w_a[j] = d_alpha * qs[j] / root_d;
  }
  gr.params.wq = outer(query, d_qs);
  gr.params.query = matmul(d_qs, transpose(p.wq));
  return gr;
}

}  // namespace cuenet
